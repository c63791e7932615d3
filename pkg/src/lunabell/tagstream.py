"""Time-tag streams, coincidence matching, histograms and binary I/O.

Detections are (time, channel) records with 64-bit picosecond timestamps
and channels 0-3 (alice +/-, bob +/-; channels 4-15 reserved). Streams are
kept as parallel numpy arrays so a full coincidence pass over 1e7 tags
stays vectorized.

Coincidence pairing is greedy-nearest-unique: among all alice/bob pairs
within the window, the smallest |dt| wins first and each tag is used at
most once, with ties broken toward the earlier bob tag and then the
earlier alice tag. Because tags further apart than one window can never
pair, the match decomposes over gap-separated components, which is what
the fast path exploits and what makes a bounded-memory streaming pass
possible.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

import numpy as np

TAG_MAGIC = b"LBTAG\x00\x00\x00"
PAIR_MAGIC = b"LBPAIR\x00\x00"
FORMAT_VERSION = 1
HEADER_BYTES = 16
TAG_RECORD_BYTES = 16
PAIR_RECORD_BYTES = 24

MAX_CHANNEL = 16

CHANNEL_ALICE_PLUS = 0
CHANNEL_ALICE_MINUS = 1
CHANNEL_BOB_PLUS = 2
CHANNEL_BOB_MINUS = 3

_TAG_DTYPE = np.dtype([("time", "<u8"), ("channel", "u1"), ("flags", "u1"), ("pad", "V6")])
_PAIR_DTYPE = np.dtype(
    [("a_time", "<u8"), ("b_time", "<u8"), ("a_channel", "u1"), ("b_channel", "u1"), ("pad", "V6")]
)


class TagStreamError(ValueError):
    """Invalid stream content."""


class UnsortedStreamError(TagStreamError):
    """Stream violates time order; position is the first offending index."""

    def __init__(self, position: int, message: str | None = None):
        self.position = position
        super().__init__(message or f"stream not time-sorted at index {position}")


class TagFileError(ValueError):
    """Malformed tag or pair file; offset is the first offending byte."""

    def __init__(self, offset: int, message: str):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})")


class TimeTag(NamedTuple):
    time_ps: int
    channel: int


@dataclass
class TagStream:
    """Time-sorted tags as parallel numpy arrays."""

    times: np.ndarray
    channels: np.ndarray

    def __post_init__(self) -> None:
        self.times = np.ascontiguousarray(self.times, dtype=np.uint64)
        self.channels = np.ascontiguousarray(self.channels, dtype=np.uint8)
        if self.times.shape != self.channels.shape:
            raise TagStreamError("times and channels must have equal length")
        if self.channels.size and int(self.channels.max()) >= MAX_CHANNEL:
            bad = int(np.argmax(self.channels >= MAX_CHANNEL))
            raise TagStreamError(f"channel out of range at index {bad}")

    def __len__(self) -> int:
        return int(self.times.size)

    def __getitem__(self, i: int) -> TimeTag:
        return TimeTag(int(self.times[i]), int(self.channels[i]))

    def validate_sorted(self) -> None:
        check_sorted(self.times)

    def select_channels(self, channels: Iterable[int]) -> "TagStream":
        mask = np.isin(self.channels, np.asarray(list(channels), dtype=np.uint8))
        return TagStream(self.times[mask], self.channels[mask])

    @staticmethod
    def empty() -> "TagStream":
        return TagStream(np.empty(0, dtype=np.uint64), np.empty(0, dtype=np.uint8))

    @staticmethod
    def merge(streams: Iterable["TagStream"]) -> "TagStream":
        parts = [s for s in streams if len(s)]
        if not parts:
            return TagStream.empty()
        times = np.concatenate([s.times for s in parts])
        channels = np.concatenate([s.channels for s in parts])
        order = np.argsort(times, kind="stable")
        return TagStream(times[order], channels[order])


def check_sorted(times: np.ndarray) -> None:
    if times.size < 2:
        return
    bad = np.flatnonzero(times[1:] < times[:-1])
    if bad.size:
        raise UnsortedStreamError(int(bad[0]) + 1)


@dataclass(frozen=True)
class CoincidenceConfig:
    """Pairing window; the policy itself is fixed to greedy-nearest-unique."""

    window_ps: int = 500

    def __post_init__(self) -> None:
        if self.window_ps <= 0:
            raise TagStreamError("coincidence window must be > 0 ps")


class CoincidencePair(NamedTuple):
    alice: TimeTag
    bob: TimeTag
    delta_ps: int


@dataclass
class PairSet:
    """Matched pairs as parallel arrays, ordered by alice time."""

    a_times: np.ndarray
    a_channels: np.ndarray
    b_times: np.ndarray
    b_channels: np.ndarray

    def __post_init__(self) -> None:
        self.a_times = np.ascontiguousarray(self.a_times, dtype=np.uint64)
        self.b_times = np.ascontiguousarray(self.b_times, dtype=np.uint64)
        self.a_channels = np.ascontiguousarray(self.a_channels, dtype=np.uint8)
        self.b_channels = np.ascontiguousarray(self.b_channels, dtype=np.uint8)

    def __len__(self) -> int:
        return int(self.a_times.size)

    def __getitem__(self, i: int) -> CoincidencePair:
        return CoincidencePair(
            TimeTag(int(self.a_times[i]), int(self.a_channels[i])),
            TimeTag(int(self.b_times[i]), int(self.b_channels[i])),
            int(self.deltas[i]),
        )

    @property
    def deltas(self) -> np.ndarray:
        """Signed bob - alice time differences in ps."""
        return self.b_times.astype(np.int64) - self.a_times.astype(np.int64)

    @staticmethod
    def empty() -> "PairSet":
        z8, z1 = np.empty(0, dtype=np.uint64), np.empty(0, dtype=np.uint8)
        return PairSet(z8, z1.copy(), z8.copy(), z1.copy())

    @staticmethod
    def concatenate(parts: list["PairSet"]) -> "PairSet":
        parts = [p for p in parts if len(p)]
        if not parts:
            return PairSet.empty()
        return PairSet(
            np.concatenate([p.a_times for p in parts]),
            np.concatenate([p.a_channels for p in parts]),
            np.concatenate([p.b_times for p in parts]),
            np.concatenate([p.b_channels for p in parts]),
        )


def _match_component(a_times: np.ndarray, b_times: np.ndarray, window: int) -> list[tuple[int, int]]:
    """Greedy-nearest-unique match inside one gap-connected component.

    Returns (alice_index, bob_index) pairs, indices local to the inputs.
    Candidates are ranked by (|dt|, bob time, alice time).
    """
    candidates = []
    a64 = a_times.astype(np.int64)
    b64 = b_times.astype(np.int64)
    for i, at in enumerate(a64):
        for j, bt in enumerate(b64):
            d = int(bt - at)
            if abs(d) <= window:
                candidates.append((abs(d), int(bt), int(at), i, j))
    candidates.sort()
    used_a: set[int] = set()
    used_b: set[int] = set()
    out = []
    for _, _, _, i, j in candidates:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        out.append((i, j))
    return out


def find_coincidences(alice: TagStream, bob: TagStream, config: CoincidenceConfig) -> PairSet:
    """Match two time-sorted streams into unique coincidence pairs.

    Single forward pass over the merged time order: tags with no cross
    partner inside the window are dropped up front (they can be in no
    candidate pair and cannot affect anyone else's match), gap-separated
    components of the survivors are resolved independently, two-tag
    components are paired vectorized, and larger components fall back to
    the explicit greedy ranking. Inputs that are not time-sorted are
    rejected with the index of the first violation.

    Timestamps must stay below 2^63 ps (about 106 days) so signed
    differences are exact.
    """
    alice.validate_sorted()
    bob.validate_sorted()
    w = config.window_ps
    if len(alice) == 0 or len(bob) == 0:
        return PairSet.empty()

    a_all = alice.times.astype(np.int64)
    b_all = bob.times.astype(np.int64)
    # active filter: keep only tags with at least one cross partner in
    # the window; candidate-graph components survive this subsetting
    a_active = np.flatnonzero(
        np.searchsorted(b_all, a_all + w, side="right") > np.searchsorted(b_all, a_all - w)
    )
    b_active = np.flatnonzero(
        np.searchsorted(a_all, b_all + w, side="right") > np.searchsorted(a_all, b_all - w)
    )
    n_a, n_b = a_active.size, b_active.size
    if n_a == 0 or n_b == 0:
        return PairSet.empty()

    times = np.concatenate([a_all[a_active], b_all[b_active]])
    is_b = np.zeros(n_a + n_b, dtype=bool)
    is_b[n_a:] = True
    local = np.concatenate([a_active, b_active])
    order = np.argsort(times, kind="stable")  # stable: alice precedes bob at ties
    t = times[order]
    sb = is_b[order]
    si = local[order]

    # component id grows at every merged gap > window
    boundaries = np.diff(t) > w
    comp = np.zeros(t.size, dtype=np.int64)
    np.cumsum(boundaries, out=comp[1:])
    n_comp = int(comp[-1]) + 1

    total = np.bincount(comp, minlength=n_comp)
    nb = np.bincount(comp, weights=sb, minlength=n_comp).astype(np.int64)
    na = total - nb
    starts = np.concatenate([[0], np.cumsum(total)[:-1]])

    # fast path: exactly one tag per side; adjacency inside a component
    # guarantees |dt| <= window
    fast = (na == 1) & (nb == 1)
    fast_start = starts[fast]
    a_idx_parts: list[np.ndarray] = []
    b_idx_parts: list[np.ndarray] = []
    if fast_start.size:
        first, second = fast_start, fast_start + 1
        first_is_b = sb[first]
        a_pos = np.where(first_is_b, second, first)
        b_pos = np.where(first_is_b, first, second)
        a_idx_parts.append(si[a_pos])
        b_idx_parts.append(si[b_pos])

    # fast path: three tags, one lonely side against two partners; the
    # lonely tag takes the nearer admissible partner, ties toward the
    # earlier one, which matches the (|dt|, b_time, a_time) ranking
    tri = np.flatnonzero(((na == 1) & (nb == 2)) | ((na == 2) & (nb == 1)))
    if tri.size:
        s0 = starts[tri]
        pos3 = np.stack([s0, s0 + 1, s0 + 2], axis=1)
        sb3 = sb[pos3]
        lone_is_a = (nb[tri] == 2)
        # column of the lonely tag: where side differs from the pair side
        lone_col = np.where(lone_is_a[:, None], ~sb3, sb3).argmax(axis=1)
        rows = np.arange(tri.size)
        lone_pos = pos3[rows, lone_col]
        partner_cols = np.argsort(pos3[rows] == lone_pos[:, None], axis=1, kind="stable")[:, :2]
        partner_cols.sort(axis=1)  # keep time order: earlier partner first
        p1 = pos3[rows, partner_cols[:, 0]]
        p2 = pos3[rows, partner_cols[:, 1]]
        d1 = np.abs(t[p1] - t[lone_pos])
        d2 = np.abs(t[p2] - t[lone_pos])
        chosen = np.where(d1 <= d2, p1, p2)
        a_pos = np.where(lone_is_a, lone_pos, chosen)
        b_pos = np.where(lone_is_a, chosen, lone_pos)
        a_idx_parts.append(si[a_pos])
        b_idx_parts.append(si[b_pos])

    slow = np.flatnonzero((na >= 1) & (nb >= 1) & (total > 2) & (total != 3))
    for c in slow:
        s, e = int(starts[c]), int(starts[c] + total[c])
        seg_b = sb[s:e]
        seg_t = t[s:e]
        seg_i = si[s:e]
        a_local = seg_i[~seg_b]
        b_local = seg_i[seg_b]
        matches = _match_component(seg_t[~seg_b], seg_t[seg_b], w)
        if matches:
            ai = np.fromiter((a_local[i] for i, _ in matches), dtype=np.int64, count=len(matches))
            bi = np.fromiter((b_local[j] for _, j in matches), dtype=np.int64, count=len(matches))
            a_idx_parts.append(ai)
            b_idx_parts.append(bi)

    if not a_idx_parts:
        return PairSet.empty()
    a_idx = np.concatenate(a_idx_parts)
    b_idx = np.concatenate(b_idx_parts)
    a_t = alice.times[a_idx]
    b_t = bob.times[b_idx]
    emit = np.lexsort((b_t, a_t))  # non-decreasing alice time, then bob time
    return PairSet(a_t[emit], alice.channels[a_idx][emit], b_t[emit], bob.channels[b_idx][emit])


@dataclass
class StreamingCoincider:
    """Bounded-memory incremental wrapper around the coincidence pass.

    Feed time-sorted chunks for either side in any interleaving; pairs are
    emitted once a component can no longer gain members (every unread tag
    is at least `window` beyond it). Carried state between flushes is the
    open component tail, so memory tracks the densest window span rather
    than total stream length; `max_carried_tags` records the high-water
    mark for instrumentation.
    """

    config: CoincidenceConfig
    _a: TagStream = field(default_factory=TagStream.empty)
    _b: TagStream = field(default_factory=TagStream.empty)
    _a_frontier: int = -1
    _b_frontier: int = -1
    _a_done: bool = False
    _b_done: bool = False
    max_carried_tags: int = 0

    def push_alice(self, times: np.ndarray, channels: np.ndarray) -> PairSet:
        return self._push("a", times, channels)

    def push_bob(self, times: np.ndarray, channels: np.ndarray) -> PairSet:
        return self._push("b", times, channels)

    def _push(self, side: str, times: np.ndarray, channels: np.ndarray) -> PairSet:
        chunk = TagStream(times, channels)
        chunk.validate_sorted()
        if side == "a":
            if len(chunk):
                if len(self._a) and chunk.times[0] < self._a.times[-1]:
                    raise UnsortedStreamError(0, "alice chunk overlaps previous chunk")
                self._a = TagStream(
                    np.concatenate([self._a.times, chunk.times]),
                    np.concatenate([self._a.channels, chunk.channels]),
                )
                self._a_frontier = int(chunk.times[-1])
        else:
            if len(chunk):
                if len(self._b) and chunk.times[0] < self._b.times[-1]:
                    raise UnsortedStreamError(0, "bob chunk overlaps previous chunk")
                self._b = TagStream(
                    np.concatenate([self._b.times, chunk.times]),
                    np.concatenate([self._b.channels, chunk.channels]),
                )
                self._b_frontier = int(chunk.times[-1])
        return self._flush(final=False)

    def finish_alice(self) -> PairSet:
        self._a_done = True
        return self._flush(final=self._b_done)

    def finish_bob(self) -> PairSet:
        self._b_done = True
        return self._flush(final=self._a_done)

    def _safe_time(self) -> int | None:
        frontiers = []
        if not self._a_done:
            frontiers.append(self._a_frontier)
        if not self._b_done:
            frontiers.append(self._b_frontier)
        if not frontiers:
            return None  # both done: everything is safe
        return min(frontiers) - self.config.window_ps

    def _flush(self, final: bool) -> PairSet:
        safe = self._safe_time()
        if safe is None or final:
            a_ready, b_ready = self._a, self._b
            self._a, self._b = TagStream.empty(), TagStream.empty()
        else:
            a_cut = int(np.searchsorted(self._a.times, max(safe, 0), side="left"))
            b_cut = int(np.searchsorted(self._b.times, max(safe, 0), side="left"))
            # retreat to the gap > window preceding the cut so no open
            # component is split
            a_cut, b_cut = self._component_safe_cut(a_cut, b_cut)
            a_ready = TagStream(self._a.times[:a_cut], self._a.channels[:a_cut])
            b_ready = TagStream(self._b.times[:b_cut], self._b.channels[:b_cut])
            self._a = TagStream(self._a.times[a_cut:], self._a.channels[a_cut:])
            self._b = TagStream(self._b.times[b_cut:], self._b.channels[b_cut:])
        self.max_carried_tags = max(self.max_carried_tags, len(self._a) + len(self._b))
        # closed components are final: tags without a partner pair nothing
        return find_coincidences(a_ready, b_ready, self.config)

    def _component_safe_cut(self, a_cut: int, b_cut: int) -> tuple[int, int]:
        """Largest (a_cut, b_cut) prefix ending on a merged gap > window."""
        w = self.config.window_ps
        while a_cut > 0 or b_cut > 0:
            last_vals = []
            if a_cut > 0:
                last_vals.append(int(self._a.times[a_cut - 1]))
            if b_cut > 0:
                last_vals.append(int(self._b.times[b_cut - 1]))
            last = max(last_vals)
            nxt_vals = []
            if a_cut < len(self._a):
                nxt_vals.append(int(self._a.times[a_cut]))
            if b_cut < len(self._b):
                nxt_vals.append(int(self._b.times[b_cut]))
            if not nxt_vals or min(nxt_vals) - last > w:
                return a_cut, b_cut
            # shrink the prefix past the tag closest to the boundary
            if a_cut > 0 and (b_cut == 0 or int(self._a.times[a_cut - 1]) >= int(self._b.times[b_cut - 1])):
                a_cut -= 1
            else:
                b_cut -= 1
        return 0, 0


def accidental_rate(rate_a_hz: float, rate_b_hz: float, window_ps: float) -> float:
    """Expected uncorrelated coincidences per second, rate_a*rate_b*window."""
    if rate_a_hz < 0 or rate_b_hz < 0 or window_ps < 0:
        raise TagStreamError("rates and window must be >= 0")
    return rate_a_hz * rate_b_hz * (window_ps * 1e-12)


@dataclass
class DeltaHistogram:
    """Histogram of signed pair time differences.

    fwhm_ps is None when undefined (no contributing entries).
    """

    bin_edges_ps: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum()) if self.counts.size else 0

    @property
    def bin_centers_ps(self) -> np.ndarray:
        return (self.bin_edges_ps[:-1] + self.bin_edges_ps[1:]) / 2.0

    @property
    def fwhm_ps(self) -> float | None:
        """Full width at half maximum via linear interpolation at half height."""
        if self.total == 0:
            return None
        counts = self.counts.astype(float)
        peak = int(np.argmax(counts))
        half = counts[peak] / 2.0
        centers = self.bin_centers_ps

        left = None
        for i in range(peak, -1, -1):
            if counts[i] < half:
                # interpolate between i and i+1
                frac = (half - counts[i]) / (counts[i + 1] - counts[i])
                left = centers[i] + frac * (centers[i + 1] - centers[i])
                break
        if left is None:
            left = self.bin_edges_ps[0]

        right = None
        for i in range(peak, counts.size):
            if counts[i] < half:
                frac = (half - counts[i]) / (counts[i - 1] - counts[i])
                right = centers[i] - frac * (centers[i] - centers[i - 1])
                break
        if right is None:
            right = self.bin_edges_ps[-1]
        return float(right - left)


def delta_histogram(deltas_ps: np.ndarray, bin_width_ps: float, span_ps: float) -> DeltaHistogram:
    """Bin signed time differences into [-span, +span].

    Entries outside the span do not contribute. An empty input yields an
    empty histogram whose FWHM is undefined (None).
    """
    if bin_width_ps <= 0:
        raise TagStreamError("bin width must be > 0")
    if span_ps <= 0:
        raise TagStreamError("span must be > 0")
    deltas = np.asarray(deltas_ps, dtype=np.float64)
    n_bins = max(1, int(np.ceil(2.0 * span_ps / bin_width_ps)))
    edges = -span_ps + bin_width_ps * np.arange(n_bins + 1)
    counts, _ = np.histogram(deltas, bins=edges)
    return DeltaHistogram(bin_edges_ps=edges, counts=counts)


def _write_header(fh, magic: bytes) -> None:
    fh.write(struct.pack("<8sH6x", magic, FORMAT_VERSION))


def _read_header(data: bytes, magic: bytes, path: str) -> None:
    if len(data) < HEADER_BYTES:
        raise TagFileError(0, f"{path}: truncated header")
    got_magic, version = struct.unpack_from("<8sH", data, 0)
    if got_magic != magic:
        raise TagFileError(0, f"{path}: bad magic {got_magic!r}")
    if version != FORMAT_VERSION:
        raise TagFileError(8, f"{path}: unsupported version {version}")


def write_tags(path, stream: TagStream) -> None:
    """Write a tag file: 16-byte header then 16-byte little-endian records."""
    stream.validate_sorted()
    records = np.zeros(len(stream), dtype=_TAG_DTYPE)
    records["time"] = stream.times
    records["channel"] = stream.channels
    with open(path, "wb") as fh:
        _write_header(fh, TAG_MAGIC)
        fh.write(records.tobytes())


def read_tags(path) -> TagStream:
    """Read and validate a tag file written by write_tags."""
    with open(path, "rb") as fh:
        data = fh.read()
    _read_header(data, TAG_MAGIC, str(path))
    body = len(data) - HEADER_BYTES
    n, rem = divmod(body, TAG_RECORD_BYTES)
    if rem:
        raise TagFileError(HEADER_BYTES + n * TAG_RECORD_BYTES, f"{path}: truncated record")
    records = np.frombuffer(data, dtype=_TAG_DTYPE, count=n, offset=HEADER_BYTES)
    times = records["time"]
    if times.size > 1:
        bad = np.flatnonzero(times[1:] < times[:-1])
        if bad.size:
            offset = HEADER_BYTES + (int(bad[0]) + 1) * TAG_RECORD_BYTES
            raise TagFileError(offset, f"{path}: time-order violation")
    channels = records["channel"]
    if channels.size and int(channels.max()) >= MAX_CHANNEL:
        bad_i = int(np.argmax(channels >= MAX_CHANNEL))
        raise TagFileError(HEADER_BYTES + bad_i * TAG_RECORD_BYTES + 8, f"{path}: channel out of range")
    return TagStream(times.copy(), channels.copy())


def iter_tag_chunks(path, chunk_records: int = 1 << 20) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (times, channels) chunks without loading the whole file."""
    with open(path, "rb") as fh:
        header = fh.read(HEADER_BYTES)
        _read_header(header, TAG_MAGIC, str(path))
        offset = HEADER_BYTES
        last_time = None
        while True:
            raw = fh.read(chunk_records * TAG_RECORD_BYTES)
            if not raw:
                break
            n, rem = divmod(len(raw), TAG_RECORD_BYTES)
            if rem:
                raise TagFileError(offset + n * TAG_RECORD_BYTES, f"{path}: truncated record")
            records = np.frombuffer(raw, dtype=_TAG_DTYPE, count=n)
            times = records["time"]
            if times.size:
                if last_time is not None and times[0] < last_time:
                    raise TagFileError(offset, f"{path}: time-order violation")
                bad = np.flatnonzero(times[1:] < times[:-1])
                if bad.size:
                    off = offset + (int(bad[0]) + 1) * TAG_RECORD_BYTES
                    raise TagFileError(off, f"{path}: time-order violation")
                last_time = times[-1]
            yield times.copy(), records["channel"].copy()
            offset += len(raw)


def write_pairs(path, pairs: PairSet) -> None:
    """Write a pair file: header then 24-byte records (a_time, b_time, channels)."""
    records = np.zeros(len(pairs), dtype=_PAIR_DTYPE)
    records["a_time"] = pairs.a_times
    records["b_time"] = pairs.b_times
    records["a_channel"] = pairs.a_channels
    records["b_channel"] = pairs.b_channels
    with open(path, "wb") as fh:
        _write_header(fh, PAIR_MAGIC)
        fh.write(records.tobytes())


def read_pairs(path) -> PairSet:
    with open(path, "rb") as fh:
        data = fh.read()
    _read_header(data, PAIR_MAGIC, str(path))
    body = len(data) - HEADER_BYTES
    n, rem = divmod(body, PAIR_RECORD_BYTES)
    if rem:
        raise TagFileError(HEADER_BYTES + n * PAIR_RECORD_BYTES, f"{path}: truncated record")
    records = np.frombuffer(data, dtype=_PAIR_DTYPE, count=n, offset=HEADER_BYTES)
    return PairSet(
        records["a_time"].copy(),
        records["a_channel"].copy(),
        records["b_time"].copy(),
        records["b_channel"].copy(),
    )
