import numpy as np
import pytest

from lunabell.cli import main
from lunabell.photonics import (
    AnalyzerSettings,
    DetectionScenario,
    DetectorSpec,
    SettingTimeline,
    SourceSpec,
    detect_stream,
)
from lunabell.tagstream import TagStream, write_tags


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def kv(out):
    pairs = {}
    for line in out.splitlines():
        if "=" in line and " " not in line.split("=", 1)[0]:
            key, value = line.split("=", 1)
            pairs[key] = value
    return pairs


class TestSpacetimeCommand:
    def test_reference_windows(self, capsys):
        code, out = run_cli(capsys, "spacetime")
        assert code == 0
        values = kv(out)
        assert float(values["locality_window_s"]) == 0.78
        assert float(values["freedom_of_choice_window_s"]) == 2.06

    def test_exact_light_time_flag(self, capsys):
        code, out = run_cli(
            capsys, "spacetime", "--no-paper-rounding", "--delta-t", "0", "--system-delay", "0"
        )
        values = kv(out)
        assert float(values["locality_window_s"]) == pytest.approx(1.2675, abs=5e-4)

    def test_delta_t_below_system_delay_rejected(self, capsys):
        assert main(["spacetime", "--delta-t", "0"]) == 2


class TestBudgetCommand:
    def test_reference_table(self, capsys):
        code, out = run_cli(capsys, "budget")
        assert code == 0
        assert "Two arms total loss: 101.5 dB" in out
        assert float(kv(out)["pair_loss_db"]) == 101.5

    def test_lab_preset(self, capsys):
        code, out = run_cli(capsys, "budget", "--preset", "paper_lab_103db")
        assert float(kv(out)["pair_loss_db"]) == 103.0

    def test_override(self, capsys):
        code, out = run_cli(capsys, "budget", "--set", "earth.atmospheric_db=6.0")
        assert float(kv(out)["pair_loss_db"]) == 104.5

    def test_config_file(self, capsys, tmp_path):
        cfg = tmp_path / "budget.ini"
        cfg.write_text("[earth]\natmospheric_db = 0.0\n")
        code, out = run_cli(capsys, "budget", "--config", str(cfg))
        assert float(kv(out)["pair_loss_db"]) == 98.5


class TestSimulateReplay:
    def test_simulate_writes_run_dir(self, capsys, tmp_path):
        out_dir = tmp_path / "run"
        code, out = run_cli(
            capsys,
            "simulate",
            "--seed", "3",
            "--duration", "20",
            "--set", "losses.arm_a_db=20", "--set", "losses.arm_b_db=20",
            "--set", "source.pair_rate_hz=1e4",
            "--out", str(out_dir),
        )
        assert code == 0
        assert (out_dir / "report.json").exists()
        original_hash = kv(out)["report_hash"]

        code, out = run_cli(capsys, "replay", "--run", str(out_dir))
        assert code == 0
        assert kv(out)["report_hash"] == original_hash

    def test_analyze_run_artifacts(self, capsys, tmp_path):
        out_dir = tmp_path / "run"
        run_cli(
            capsys,
            "simulate",
            "--seed", "4",
            "--duration", "120",
            "--set", "losses.arm_a_db=15", "--set", "losses.arm_b_db=15",
            "--set", "source.pair_rate_hz=1e5",
            "--out", str(out_dir),
        )
        code, out = run_cli(
            capsys,
            "analyze",
            "--pairs", str(out_dir / "pairs.bin"),
            "--choices", str(out_dir / "choices.log"),
            "--seed", "4",
            "--set", "losses.arm_a_db=15", "--set", "losses.arm_b_db=15",
            "--set", "source.pair_rate_hz=1e5",
        )
        assert code == 0
        values = kv(out)
        assert int(values["pairs"]) > 0
        assert "s_value" in values


class TestCoincideHistogram:
    @pytest.fixture()
    def tag_files(self, tmp_path):
        det = DetectorSpec(efficiency=1.0, jitter_fwhm_ps=40.0, tdc_fwhm_ps=60.0)
        scenario = DetectionScenario(
            source=SourceSpec(pair_rate_hz=1e5, visibility=1.0),
            angles=AnalyzerSettings(),
            alice_timeline=SettingTimeline.constant(0),
            bob_timeline=SettingTimeline.constant(0),
            detectors=(det, det),
        )
        alice, bob = detect_stream(scenario, 0.5, seed=1, mode="raw")
        a_path, b_path = tmp_path / "a.tags", tmp_path / "b.tags"
        write_tags(a_path, alice)
        write_tags(b_path, bob)
        return a_path, b_path

    def test_coincide(self, capsys, tmp_path, tag_files):
        a_path, b_path = tag_files
        pairs_path = tmp_path / "pairs.bin"
        code, out = run_cli(
            capsys, "coincide", str(a_path), str(b_path), "--out", str(pairs_path)
        )
        assert code == 0
        values = kv(out)
        assert int(values["pairs"]) > 0
        assert pairs_path.exists()

        code, out = run_cli(
            capsys, "histogram", "--pairs", str(pairs_path), "--bin", "4", "--span", "400"
        )
        assert code == 0
        fwhm = float(kv(out)["fwhm_ps"])
        assert fwhm == pytest.approx(82.46, abs=8.0)

    def test_coincide_chunked_matches_batch(self, capsys, tmp_path, tag_files):
        a_path, b_path = tag_files
        code, batch_out = run_cli(capsys, "coincide", str(a_path), str(b_path))
        assert code == 0
        code, chunked_out = run_cli(capsys, "coincide", str(a_path), str(b_path), "--chunked")
        assert code == 0
        assert kv(chunked_out)["pairs"] == kv(batch_out)["pairs"]
        assert kv(chunked_out)["alice_tags"] == kv(batch_out)["alice_tags"]

    def test_simulate_with_replayed_choices(self, capsys, tmp_path):
        out_dir = tmp_path / "orig"
        scenario = [
            "--seed", "9", "--duration", "15",
            "--set", "losses.arm_a_db=15", "--set", "losses.arm_b_db=15",
            "--set", "source.pair_rate_hz=1e5",
        ]
        code, out = run_cli(capsys, "simulate", *scenario, "--out", str(out_dir))
        assert code == 0
        first = kv(out)
        code, out = run_cli(
            capsys, "simulate", *scenario, "--choices", str(out_dir / "choices.log")
        )
        assert code == 0
        second = kv(out)
        # same physics seed and identical schedule: identical statistics
        assert second["s_value"] == first["s_value"]
        assert second["n_coincidences"] == first["n_coincidences"]

    def test_missing_file_is_graceful(self, capsys, tmp_path):
        code = main(["coincide", str(tmp_path / "nope.tags"), str(tmp_path / "nope2.tags")])
        assert code == 2


def test_version(capsys):
    with pytest.raises(SystemExit) as exit_info:
        main(["--version"])
    assert exit_info.value.code == 0
