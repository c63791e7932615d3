"""Bell-test simulator and analysis toolkit for extremely high-loss channels."""

__version__ = "0.1.0"
