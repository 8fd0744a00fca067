"""PPG biological-age benchmarking pipeline."""

__version__ = "0.1.0"
