"""Power-integrity checks for two-layer boards: IR drop, trace sizing and DFM lint."""

__version__ = "0.1.0"
