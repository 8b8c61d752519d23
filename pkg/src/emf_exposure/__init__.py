"""Narrow-band RF exposure assessment: instrument control, measurement phases,
a spectrum-analyzer simulator and post-processing."""

__version__ = "0.1.0"
