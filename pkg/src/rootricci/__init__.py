"""Root-Ricci curvature, candle functions and comparison with constant-curvature models."""

__version__ = "0.1.0"
