"""Segment gene discovery, per-gene generation, and fused forecasting."""

__version__ = "0.1.0"

from .errors import DataError, DimensionError, EvogeneError, NumericError

__all__ = [
    "EvogeneError",
    "DataError",
    "DimensionError",
    "NumericError",
    "__version__",
]
