"""Numerical laboratory for bubbling blow-up of perturbed Yamabe flows."""

from .bubble import BubbleParams, DimensionParams
from .errors import DomainError, NumericError

__all__ = ["BubbleParams", "DimensionParams", "DomainError", "NumericError"]
__version__ = "0.1.0"
