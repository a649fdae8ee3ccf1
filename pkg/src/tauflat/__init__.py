"""Numerical and exact tools for flat-connection moduli on nonorientable surfaces."""

__version__ = "0.1.0"

from .groups import SO, SU, GroupId, Sp  # noqa: E402
from .variety import RP2, Klein, Orientable  # noqa: E402

__all__ = ["GroupId", "SU", "SO", "Sp", "RP2", "Klein", "Orientable", "__version__"]
