"""Manneville-Pomeau maps, their induced first-return map, cylinder intervals
and Schmidt-type interval games, all in arbitrary precision."""

from .kernels import BACKEND
from .numerics import (
    BracketError, ClosedInterval, DomainError, MPGameError, PrecisionError, ResourceError, hp, precision,
)
from .dynamics import MPParams, get_cache, induced_eval, inverse_branch, mp_deriv, mp_eval, p_seq, r_seq
from .cylinders import (
    CylinderTree, children, cylinder_endpoints, default_C5, estimate_C5, get_tree, locate_K, tail_length,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BracketError", "ClosedInterval", "CylinderTree", "DomainError", "MPGameError", "MPParams",
    "PrecisionError", "ResourceError", "children", "cylinder_endpoints", "default_C5", "estimate_C5",
    "get_cache", "get_tree", "hp", "induced_eval", "inverse_branch", "locate_K", "mp_deriv", "mp_eval",
    "p_seq", "precision", "r_seq", "tail_length",
]
