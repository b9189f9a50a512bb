"""Rigorous bounds on local observables of MPS ground states from a local patch."""

from .bounds import BoundResult, basic_bounds
from .cgo import CgoConfig, cgo_incremental
from .dmrg import dmrg_ground_state
from .models import build_model, build_observable
from .mps import MPS, expectation
from .patch import PatchSubspace, extract_patch

__version__ = "0.1.0"

__all__ = [
    "BoundResult",
    "CgoConfig",
    "MPS",
    "PatchSubspace",
    "basic_bounds",
    "build_model",
    "build_observable",
    "cgo_incremental",
    "dmrg_ground_state",
    "expectation",
    "extract_patch",
]
