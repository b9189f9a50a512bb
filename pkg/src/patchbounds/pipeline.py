"""End-to-end runs: model, ground state, patch, bound.

Shared by the command-line tool and the reproduction tests so that both
go through exactly the same configuration handling.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, fields
from importlib import resources

import numpy as np

from . import __version__
from .bounds import BoundResult, basic_bounds, projected_observable
from .cgo import CgoConfig, ConvergenceTrace, cgo_incremental
from .dmrg import DMRGResult, SweepConfig, dmrg_ground_state
from .models import ModelParams, ObservableSpec, SpinChainModel, build_model, build_observable, canonical_model_name
from .mps import MPS, aklt_mps, expectation
from .patch import extract_patch

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    """Every knob of a run; echoed into all outputs."""

    model: str = "ising"
    n: int = 100
    h: float = 1.1
    alpha: float = 0.5
    field_seed: int = 0
    bond: int = 20
    dmrg_seed: int = 1234
    max_sweeps: int = 50
    keep: int = 6
    obs: str = "pxpx"
    obs_rank: int | None = None
    obs_seed: int = 1
    site: int | None = None  # left site of the observable; default is the chain middle
    l: int = 4
    method: str = "basic"
    batch: int = 20
    max_m: int = 1000
    seed_upper: int = 11
    seed_lower: int = 12
    mpo_bond: int = 20
    wiggle: float = 0.01
    sdp_tol: float = 1e-9

    def __post_init__(self):
        self.model = canonical_model_name(self.model)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ValueError(f"unknown configuration key {key!r}")
            kwargs[key] = _coerce(known[key], raw)
        return cls(**kwargs)

    def to_json(self) -> dict:
        return asdict(self)

    @property
    def sites(self) -> tuple[int, int]:
        i = self.n // 2 - 1 if self.site is None else self.site
        return (i, i + 1)

    def cgo_config(self) -> CgoConfig:
        return CgoConfig(self.batch, self.max_m, self.seed_upper, self.seed_lower, self.mpo_bond, self.wiggle,
                         self.sdp_tol)


def _coerce(f, raw):
    if raw is None or not isinstance(raw, str):
        return raw
    if raw.lower() in ("none", ""):
        return None
    kind = str(f.type)
    if "int" in kind:
        return int(raw)
    if "float" in kind:
        return float(raw)
    return raw


def parse_key_values(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def provenance(cfg: RunConfig, **extra) -> dict:
    doc = {"config": cfg.to_json(), "version": __version__}
    doc.update(extra)
    return doc


def model_from_config(cfg: RunConfig) -> SpinChainModel:
    return build_model(cfg.model, cfg.n, ModelParams(h=cfg.h, alpha=cfg.alpha, field_seed=cfg.field_seed))


def observable_from_config(cfg: RunConfig, model: SpinChainModel) -> ObservableSpec:
    rank = cfg.obs_rank if cfg.obs_rank is not None else (2 if model.d == 3 else 1)
    seed = cfg.obs_seed if cfg.obs == "random" else None
    return build_observable(cfg.obs, cfg.sites, model.d, rank=rank, seed=seed, N=model.N)


@dataclass
class GroundState:
    model: SpinChainModel
    mps: MPS
    energy: float
    converged: bool
    method: str
    sweep_energies: list[float]


def ground_state(cfg: RunConfig, model: SpinChainModel | None = None) -> GroundState:
    """DMRG ground state, or the exact valence-bond state for AKLT.

    The open AKLT chain has four zero-energy states (free edge spins); the
    valence-bond MPS with both edge vectors fixed to the first basis
    vector is used, so the choice is deterministic.
    """
    model = model or model_from_config(cfg)
    if model.name == "aklt":
        psi = aklt_mps(model.N)
        psi = MPS(psi.tensors, psi.center, model.fingerprint())
        return GroundState(model, psi, 0.0, True, "aklt-valence-bond", [])
    res: DMRGResult = dmrg_ground_state(model, cfg.bond, SweepConfig(max_sweeps=cfg.max_sweeps, seed=cfg.dmrg_seed))
    return GroundState(model, res.mps, res.energy, res.converged, "dmrg", res.sweep_energies)


@dataclass
class BoundRun:
    result: BoundResult
    trace: ConvergenceTrace | None


def compute_bound(cfg: RunConfig, model: SpinChainModel, mps: MPS, method: str | None = None,
                  l: int | None = None) -> BoundRun:
    """Basic or CGO interval for the configured observable."""
    method = (method or cfg.method).lower()
    ell = cfg.l if l is None else l
    obs = observable_from_config(cfg, model)
    oracle = expectation(mps, obs)
    start = obs.sites[0] - ell
    bonds = [1] + mps.bond_dims + [1]
    keep = min(cfg.keep, bonds[start], bonds[obs.sites[1] + ell + 1])
    patch = extract_patch(mps, obs.sites, ell, keep=keep)
    meta = {"name": model.name, "fingerprint": model.fingerprint(), "N": model.N}
    notes = [] if keep == cfg.keep else [f"keep reduced to the bond dimension {keep}"]
    if method == "basic":
        res = basic_bounds(patch, obs, ell, oracle, meta)
        res.notes += notes
        return BoundRun(res, None)
    if method == "cgo":
        b_l = projected_observable(patch, obs)
        run = cgo_incremental(patch, b_l, model.sparse_hamiltonian(patch.window), cfg.cgo_config(), ell, oracle, meta)
        if obs.seed is not None:
            run.result.seeds["observable"] = obs.seed
        run.result.notes += notes
        return BoundRun(run.result, run.trace)
    raise ValueError(f"unknown method {method!r}")


def reference_values() -> dict:
    """Published reference table shipped with the package."""
    text = resources.files("patchbounds").joinpath("data/reference_values.json").read_text()
    return json.loads(text)


def compare_endpoint(value: float, reference: float, tol: float) -> bool:
    return bool(np.isfinite(value) and abs(value - reference) <= tol)
