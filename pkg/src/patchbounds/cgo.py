"""Commutator gauge optimisation.

For an eigenstate, ``<B + [H, A]> = <B>`` for every operator ``A``.  With
anti-Hermitian ``A_i`` supported strictly inside the window, the projected
gauge terms ``G_i = W^H [H_L, A_i] W`` are Hermitian and

    k_max = min_c lambda_max(B_L + sum_i c_i G_i)
    k_min = max_c lambda_min(B_L + sum_i c_i G_i)

are again valid bounds.  Both are semidefinite programs in ``(b, c)``.
The bound reported for a given ``c`` is the eigenvalue itself, evaluated
directly, so it holds whether or not the solver reached optimality.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import sdp
from .bounds import CGO, BoundResult
from .linalg import eigvalsh, hermitize, psd_violation
from .mps import random_antihermitian_operator
from .patch import PatchSubspace

log = logging.getLogger(__name__)

UPPER = "upper"
LOWER = "lower"

ZERO_NORM = 1e-10

STOP_CROSSING = "crossing"
STOP_WIGGLE = "wiggle"
STOP_INFEASIBLE = "infeasible"
STOP_MAX_M = "max_m"
STOP_TRIVIAL = "trivial_gauge"


class DegenerateSubspaceError(RuntimeError):
    """Most projected commutators vanish; the gauge freedom is empty."""


@dataclass
class GeneratorSet:
    """Projected commutators ``G_i``, each of unit Frobenius norm."""

    matrices: np.ndarray  # (m, q, q)
    seed: int | None
    drawn: int
    discarded: int
    raw_norms: list[float] = field(default_factory=list)

    @property
    def m(self) -> int:
        return self.matrices.shape[0]


class GeneratorStream:
    """Seeded, reproducible source of normalised projected commutators.

    ``A`` is the anti-Hermitian part of a random MPO on ``L_0`` (the window
    without its two end sites), padded by identities on the end sites.
    """

    def __init__(self, patch: PatchSubspace, h_l, seed: int, bond: int = 20, zero_tol: float = ZERO_NORM):
        self.patch = patch
        self.seed = seed
        self.bond = bond
        self.zero_tol = zero_tol
        self.rng = np.random.default_rng(seed)
        self.n_inner = patch.n_sites - 2
        if self.n_inner < 1:
            raise ValueError("window has no interior sites for the generators")
        w = patch.basis
        d = patch.d
        self._w = w.reshape(d, d**self.n_inner, d, w.shape[1])
        self._hw = np.asarray(h_l @ w)
        self.matrices: list[np.ndarray] = []
        self.raw_norms: list[float] = []
        self.drawn = 0
        self.discarded = 0

    def _next(self) -> np.ndarray | None:
        a = random_antihermitian_operator(self.n_inner, self.patch.d, self.bond, self.rng)
        aw = np.einsum("ij,ajbq->aibq", a, self._w).reshape(self._hw.shape)
        y = self._hw.conj().T @ aw
        g = y + y.conj().T
        norm = float(np.linalg.norm(g))
        self.drawn += 1
        if norm < self.zero_tol:
            self.discarded += 1
            return None
        self.raw_norms.append(norm)
        return hermitize(g / norm)

    def take(self, m: int) -> np.ndarray:
        """The first ``m`` generators of this stream."""
        while len(self.matrices) < m:
            g = self._next()
            if g is not None:
                self.matrices.append(g)
            elif self.discarded > max(1, self.drawn // 2):
                raise DegenerateSubspaceError(
                    f"{self.discarded} of {self.drawn} projected commutators vanished; "
                    "the subspace leaves no gauge freedom")
        q = self.patch.q
        return np.array(self.matrices[:m]) if m else np.zeros((0, q, q), dtype=complex)

    def generator_set(self, m: int) -> GeneratorSet:
        mats = self.take(m)
        return GeneratorSet(mats, self.seed, self.drawn, self.discarded, self.raw_norms[:m])


def build_generators(patch: PatchSubspace, h_l, m: int, seed: int, bond: int = 20) -> GeneratorSet:
    """``m`` normalised projected commutators from a seeded stream."""
    return GeneratorStream(patch, h_l, seed, bond).generator_set(m)


def gauge_is_trivial(patch: PatchSubspace, h_l, tol: float = ZERO_NORM) -> bool:
    """True when ``H_L W = 0``, so every projected commutator vanishes."""
    hw = h_l @ patch.basis
    scale = max(1.0, float(sp.linalg.norm(h_l)) if sp.issparse(h_l) else float(np.linalg.norm(h_l)))
    return float(np.linalg.norm(hw)) <= tol * scale


@dataclass
class CgoSolve:
    direction: str
    bound: float  # eigenvalue of B_L + sum c_i G_i
    sdp_value: float
    coefficients: np.ndarray
    rho: np.ndarray | None
    status: str
    m: int
    dual_objective: float | None = None
    message: str = ""


def cgo_problem(b_l: np.ndarray, generators: np.ndarray, direction: str) -> sdp.SdpProblem:
    """LMI form in ``x = (t, c)``.

    Upper: ``min t`` s.t. ``t I - B_L - sum c_i G_i >= 0``.
    Lower: ``min -t`` s.t. ``B_L + sum c_i G_i - t I >= 0``.
    """
    q = b_l.shape[0]
    eye = np.eye(q, dtype=complex)[None]
    m = generators.shape[0]
    obj = np.zeros(m + 1)
    if direction == UPPER:
        obj[0] = 1.0
        return sdp.SdpProblem(obj, -b_l, np.concatenate([eye, -generators]))
    if direction == LOWER:
        obj[0] = -1.0
        return sdp.SdpProblem(obj, b_l, np.concatenate([-eye, generators]))
    raise ValueError(f"unknown direction {direction!r}")


def gauged_extreme(b_l: np.ndarray, generators: np.ndarray, c: np.ndarray, direction: str) -> float:
    k = b_l + np.tensordot(c, generators, axes=(0, 0)) if c.size else b_l
    e = eigvalsh(hermitize(k))
    return float(e[-1] if direction == UPPER else e[0])


def cgo_bound(b_l: np.ndarray, generators: np.ndarray, direction: str, tol: float = 1e-9,
              max_iter: int = 200) -> CgoSolve:
    """One SDP in the given direction; ``rho`` is the unit-trace dual matrix."""
    generators = np.asarray(generators)
    m = generators.shape[0]
    if m == 0:
        value = gauged_extreme(b_l, generators, np.zeros(0), direction)
        return CgoSolve(direction, value, value, np.zeros(0), None, sdp.OPTIMAL, 0)
    sol = sdp.solve(cgo_problem(b_l, generators, direction), tol=tol, max_iter=max_iter)
    c = sol.x[1:]
    sign = 1.0 if direction == UPPER else -1.0
    if sol.status in (sdp.INFEASIBLE, sdp.UNBOUNDED):
        bound = -sign * np.inf
        rho = None
    else:
        bound = gauged_extreme(b_l, generators, c, direction)
        rho = sol.Z
        # c = 0 is feasible too; keep it when the solver stopped short of it
        plain = gauged_extreme(b_l, generators, np.zeros(0), direction)
        if sign * (bound - plain) > 0:
            bound, c = plain, np.zeros_like(c)
    return CgoSolve(direction, bound, sign * sol.primal_objective, c, rho, sol.status, m,
                    sign * sol.dual_objective, sol.message)


@dataclass
class TraceStep:
    step: int
    m_upper: int
    m_lower: int
    upper: float
    lower: float
    stop_reason: str = ""
    status_upper: str = sdp.OPTIMAL
    status_lower: str = sdp.OPTIMAL

    @property
    def gap(self) -> float:
        return self.upper - self.lower


@dataclass
class ConvergenceTrace:
    steps: list[TraceStep] = field(default_factory=list)
    final_step: int = 0
    stop_reason: str = ""

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "m_upper", "m_lower", "upper", "lower", "gap", "stop_reason"])
        for s in self.steps:
            w.writerow([s.step, s.m_upper, s.m_lower, repr(s.upper), repr(s.lower), repr(s.gap), s.stop_reason])
        return buf.getvalue()

    @property
    def final(self) -> TraceStep:
        return self.steps[self.final_step]


@dataclass
class CgoConfig:
    batch: int = 20
    max_m: int = 1000
    seed_upper: int = 11
    seed_lower: int = 12
    mpo_bond: int = 20
    wiggle: float = 0.01
    tol: float = 1e-9


@dataclass
class CgoRun:
    result: BoundResult
    trace: ConvergenceTrace
    upper: CgoSolve
    lower: CgoSolve


def _worsened(prev: float, cur: float, direction: str, scale: float) -> bool:
    return (cur - prev if direction == UPPER else prev - cur) > scale


def cgo_incremental(patch: PatchSubspace, b_l: np.ndarray, h_l, config: CgoConfig | None = None,
                    l: int | None = None, oracle: float | None = None, model: dict | None = None) -> CgoRun:
    """Grow independent generator streams for the two bounds batch by batch.

    Each bound advances on its own stream and freezes at its previous value
    when its SDP becomes infeasible or when it worsens by more than
    ``wiggle`` times the current gap, so the two bounds may end with
    different generator counts.  If the bounds cross, the whole run falls
    back to the previous step.  Otherwise a bound stops at ``max_m``.
    """
    cfg = config or CgoConfig()
    if cfg.batch < 1:
        raise ValueError("batch must be >= 1")
    radius = l if l is not None else -1
    seeds = {"upper": cfg.seed_upper, "lower": cfg.seed_lower}
    empty = np.zeros((0,) + b_l.shape, dtype=complex)
    best = {UPPER: cgo_bound(b_l, empty, UPPER), LOWER: cgo_bound(b_l, empty, LOWER)}
    trace = ConvergenceTrace([TraceStep(0, 0, 0, best[UPPER].bound, best[LOWER].bound)])

    def finish(notes):
        step = trace.final
        res = BoundResult(CGO, radius, patch.q, step.lower, step.upper, max(step.m_upper, step.m_lower),
                          oracle, seeds, model or {}, notes)
        res.generator_counts = {UPPER: step.m_upper, LOWER: step.m_lower}
        return CgoRun(res, trace, best[UPPER], best[LOWER])

    if gauge_is_trivial(patch, h_l):
        trace.stop_reason = trace.steps[0].stop_reason = STOP_TRIVIAL
        return finish(["H_L annihilates the subspace: every gauge term vanishes, so the result is the basic interval"])

    streams = {UPPER: GeneratorStream(patch, h_l, cfg.seed_upper, cfg.mpo_bond),
               LOWER: GeneratorStream(patch, h_l, cfg.seed_lower, cfg.mpo_bond)}
    active = {UPPER: True, LOWER: True}
    stopped: dict[str, str] = {}
    step = 0
    while any(active.values()):
        step += 1
        prev = trace.steps[-1]
        trial = dict(best)
        status = {UPPER: prev.status_upper, LOWER: prev.status_lower}
        for direction in (UPPER, LOWER):
            if active[direction]:
                m = min(best[direction].m + cfg.batch, cfg.max_m)
                trial[direction] = cgo_bound(b_l, streams[direction].take(m), direction, tol=cfg.tol)
                status[direction] = trial[direction].status
        up, lo = trial[UPPER], trial[LOWER]
        cur = TraceStep(step, up.m, lo.m, up.bound, lo.bound, "", status[UPPER], status[LOWER])
        trace.steps.append(cur)
        log.info("cgo step %d m=(%d, %d) [%.8f, %.8f] %s/%s", step, up.m, lo.m, lo.bound, up.bound,
                 status[UPPER], status[LOWER])

        bad = (sdp.INFEASIBLE, sdp.UNBOUNDED)
        events = []
        for direction in (UPPER, LOWER):
            if active[direction] and trial[direction].status in bad:
                events.append((direction, STOP_INFEASIBLE))
        finite = all(np.isfinite(t.bound) for t in trial.values())
        if finite and cur.gap < 0:
            cur.stop_reason = trace.stop_reason = STOP_CROSSING
            return finish([f"bounds crossed at m=({up.m}, {lo.m}); reporting the previous step"])
        if finite:
            scale = cfg.wiggle * cur.gap
            for direction in (UPPER, LOWER):
                if active[direction] and _worsened(best[direction].bound, trial[direction].bound, direction, scale):
                    events.append((direction, STOP_WIGGLE))
        for direction, reason in events:
            active[direction] = False
            stopped[direction] = reason
            trial[direction] = best[direction]
        for direction in (UPPER, LOWER):
            if active[direction]:
                best[direction] = trial[direction]
                if best[direction].m >= cfg.max_m:
                    active[direction] = False
                    stopped[direction] = STOP_MAX_M
        if events:
            cur.stop_reason = ";".join(f"{d}:{r}" for d, r in events)
            # a rejected trial is followed by a row holding the accepted values
            trace.steps.append(TraceStep(step, best[UPPER].m, best[LOWER].m, best[UPPER].bound,
                                         best[LOWER].bound, "accepted", best[UPPER].status, best[LOWER].status))
        trace.final_step = len(trace.steps) - 1
    trace.stop_reason = ";".join(f"{d}:{r}" for d, r in stopped.items())
    return finish([f"{d} bound stopped on {r} with m={best[d].m}" for d, r in stopped.items()])


@dataclass
class DualReport:
    psd_violation: float
    trace_deviation: float
    max_constraint: float  # max_i |Tr(rho G_i)|
    objective: float  # Tr(rho B_L)
    trace_distance: float | None = None  # to the oracle W^H rho_L W


def dual_feasibility_report(rho: np.ndarray, generators: np.ndarray, b_l: np.ndarray,
                            oracle_rho: np.ndarray | None = None) -> DualReport:
    """Residuals of the dual constraints for a candidate ``rho``."""
    rho = hermitize(np.asarray(rho))
    cons = np.real(np.einsum("kij,ji->k", generators, rho)) if len(generators) else np.zeros(0)
    dist = None
    if oracle_rho is not None:
        o = hermitize(np.asarray(oracle_rho))
        o = o / np.trace(o).real
        dist = float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(rho - o))))
    return DualReport(
        psd_violation=psd_violation(rho),
        trace_deviation=float(abs(np.trace(rho).real - 1.0)),
        max_constraint=float(np.max(np.abs(cons))) if cons.size else 0.0,
        objective=float(np.real(np.trace(rho @ b_l))),
        trace_distance=dist,
    )
