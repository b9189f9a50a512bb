"""Eigenvalue-range bounds and the numerical checks that back them.

The basic bound brackets ``<B>`` by the extreme eigenvalues of
``B_L = W^H B W``.  The remaining functions measure how quickly that
range closes (``eigen_decay_profile``), how close ``B_L`` acts to a scalar
on the ground state (``agsp_residual``) and how well a reduced density
matrix satisfies the local eigenstate constraint (``commutator_residual``).
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np

from .linalg import eigvalsh, hermitian_eigen, partial_trace
from .models import ObservableSpec
from .mps import MPS, expectation
from .patch import PatchSubspace, extract_patch

BASIC = "basic"
CGO = "cgo"


@dataclass
class BoundResult:
    """An interval ``[k_min, k_max]`` for a local expectation value."""

    method: str
    l: int
    q: int
    k_min: float
    k_max: float
    generator_count: int | None = None
    oracle: float | None = None
    seeds: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    generator_counts: dict = field(default_factory=dict)  # CGO: per bound

    def __post_init__(self):
        if self.k_min > self.k_max:
            raise ValueError(f"empty interval [{self.k_min}, {self.k_max}]")

    @property
    def half_width(self) -> float:
        return 0.5 * (self.k_max - self.k_min)

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.k_min - slack <= value <= self.k_max + slack

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["half_width"] = self.half_width
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "BoundResult":
        doc = {k: v for k, v in doc.items() if k != "half_width"}
        return cls(**doc)


def projected_observable(patch: PatchSubspace, observable: ObservableSpec | np.ndarray,
                         sites: tuple[int, int] | None = None) -> np.ndarray:
    """``B_L = W^H B W`` for a two-site observable inside the window."""
    if isinstance(observable, ObservableSpec):
        matrix, sites = observable.matrix, observable.sites
    else:
        matrix = np.asarray(observable)
        if sites is None:
            raise ValueError("sites are required for a bare matrix")
    return patch.project_local(matrix, tuple(sites))


def basic_bounds(patch: PatchSubspace, observable: ObservableSpec, l: int | None = None,
                 oracle: float | None = None, model: dict | None = None) -> BoundResult:
    """Extreme eigenvalues of ``B_L`` as a bound on ``<B>``."""
    b = eigvalsh(projected_observable(patch, observable))
    radius = l if l is not None else observable.sites[0] - patch.window[0]
    seeds = {"observable": observable.seed} if observable.seed is not None else {}
    return BoundResult(BASIC, radius, patch.q, float(b[0]), float(b[-1]), None, oracle, seeds, model or {})


@dataclass
class DecayProfile:
    """Worst deviation ``max_a |b_a - <B>|`` as a function of the radius."""

    ells: list[int]
    deviations: list[float]
    rate: float
    lambda_min_sq: list[float] = field(default_factory=list)
    floor: float = 1e-12

    @property
    def decay_length(self) -> float:
        return float("inf") if self.rate <= 0 else 1.0 / self.rate

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["l", "deviation", "lambda_min_sq"])
        lam = self.lambda_min_sq or [float("nan")] * len(self.ells)
        for row in zip(self.ells, self.deviations, lam):
            w.writerow([row[0], repr(row[1]), repr(row[2])])
        return buf.getvalue()


def fit_decay_rate(xs, ys, floor: float = 1e-12) -> float:
    """Least-squares slope of ``-log y`` against ``x``, ignoring ``y < floor``.

    Returns ``nan`` when fewer than two points survive (nothing to fit),
    and ``inf`` when all points are below the floor.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 3:
        raise ValueError("at least three points are needed for a decay fit")
    mask = ys >= floor
    if not np.any(mask):
        return float("inf")
    if np.count_nonzero(mask) < 2:
        return float("nan")
    slope, _ = np.polyfit(xs[mask], np.log(ys[mask]), 1)
    return float(-slope)


def eigen_decay_profile(mps: MPS, observable: ObservableSpec, ells, keep=None,
                        oracle: float | None = None) -> DecayProfile:
    """How fast the eigenvalues of ``B_L`` collapse onto ``<B>``.

    Uses the contracted projection, so windows far beyond dense reach are
    fine. ``lambda_min_sq`` is the smallest nonzero eigenvalue of ``rho_L``
    restricted to the subspace.
    """
    ells = [int(x) for x in ells]
    if len(ells) < 3:
        raise ValueError("at least three radii are needed for a decay fit")
    value = expectation(mps, observable) if oracle is None else oracle
    devs, lam = [], []
    for ell in ells:
        patch = extract_patch(mps, observable.sites, ell, keep=keep)
        b = eigvalsh(projected_observable(patch, observable))
        devs.append(float(np.max(np.abs(b - value))))
        lam.append(float(eigvalsh(patch.projected_density())[0]))
    return DecayProfile(ells, devs, fit_decay_rate(ells, devs), lam)


def _apply_two_site(psi: np.ndarray, op: np.ndarray, first: int, d: int) -> np.ndarray:
    x = psi.reshape(d**first, d * d, -1)
    return np.einsum("ij,ajb->aib", op, x).reshape(-1)


def _project_window(psi: np.ndarray, w: np.ndarray, window: tuple[int, int], d: int) -> np.ndarray:
    """``W^H`` acting on the window sites of a dense state, shape ``(a, q, b)``."""
    a = d ** window[0]
    x = psi.reshape(a, w.shape[0], -1)
    return np.einsum("iq,aib->aqb", w.conj(), x)


@dataclass
class AgspResidual:
    """``|delta> = B_L |Omega> - <B> |Omega>`` and its spectral decomposition."""

    norm: float
    expectation: float
    weights: np.ndarray
    eigenvalues: np.ndarray

    @property
    def markov_sum(self) -> float:
        """``sum_b <b|rho_L|b> (b - <B>)^2``; equals ``norm**2`` when ``rho_L`` lives in ``V_L``."""
        return float(np.sum(self.weights * (self.eigenvalues - self.expectation) ** 2))

    def weight_outside(self, eps: float) -> float:
        """Ground-state weight on eigenvectors with ``|b - <B>| > eps`` (Markov: ``<= norm**2 / eps**2``)."""
        return float(np.sum(self.weights[np.abs(self.eigenvalues - self.expectation) > eps]))


def agsp_residual(psi: np.ndarray, patch: PatchSubspace, observable: ObservableSpec, N: int) -> AgspResidual:
    """Dense ``||(P_V B P_V) |Omega> - <B> |Omega>||`` for a small chain."""
    d = patch.d
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.size != d**N:
        raise ValueError(f"state of size {psi.size} does not match {N} sites of dimension {d}")
    psi = psi / np.linalg.norm(psi)
    bl = projected_observable(patch, observable)
    b, v = hermitian_eigen(bl)
    coeff = _project_window(psi, patch.basis, patch.window, d)  # (a, q, b)
    inside = np.einsum("qr,arb->aqb", bl, coeff)
    applied = np.einsum("iq,aqb->aib", patch.basis, inside).reshape(-1)
    value = float(np.real(np.vdot(psi, _apply_two_site(psi, observable.matrix, observable.sites[0], d))))
    delta = applied - value * psi
    # <b|rho_L|b> for the eigenvectors of B_L inside V_L
    rho_v = np.einsum("aqb,arb->qr", coeff, coeff.conj())
    weights = np.real(np.einsum("qk,qr,rk->k", v.conj(), rho_v, v))
    return AgspResidual(float(np.linalg.norm(delta)), value, weights, b)


def agsp_profile(psi: np.ndarray, mps: MPS, observable: ObservableSpec, ells, keep=None) -> tuple[list[float], float]:
    """Residual norms over radii and their fitted exponential rate."""
    res = [agsp_residual(psi, extract_patch(mps, observable.sites, ell, keep=keep), observable, mps.N).norm
           for ell in ells]
    return res, fit_decay_rate(list(ells), res)


def commutator_residual(rho: np.ndarray, h: np.ndarray, n_sites: int, d: int,
                        boundary: tuple[int, ...] | None = None) -> float:
    """``||Tr_dL [rho_L, H_L]||_F``.

    ``boundary`` lists window-relative sites traced out; the default is the
    first and last site, i.e. the sites coupled to the rest of the chain.
    """
    dim = d**n_sites
    if rho.shape != (dim, dim) or h.shape != (dim, dim):
        raise ValueError(f"operators must act on {n_sites} sites of dimension {d}")
    if boundary is None:
        boundary = (0, n_sites - 1)
    if any(s < 0 or s >= n_sites for s in boundary) or len(set(boundary)) == n_sites:
        raise ValueError(f"boundary {boundary} is inconsistent with a window of {n_sites} sites")
    keep = [s for s in range(n_sites) if s not in boundary]
    c = rho @ h - h @ rho
    return float(np.linalg.norm(partial_trace(c, [d] * n_sites, keep)))
