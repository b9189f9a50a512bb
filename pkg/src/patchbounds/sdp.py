"""Small dense semidefinite programs with complex Hermitian data.

Solves the linear-matrix-inequality form::

    minimize    c^T x
    subject to  F(x) = F0 + sum_i x_i F_i  >= 0

together with its dual::

    maximize    -Tr(F0 Z)
    subject to  Tr(F_i Z) = c_i,  Z >= 0.

Internally the pair is mapped onto the standard primal/dual form
``min <C, X> s.t. <A_i, X> = b_i, X >= 0`` / ``max b^T y s.t.
sum y_i A_i + S = C, S >= 0`` with ``C = F0``, ``A_i = F_i``, ``b = c``,
``X = Z`` and ``y = -x``, and solved by an infeasible-start primal-dual
interior-point method with Nesterov-Todd scaling and Mehrotra
predictor-corrector steps.  Hermitian matrices are handled natively; inner
products ``Re Tr(A B)`` are evaluated on an isometric real vectorisation.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

log = logging.getLogger(__name__)

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
MAX_ITER = "MaxIter"

# stagnation is only declared once the iterates are this close to optimal
STALL_THRESHOLD = 1e-6


@dataclass
class SdpProblem:
    c: np.ndarray  # (m,)
    F0: np.ndarray  # (n, n)
    F: np.ndarray  # (m, n, n)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.F0 = np.asarray(self.F0, dtype=complex)
        self.F = np.asarray(self.F, dtype=complex)
        if self.F.ndim != 3 or self.F.shape[0] != self.c.size:
            raise ValueError(f"need one matrix per variable: c has {self.c.size}, F has shape {self.F.shape}")
        n = self.F0.shape[0]
        if self.F0.shape != (n, n) or self.F.shape[1:] != (n, n):
            raise ValueError("LMI matrices must all be n x n")
        scale = max(1.0, float(np.max(np.abs(self.F))) if self.F.size else 1.0, float(np.max(np.abs(self.F0))))
        defect = max(
            float(np.max(np.abs(self.F0 - self.F0.conj().T))),
            float(np.max(np.abs(self.F - self.F.conj().transpose(0, 2, 1)))) if self.F.size else 0.0,
        )
        if defect > 1e-12 * scale:
            raise ValueError(f"LMI matrices are not Hermitian (defect {defect:.2e})")

    @property
    def m(self) -> int:
        return self.c.size

    @property
    def n(self) -> int:
        return self.F0.shape[0]

    def lmi(self, x: np.ndarray) -> np.ndarray:
        return self.F0 + np.tensordot(x, self.F, axes=(0, 0))

    def to_json(self) -> dict:
        return {
            "c": self.c.tolist(),
            "F0": {"real": self.F0.real.tolist(), "imag": self.F0.imag.tolist()},
            "F": {"real": self.F.real.tolist(), "imag": self.F.imag.tolist()},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SdpProblem":
        f0 = np.asarray(doc["F0"]["real"], dtype=float) + 1j * np.asarray(doc["F0"]["imag"], dtype=float)
        n = f0.shape[0]
        fr = np.asarray(doc["F"]["real"], dtype=float).reshape(-1, n, n)
        fi = np.asarray(doc["F"]["imag"], dtype=float).reshape(-1, n, n)
        return cls(np.asarray(doc["c"], dtype=float), f0, fr + 1j * fi)

    def dumps(self) -> str:
        return json.dumps(self.to_json())


@dataclass
class IterateRecord:
    iteration: int
    primal_objective: float  # c^T x
    dual_objective: float  # -Tr(F0 Z)
    primal_infeasibility: float  # of the LMI side, ||F(x) - S||
    dual_infeasibility: float  # max |Tr(F_i Z) - c_i|
    mu: float


@dataclass
class SdpSolution:
    x: np.ndarray
    Z: np.ndarray
    primal_objective: float
    dual_objective: float
    gap: float
    status: str
    iterations: int
    lmi_min_eig: float
    dual_residual: float
    history: list[IterateRecord] = field(default_factory=list)
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


# ----------------------------------------------------------------------
# real vectorisation of Hermitian matrices

def _svec_index(n: int):
    iu = np.triu_indices(n, 1)
    return iu


def svec(mats: np.ndarray) -> np.ndarray:
    """Isometric map of Hermitian ``(..., n, n)`` matrices to ``R^{n^2}``."""
    n = mats.shape[-1]
    iu = _svec_index(n)
    diag = np.diagonal(mats, axis1=-2, axis2=-1).real
    up = mats[..., iu[0], iu[1]]
    r2 = np.sqrt(2.0)
    return np.concatenate([diag, r2 * up.real, r2 * up.imag], axis=-1)


def _inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.vdot(a, b).real)


def _herm(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().swapaxes(-1, -2))


def _max_step(lam: np.ndarray, delta: np.ndarray) -> float:
    """Largest ``a`` with ``diag(lam) + a * delta >= 0``."""
    r = 1.0 / np.sqrt(lam)
    w = np.linalg.eigvalsh(_herm(r[:, None] * delta * r[None, :]))
    if w[0] >= 0:
        return np.inf
    return -1.0 / w[0]


def _max_step_chol(L: np.ndarray, delta: np.ndarray) -> float:
    """Largest ``a`` with ``L L^H + a * delta >= 0``."""
    t = sla.solve_triangular(L, delta, lower=True, check_finite=False)
    t = sla.solve_triangular(L, t.conj().T, lower=True, check_finite=False)
    w = np.linalg.eigvalsh(_herm(t))
    if w[0] >= 0:
        return np.inf
    return -1.0 / w[0]


def _is_pd(m: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return False
    return True


def solve(problem: SdpProblem, tol: float = 1e-9, max_iter: int = 200, infeasibility_tol: float = 1e-8,
          verbose: bool = False, stall_iter: int = 5) -> SdpSolution:
    """Primal-dual interior-point solve of ``problem``.

    Returns ``status`` ``Optimal`` when the relative duality gap and both
    residuals are below ``tol``; ``Unbounded`` when ``c^T x`` can be driven
    to minus infinity (dual infeasible); ``Infeasible`` when no ``x`` makes
    the LMI semidefinite; ``MaxIter`` otherwise, in which case the iterate
    with the smallest combined residual is returned.  Progress stalls when
    the Schur complement loses accuracy close to a degenerate optimum; the
    run then stops after ``stall_iter`` iterations without improvement.
    """
    # dividing the LMI by a common scale leaves x unchanged and makes the
    # iterates independent of the overall normalisation of the data
    scale = max(float(np.linalg.norm(problem.F0)),
                float(np.max(np.linalg.norm(problem.F, axis=(1, 2)))) if problem.m else 0.0)
    scale = scale if scale > 0 else 1.0
    A = problem.F / scale
    C = _herm(problem.F0) / scale
    b = problem.c
    m, n = problem.m, problem.n
    eye = np.eye(n)

    norm_c = np.linalg.norm(C)
    norm_a = np.linalg.norm(A.reshape(m, -1), axis=1) if m else np.zeros(0)
    norm_b = np.linalg.norm(b)
    zeta = max(10.0, np.sqrt(n), n * float(np.max((1 + np.abs(b)) / (1 + norm_a))) if m else 10.0)
    eta = max(10.0, np.sqrt(n), norm_c, float(np.max(norm_a)) if m else 0.0)
    X = zeta * eye.astype(complex)
    S = eta * eye.astype(complex)
    y = np.zeros(m)

    history: list[IterateRecord] = []
    best = (np.inf, -1, X, y)  # merit, iteration, X, y
    status = MAX_ITER
    message = ""
    it = 0
    for it in range(max_iter + 1):
        Aty = np.tensordot(y, A, axes=(0, 0)) if m else np.zeros((n, n), dtype=complex)
        AX = svec(A) @ svec(X) if m else np.zeros(0)
        rp = b - AX
        Rd = _herm(C - S - Aty)
        pobj = _inner(C, X)
        dobj = float(b @ y)
        mu = _inner(X, S) / n
        pinf = np.linalg.norm(rp) / (1 + norm_b)
        dinf = np.linalg.norm(Rd) / (1 + norm_c)
        rel_gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        history.append(IterateRecord(it, -dobj, -pobj, float(np.linalg.norm(Rd)),
                                     float(np.max(np.abs(rp))) if m else 0.0, mu))
        if verbose:
            log.info("it %3d  pobj %+.10e  dobj %+.10e  gap %.2e  pinf %.2e  dinf %.2e",
                     it, -dobj, -pobj, rel_gap, pinf, dinf)
        if rel_gap <= tol and pinf <= tol and dinf <= tol:
            status = OPTIMAL
            break
        merit = max(rel_gap, pinf, dinf)
        if merit < best[0]:
            best = (merit, it, X, y)
        elif best[0] < STALL_THRESHOLD and it - best[1] >= stall_iter:
            message = f"stalled at relative residual {best[0]:.2e} (iteration {best[1]})"
            break
        # certificates of infeasibility
        if dobj > 0 and np.linalg.norm(Aty + S) / dobj < infeasibility_tol:
            status = UNBOUNDED
            message = "dual (trace-form) problem infeasible: c^T x unbounded below"
            break
        if pobj < 0 and (np.linalg.norm(AX) / -pobj) < infeasibility_tol:
            status = INFEASIBLE
            message = "LMI infeasible: found Z >= 0 with Tr(F_i Z) = 0, Tr(F0 Z) < 0"
            break
        if it == max_iter:
            message = "iteration limit reached"
            break

        try:
            Lx = np.linalg.cholesky(X)
            Ls = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            message = f"lost positive definiteness at iteration {it}; best residual {best[0]:.2e}"
            break
        U, lam, Vh = np.linalg.svd(Ls.conj().T @ Lx)
        V = Vh.conj().T
        G = Lx @ (V / np.sqrt(lam))
        At = G.conj().T @ A @ G  # (m, n, n)
        Rdt = _herm(G.conj().T @ Rd @ G)
        At_vec = svec(_herm(At)) if m else np.zeros((0, n * n))
        M = At_vec @ At_vec.T
        try:
            factor = sla.cho_factor(M, lower=True, check_finite=False)

            def msolve(r, factor=factor):
                return sla.cho_solve(factor, r, check_finite=False)
        except np.linalg.LinAlgError:
            w, Q = np.linalg.eigh(M)
            floor = max(w[-1], 1.0) * 1e-14
            winv = np.where(w > floor, 1.0 / np.maximum(w, floor), 0.0)

            def msolve(r, Q=Q, winv=winv):
                return Q @ (winv * (Q.T @ r))

        lsum = lam[:, None] + lam[None, :]
        lam_mat = np.diag(lam).astype(complex)

        def direction(rc):
            rhs = rp - At_vec @ svec(rc - Rdt) if m else rp
            if m:
                dy = msolve(rhs)
                dy = dy + msolve(rhs - M @ dy)  # one step of iterative refinement
            else:
                dy = np.zeros(0)
            dSt = Rdt - (np.tensordot(dy, At, axes=(0, 0)) if m else 0)
            dSt = _herm(dSt)
            dXt = _herm(rc - dSt)
            return dy, dXt, dSt

        # predictor
        dy, dXt, dSt = direction(-lam_mat)
        ap = min(1.0, _max_step(lam, dXt))
        ad = min(1.0, _max_step(lam, dSt))
        mu_aff = _inner(lam_mat + ap * dXt, lam_mat + ad * dSt) / n
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        # corrector
        corr = _herm(dXt @ dSt)
        target = sigma * mu * np.eye(n) - np.diag(lam**2) - corr
        rc = 2.0 * target / lsum
        dy, dXt, dSt = direction(rc)
        gamma = 0.9 + 0.09 * min(ap, ad)
        dX = _herm(G @ dXt @ G.conj().T)
        dS = _herm(Rd - (np.tensordot(dy, A, axes=(0, 0)) if m else 0))
        # step limits from the unscaled factors; the scaled ones lose
        # accuracy when G is ill-conditioned near a degenerate optimum
        ap = min(1.0, gamma * _max_step_chol(Lx, dX))
        ad = min(1.0, gamma * _max_step_chol(Ls, dS))
        for _ in range(20):
            X_new, S_new = _herm(X + ap * dX), _herm(S + ad * dS)
            if _is_pd(X_new) and _is_pd(S_new):
                break
            ap, ad = 0.8 * ap, 0.8 * ad
        X, S = X_new, S_new
        y = y + ad * dy

    if status == MAX_ITER and best[1] >= 0:
        X, y = best[2], best[3]
    x = -y
    F = problem.lmi(x)
    lmi_min = float(np.linalg.eigvalsh(_herm(F))[0])
    X = X / scale
    primal = float(b @ x)
    dual = -_inner(problem.F0, X)
    dual_res = float(np.max(np.abs(b - (svec(problem.F) @ svec(X))))) if m else 0.0
    return SdpSolution(
        x=x, Z=X, primal_objective=primal, dual_objective=dual, gap=primal - dual, status=status,
        iterations=it, lmi_min_eig=lmi_min, dual_residual=dual_res, history=history, message=message,
    )


def lambda_max_problem(M: np.ndarray) -> SdpProblem:
    """``minimize t  s.t.  t I - M >= 0``; the optimum is ``lambda_max(M)``."""
    n = M.shape[0]
    return SdpProblem(np.array([1.0]), -np.asarray(M, dtype=complex), np.eye(n)[None].astype(complex))


def random_feasible_problem(n: int, m: int, rng: np.random.Generator) -> SdpProblem:
    """Random instance with strictly feasible primal and dual points.

    ``F_i`` are Gaussian Hermitian; ``c_i = Tr(F_i Z0)`` for a random
    ``Z0 > 0`` and ``F0 = S0 - sum x0_i F_i`` for a random ``S0 > 0``, so
    both problems have interior points and the optimum is attained.
    """
    def herm(k):
        g = rng.standard_normal((k, n, n)) + 1j * rng.standard_normal((k, n, n))
        return _herm(g) / np.sqrt(2 * n)

    F = herm(m)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Z0 = g @ g.conj().T / n + 0.1 * np.eye(n)
    Z0 /= np.trace(Z0).real
    c = np.real(np.einsum("kij,ji->k", F, Z0))
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    S0 = g @ g.conj().T / n + 0.1 * np.eye(n)
    x0 = rng.standard_normal(m)
    F0 = _herm(S0 - np.tensordot(x0, F, axes=(0, 0)))
    return SdpProblem(c, F0, F)
