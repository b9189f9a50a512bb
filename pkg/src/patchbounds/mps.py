"""Finite matrix product states.

Site tensors have shape ``(left bond, physical, right bond)``; the boundary
bonds have dimension 1.  ``MPS`` objects are treated as immutable: every
gauge transformation returns a new instance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .linalg import svd
from .models import MAX_DENSE_DIM, SpinChainModel, spin_one_operators

ISOMETRY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class MPS:
    tensors: tuple[np.ndarray, ...]
    center: int | None = None
    model_fingerprint: str = ""

    def __post_init__(self):
        ts = self.tensors
        if ts[0].shape[0] != 1 or ts[-1].shape[2] != 1:
            raise ValueError("boundary bonds must have dimension 1")
        for a, b in zip(ts[:-1], ts[1:]):
            if a.shape[2] != b.shape[0]:
                raise ValueError(f"bond mismatch {a.shape} -> {b.shape}")

    @property
    def N(self) -> int:
        return len(self.tensors)

    @property
    def d(self) -> int:
        return self.tensors[0].shape[1]

    @property
    def bond_dims(self) -> list[int]:
        """Dimensions of the ``N - 1`` internal bonds."""
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def with_tensors(self, tensors, center) -> "MPS":
        return replace(self, tensors=tuple(tensors), center=center)

    # ------------------------------------------------------------------
    # gauge

    def canonicalize(self, center: int) -> "MPS":
        """Mixed-canonical form with orthogonality centre at ``center``.

        Sites left of the centre become left isometries, sites to the right
        right isometries.  The norm is carried by the centre tensor.
        """
        ts = [t for t in self.tensors]
        lo, hi = 0, self.N - 1
        if self.center is not None:
            # tensors outside the current centre are already isometries
            lo = min(self.center, center)
            hi = max(self.center, center)
        for i in range(lo, center):
            dl, d, dr = ts[i].shape
            q, r = np.linalg.qr(ts[i].reshape(dl * d, dr))
            ts[i] = q.reshape(dl, d, q.shape[1])
            ts[i + 1] = np.tensordot(r, ts[i + 1], axes=(1, 0))
        for i in range(hi, center, -1):
            dl, d, dr = ts[i].shape
            q, r = np.linalg.qr(ts[i].reshape(dl, d * dr).T)
            ts[i] = q.T.reshape(q.shape[1], d, dr)
            ts[i - 1] = np.tensordot(ts[i - 1], r.T, axes=(2, 0))
        return self.with_tensors(ts, center)

    def normalized(self) -> "MPS":
        c = self.center if self.center is not None else 0
        m = self.canonicalize(c)
        ts = list(m.tensors)
        ts[c] = ts[c] / np.linalg.norm(ts[c])
        return m.with_tensors(ts, c)

    def isometry_residual(self) -> float:
        """Largest deviation from the left/right isometry conditions."""
        if self.center is None:
            raise ValueError("state is not in canonical form")
        worst = 0.0
        for i, t in enumerate(self.tensors):
            dl, d, dr = t.shape
            if i < self.center:
                m = t.reshape(dl * d, dr)
                worst = max(worst, float(np.max(np.abs(m.conj().T @ m - np.eye(dr)))))
            elif i > self.center:
                m = t.reshape(dl, d * dr)
                worst = max(worst, float(np.max(np.abs(m @ m.conj().T - np.eye(dl)))))
        return worst

    def truncated(self, max_bond: int) -> "MPS":
        """SVD-truncate every bond to ``max_bond`` (left-to-right sweep)."""
        m = self.canonicalize(self.N - 1)
        ts = list(m.tensors)
        for i in range(self.N - 1, 0, -1):
            dl, d, dr = ts[i].shape
            u, s, vh = svd(ts[i].reshape(dl, d * dr))
            k = min(max_bond, s.size)
            ts[i] = vh[:k].reshape(k, d, dr)
            ts[i - 1] = np.tensordot(ts[i - 1], u[:, :k] * s[:k], axes=(2, 0))
        out = m.with_tensors(ts, 0)
        return out.normalized()

    # ------------------------------------------------------------------
    # contractions

    def norm_squared(self) -> float:
        env = np.ones((1, 1), dtype=complex)
        for t in self.tensors:
            env = _transfer(env, t)
        return float(env[0, 0].real)

    def to_dense(self) -> np.ndarray:
        """Full state vector (site 0 most significant)."""
        if self.d**self.N > MAX_DENSE_DIM:
            raise ValueError(f"state dimension {self.d ** self.N} exceeds {MAX_DENSE_DIM}")
        v = self.tensors[0].reshape(self.d, -1)
        for t in self.tensors[1:]:
            v = np.tensordot(v, t, axes=(1, 0)).reshape(-1, t.shape[2])
        return v.reshape(-1)

    def expectation_local(self, op: np.ndarray, first_site: int) -> complex:
        """``<psi|O|psi> / <psi|psi>`` for ``O`` on consecutive sites starting at ``first_site``."""
        d = self.d
        k = int(round(np.log(op.shape[0]) / np.log(d)))
        if d**k != op.shape[0] or first_site < 0 or first_site + k > self.N:
            raise ValueError(f"operator of shape {op.shape} does not fit at site {first_site}")
        env = np.ones((1, 1), dtype=complex)
        for t in self.tensors[:first_site]:
            env = _transfer(env, t)
        theta = self.tensors[first_site]
        for t in self.tensors[first_site + 1 : first_site + k]:
            theta = np.tensordot(theta, t, axes=(theta.ndim - 1, 0))
        dl, dr = theta.shape[0], theta.shape[-1]
        theta = theta.reshape(dl, d**k, dr)
        otheta = np.einsum("st,atb->asb", op, theta)
        env = np.einsum("ab,asc,bsd->cd", env, theta.conj(), otheta)
        for t in self.tensors[first_site + k :]:
            env = _transfer(env, t)
        return complex(env[0, 0]) / self.norm_squared()

    def correlator_row(self, op_a: np.ndarray, op_b: np.ndarray, i: int, js) -> np.ndarray:
        """``<A_i B_j>`` for every ``j`` in ``js`` (all ``j > i``), normalised."""
        js = list(js)
        right = _right_environments(self.tensors)
        env = np.ones((1, 1), dtype=complex)
        for t in self.tensors[:i]:
            env = _transfer(env, t)
        env = _transfer(env, self.tensors[i], op_a)
        out = []
        j_cur = i + 1
        norm = self.norm_squared()
        for j in sorted(js):
            while j_cur < j:
                env = _transfer(env, self.tensors[j_cur])
                j_cur += 1
            closed = _transfer(env, self.tensors[j], op_b)
            out.append(complex(np.einsum("ab,ab->", closed, right[j + 1])) / norm)
        order = np.argsort(np.argsort(js))
        return np.asarray(out)[order]


def _transfer(env: np.ndarray, t: np.ndarray, op: np.ndarray | None = None) -> np.ndarray:
    """Left environment update ``env'_{cd} = sum conj(t)_{a s c} env_{ab} (op t)_{b s d}``."""
    ket = t if op is None else np.einsum("st,atb->asb", op, t)
    x = np.tensordot(env, ket, axes=(1, 0))  # a, s, d
    return np.tensordot(t.conj(), x, axes=([0, 1], [0, 1]))


def _right_environments(tensors) -> list[np.ndarray]:
    n = len(tensors)
    right = [None] * (n + 1)
    right[n] = np.ones((1, 1), dtype=complex)
    for k in range(n - 1, -1, -1):
        t = tensors[k]
        # right[k]_{ab}: a bra index, b ket index
        right[k] = np.einsum("asc,bsd,cd->ab", t.conj(), t, right[k + 1])
    return right


def mps_from_dense(psi: np.ndarray, N: int, d: int, max_bond: int | None = None, cutoff: float = 0.0) -> MPS:
    """Exact (or truncated) MPS of a dense state by successive SVDs."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.size != d**N:
        raise ValueError(f"vector of length {psi.size} is not a state of {N} sites with d={d}")
    tensors = []
    rest = psi.reshape(1, -1)
    for _ in range(N - 1):
        dl = rest.shape[0]
        m = rest.reshape(dl * d, -1)
        u, s, vh = svd(m)
        k = int(np.count_nonzero(s > cutoff * s[0])) if cutoff > 0 else s.size
        if max_bond is not None:
            k = min(k, max_bond)
        k = max(k, 1)
        tensors.append(u[:, :k].reshape(dl, d, k))
        rest = s[:k, None] * vh[:k]
    tensors.append(rest.reshape(rest.shape[0], d, 1))
    return MPS(tuple(tensors), center=N - 1).normalized()


def product_mps(local_states) -> MPS:
    ts = [np.asarray(v, dtype=complex).reshape(1, -1, 1) for v in local_states]
    return MPS(tuple(ts), center=0).normalized()


def aklt_mps(N: int, left_edge: int = 0, right_edge: int = 0) -> MPS:
    """Exact AKLT valence-bond state with fixed edge spin-1/2 states.

    The open chain has a four-fold degenerate zero-energy ground space,
    labelled by the two dangling edge spins; ``left_edge`` and
    ``right_edge`` (0 or 1) pick one member of it.
    """
    sp = np.array([[0, 1], [0, 0]], dtype=complex)
    sz = np.diag([1.0, -1.0]).astype(complex)
    a = np.stack([np.sqrt(2 / 3) * sp, -np.sqrt(1 / 3) * sz, -np.sqrt(2 / 3) * sp.T], axis=1)  # (2, 3, 2)
    lvec = np.eye(2)[left_edge].reshape(1, 2)
    rvec = np.eye(2)[right_edge].reshape(2, 1)
    ts = [a.copy() for _ in range(N)]
    ts[0] = np.tensordot(lvec, a, axes=(1, 0))
    ts[-1] = np.tensordot(a, rvec, axes=(2, 0))
    return MPS(tuple(ts)).canonicalize(0).normalized()


def random_mps(N: int, d: int, bond: int, rng: np.random.Generator, dtype=complex) -> MPS:
    dims = [1] + [min(bond, d ** min(k, N - k)) for k in range(1, N)] + [1]
    ts = []
    for k in range(N):
        shape = (dims[k], d, dims[k + 1])
        t = rng.standard_normal(shape)
        if np.issubdtype(dtype, np.complexfloating):
            t = t + 1j * rng.standard_normal(shape)
        ts.append(t.astype(dtype))
    return MPS(tuple(ts)).canonicalize(0).normalized()


# ----------------------------------------------------------------------
# observables on MPS

def expectation(mps: MPS, observable) -> float:
    """Real part of ``<B>`` for a Hermitian two-site observable.

    Raises if the imaginary leakage exceeds ``1e-10``.
    """
    matrix = observable.matrix
    i, j = observable.sites
    if j >= mps.N or observable.d != mps.d:
        raise ValueError(f"observable on sites {observable.sites} does not fit a chain of {mps.N}")
    val = mps.expectation_local(matrix, i)
    if abs(val.imag) > 1e-10:
        raise ValueError(f"expectation has imaginary part {val.imag:.2e}")
    return float(val.real)


@dataclass(frozen=True)
class SchmidtSpectrum:
    bond: int
    weights: np.ndarray  # descending, sum of squares 1


def schmidt_spectrum(mps: MPS, bond: int) -> SchmidtSpectrum:
    """Schmidt coefficients across the bond between ``bond`` and ``bond + 1``."""
    if not 0 <= bond < mps.N - 1:
        raise ValueError(f"bond {bond} outside [0, {mps.N - 2}]")
    m = mps.canonicalize(bond)
    t = m.tensors[bond]
    dl, d, dr = t.shape
    s = np.linalg.svd(t.reshape(dl * d, dr), compute_uv=False)
    s = s / np.linalg.norm(s)
    return SchmidtSpectrum(bond, s)


@dataclass(frozen=True)
class CorrelationFit:
    xi: float
    distances: np.ndarray
    correlator: np.ndarray
    fit_mask: np.ndarray
    reliable: bool


def default_probe(model: SpinChainModel) -> np.ndarray:
    if model.d == 3:
        return spin_one_operators()[2]
    return np.array([[0, 1], [1, 0]], dtype=complex)


def correlation_length(mps: MPS, probe: np.ndarray, start: int | None = None, max_distance: int | None = None,
                       window=(1e-10, 1e-2)) -> CorrelationFit:
    """Fit ``|<O_i O_{i+r}> - <O_i><O_{i+r}>| ~ exp(-r / xi)``.

    The probe starts at ``start`` (default: a quarter into the chain) and
    only points whose connected correlator lies inside ``window`` enter the
    least-squares fit of the logarithm.
    """
    n = mps.N
    i = n // 4 if start is None else start
    rmax = (n - 1 - i - n // 4) if max_distance is None else max_distance
    rmax = max(1, min(rmax, n - 1 - i))
    js = np.arange(i + 1, i + rmax + 1)
    two = mps.correlator_row(probe, probe, i, js).real
    one = np.array([mps.expectation_local(probe, k).real for k in range(i, i + rmax + 1)])
    conn = np.abs(two - one[0] * one[1:])
    r = js - i
    lo, hi = window
    mask = (conn >= lo) & (conn <= hi)
    if np.count_nonzero(mask) < 3:
        return CorrelationFit(float("nan"), r, conn, mask, False)
    slope, _ = np.polyfit(r[mask], np.log(conn[mask]), 1)
    xi = -1.0 / slope if slope < 0 else float("inf")
    return CorrelationFit(float(xi), r, conn, mask, slope < 0)


# ----------------------------------------------------------------------
# random operators

def random_mpo_dense(n_sites: int, d: int, bond: int, rng: np.random.Generator) -> np.ndarray:
    """Dense matrix of an open MPO with complex standard-normal cores.

    Cores have shape ``(left, out, in, right)``; internal bonds are capped
    at ``bond``.
    """
    if d ** n_sites > 4096:
        raise ValueError(f"operator on {n_sites} sites of dimension {d ** n_sites} is too large")
    dims = [1] + [bond] * (n_sites - 1) + [1]
    op = np.ones((1, 1, 1), dtype=complex)  # (out, in, bond)
    for k in range(n_sites):
        shape = (dims[k], d, d, dims[k + 1])
        core = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
        op = np.einsum("xyb,bstc->xsytc", op, core)
        n_out = op.shape[0] * d
        op = op.reshape(n_out, n_out, dims[k + 1])
    return op[:, :, 0]


def random_antihermitian_operator(n_sites: int, d: int, bond: int, rng: np.random.Generator) -> np.ndarray:
    """Anti-Hermitian part ``(M - M^H) / 2`` of a random MPO, unit Frobenius norm."""
    m = random_mpo_dense(n_sites, d, bond, rng)
    a = 0.5 * (m - m.conj().T)
    return a / np.linalg.norm(a)
