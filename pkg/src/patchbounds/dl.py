"""Detectability-lemma operator for frustration-free chains.

``DL = Pi_1 Pi_2`` where ``Pi_1`` (``Pi_2``) is the product of the local
ground-space projectors on the even (odd) bonds.  Everything here acts on
dense state vectors of small chains, applying one two-site projector at a
time, so no ``d**N x d**N`` matrix is ever formed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .bounds import fit_decay_rate
from .linalg import hermitian_eigen
from .models import MAX_DENSE_DIM, SpinChainModel, exact_low_spectrum
from .patch import PatchSubspace

KERNEL_CUTOFF = 1e-10


@dataclass
class LayeredProjectors:
    """Two-site kernel projectors grouped into layers of disjoint bonds."""

    N: int
    d: int
    layers: list[list[tuple[int, np.ndarray]]]  # (left site, d^2 x d^2 projector)

    @property
    def g(self) -> int:
        return len(self.layers)

    def apply_layer(self, k: int, psi: np.ndarray) -> np.ndarray:
        out = psi
        for i, p in self.layers[k]:
            out = _apply_two_site(out, p, i, self.d)
        return out

    def apply_dl(self, psi: np.ndarray, power: int = 1, adjoint: bool = False) -> np.ndarray:
        """``DL**power |psi>`` (or with ``DL^H``); the last layer acts first."""
        order = range(self.g) if adjoint else range(self.g - 1, -1, -1)
        out = psi
        for _ in range(power):
            for k in order:
                out = self.apply_layer(k, out)
        return out


def _apply_two_site(psi: np.ndarray, op: np.ndarray, first: int, d: int) -> np.ndarray:
    x = psi.reshape(d**first, d * d, -1)
    return np.einsum("ij,ajb->aib", op, x).reshape(psi.shape)


def kernel_projector(h: np.ndarray, cutoff: float = KERNEL_CUTOFF) -> np.ndarray:
    """Projector onto the eigenvectors of ``h`` with eigenvalue below ``cutoff``."""
    w, v = hermitian_eigen(h)
    k = v[:, w < cutoff]
    if k.shape[1] == 0:
        raise ValueError("local term has no zero-energy subspace; the model is not frustration free")
    return k @ k.conj().T


def build_layers(model: SpinChainModel, cutoff: float = KERNEL_CUTOFF) -> LayeredProjectors:
    """Even-bond and odd-bond layers of kernel projectors."""
    if model.d**model.N > MAX_DENSE_DIM:
        raise ValueError(f"chain of dimension {model.d ** model.N} exceeds the dense limit")
    for i, h in enumerate(model.terms):
        if np.min(np.linalg.eigvalsh(h)) < -cutoff:
            raise ValueError(f"term {i} is not positive semidefinite; kernel projectors do not describe its ground space")
    projectors = [kernel_projector(h, cutoff) for h in model.terms]
    layers = [[(i, p) for i, p in enumerate(projectors) if i % 2 == parity] for parity in (0, 1)]
    return LayeredProjectors(model.N, model.d, layers)


def ground_space(model: SpinChainModel, max_degeneracy: int = 8, tol: float = 1e-8, seed: int = 0) -> np.ndarray:
    """Orthonormal columns spanning the (possibly degenerate) ground space."""
    spec = exact_low_spectrum(model, k=max_degeneracy + 1, seed=seed)
    e = spec.energies
    mask = e < e[0] + tol
    if np.all(mask):
        raise ValueError(f"ground space degeneracy exceeds {max_degeneracy}")
    q, _ = np.linalg.qr(spec.states[:, mask])
    return q


def fixed_point_residual(layers: LayeredProjectors, psi: np.ndarray) -> float:
    """``||DL |psi> - |psi>||``; zero for a frustration-free ground state."""
    psi = psi / np.linalg.norm(psi)
    return float(np.linalg.norm(layers.apply_dl(psi) - psi))


@dataclass
class ContractionProfile:
    """``||DL**l - P_0||`` for ``l = 0 .. l_max``."""

    powers: list[int]
    norms: list[float]
    ratio: float  # fitted geometric factor per power of DL
    degeneracy: int

    @property
    def c(self) -> float:
        """Fitted ``||DL |psi_perp>||**2`` bound: the squared per-power factor."""
        return self.ratio**2

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["l", "norm"])
        for p, n in zip(self.powers, self.norms):
            w.writerow([p, repr(n)])
        return buf.getvalue()


def complement_norm(layers: LayeredProjectors, ground: np.ndarray, power: int, seed: int = 0) -> float:
    """Operator norm of ``DL**power - P_0`` with ``P_0`` the full ground projector."""
    dim = layers.d**layers.N

    def p0(x):
        return ground @ (ground.conj().T @ x)

    def mv(x):
        x = np.asarray(x, dtype=complex).reshape(-1)
        return layers.apply_dl(x, power) - p0(x)

    def rmv(x):
        x = np.asarray(x, dtype=complex).reshape(-1)
        return layers.apply_dl(x, power, adjoint=True) - p0(x)

    op = spla.LinearOperator((dim, dim), matvec=mv, rmatvec=rmv, dtype=complex)
    v0 = np.random.default_rng(seed).standard_normal(dim)
    s = spla.svds(op, k=1, v0=v0, tol=1e-10, return_singular_vectors=False)
    return float(s[0])


def dl_contraction_rate(layers: LayeredProjectors, ground: np.ndarray, l_max: int, seed: int = 0) -> ContractionProfile:
    """Complement norms of ``DL**l`` and their fitted geometric decay."""
    powers = list(range(l_max + 1))
    norms = [1.0 if p == 0 else complement_norm(layers, ground, p, seed) for p in powers]
    rate = fit_decay_rate(powers[1:], norms[1:]) if l_max >= 3 else float("nan")
    return ContractionProfile(powers, norms, float(np.exp(-rate)), ground.shape[1])


def lightcone_depth(sites: tuple[int, int], window: tuple[int, int], N: int, g: int = 2) -> int:
    """Largest ``l'`` for which every projector of ``DL**l'`` touching the
    support of ``B`` stays inside the window.

    Projectors are pushed towards ``|Omega>`` unless they overlap the
    support grown so far; the ones left behind form the causal cone and
    can only be absorbed into ``P_V`` if all of them lie in the window.
    """
    start, stop = window
    depth = 0
    while True:
        support = set(range(sites[0], sites[1] + 1))
        inside = True
        for _ in range(depth + 1):
            for k in range(g - 1, -1, -1):
                stuck = [i for i in range(N - 1) if i % g == k and ({i, i + 1} & support)]
                for i in stuck:
                    support |= {i, i + 1}
                    inside &= start <= i and i + 1 < stop
        if not inside:
            return depth
        depth += 1
        if depth > N:
            return depth


@dataclass
class LightconeCheck:
    depth: int
    max_depth: int
    residual: float

    @property
    def inside_cone(self) -> bool:
        return self.depth <= self.max_depth


def _window_projector(psi: np.ndarray, w: np.ndarray, window: tuple[int, int], d: int) -> np.ndarray:
    x = psi.reshape(d ** window[0], w.shape[0], -1)
    c = np.einsum("iq,aib->aqb", w.conj(), x)
    return np.einsum("iq,aqb->aib", w, c).reshape(-1)


def lightcone_identity_check(layers: LayeredProjectors, patch: PatchSubspace, psi: np.ndarray,
                             op: np.ndarray, sites: tuple[int, int], depth: int) -> LightconeCheck:
    """``||P_V B |Omega> - P_V DL**depth B |Omega>||``."""
    d = layers.d
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    b_psi = _apply_two_site(psi, op, sites[0], d)
    lhs = _window_projector(b_psi, patch.basis, patch.window, d)
    rhs = _window_projector(layers.apply_dl(b_psi, depth), patch.basis, patch.window, d)
    max_depth = lightcone_depth(sites, patch.window, layers.N, layers.g)
    return LightconeCheck(depth, max_depth, float(np.linalg.norm(lhs - rhs)))


@dataclass
class AgspDecomposition:
    """Split of the residual ``delta`` along the light-cone argument."""

    delta: float
    depth: int
    dl_term: float  # ||(DL**depth - P_0) B |Omega>||
    degeneracy_term: float  # ||(P_0 - |Omega><Omega|) B |Omega>||
    complement_norm: float  # ||DL**depth - P_0||

    @property
    def bound(self) -> float:
        return self.complement_norm + self.degeneracy_term


def agsp_decomposition(layers: LayeredProjectors, patch: PatchSubspace, ground: np.ndarray, psi: np.ndarray,
                       op: np.ndarray, sites: tuple[int, int], delta: float, seed: int = 0) -> AgspDecomposition:
    """Bound ``||delta||`` by the DL complement norm at the light-cone depth.

    With an exactly unique ground state the second term vanishes; for the
    open AKLT chain ``P_0`` also contains the edge states and
    ``B |Omega>`` leaks into them, which the bound has to account for.
    """
    d = layers.d
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    depth = lightcone_depth(sites, patch.window, layers.N, layers.g)
    b_psi = _apply_two_site(psi, op, sites[0], d)
    p0b = ground @ (ground.conj().T @ b_psi)
    dl_term = float(np.linalg.norm(layers.apply_dl(b_psi, depth) - p0b))
    degeneracy = float(np.linalg.norm(p0b - psi * np.vdot(psi, b_psi)))
    cnorm = complement_norm(layers, ground, depth, seed) if depth > 0 else 1.0
    return AgspDecomposition(delta, depth, dl_term, degeneracy, cnorm)
