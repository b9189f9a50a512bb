"""Two-site DMRG for open nearest-neighbour chains."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .linalg import svd
from .models import SpinChainModel
from .mps import MPS, random_mps

log = logging.getLogger(__name__)


def model_mpo(model: SpinChainModel) -> list[np.ndarray]:
    """MPO tensors ``W[left, right, out, in]`` representing ``sum_i h_i``.

    Each bond term is split by an operator SVD ``h_i = sum_k L_k (x) R_k``;
    the MPO bond between sites ``i`` and ``i+1`` carries the states
    ``0`` (no term placed yet), ``1..r_i`` (term ``i`` half placed) and
    ``r_i + 1`` (a term was completed).
    """
    d, N = model.d, model.N
    splits = []
    for t in model.terms:
        m = t.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
        u, s, vh = svd(m)
        r = max(1, int(np.count_nonzero(s > 1e-14 * s[0]))) if s[0] > 0 else 0
        left = [(u[:, k] * np.sqrt(s[k])).reshape(d, d) for k in range(r)]
        right = [(np.sqrt(s[k]) * vh[k]).reshape(d, d) for k in range(r)]
        splits.append((left, right))
    ranks = [len(lp) for lp, _ in splits]
    eye = np.eye(d, dtype=complex)
    mpo = []
    for i in range(N):
        rl = ranks[i - 1] if i > 0 else 0
        rr = ranks[i] if i < N - 1 else 0
        w = np.zeros((rl + 2, rr + 2, d, d), dtype=complex)
        w[0, 0] = eye
        w[rl + 1, rr + 1] = eye
        if i < N - 1:
            for k, op in enumerate(splits[i][0]):
                w[0, 1 + k] = op
        if i > 0:
            for k, op in enumerate(splits[i - 1][1]):
                w[1 + k, rr + 1] = op
        if i == 0:
            w = w[:1]
        if i == N - 1:
            w = w[:, rr + 1 : rr + 2]
        mpo.append(w)
    return mpo


def mpo_to_dense(mpo: list[np.ndarray]) -> np.ndarray:
    op = np.ones((1, 1, 1), dtype=complex)
    for w in mpo:
        d = w.shape[2]
        op = np.einsum("xyb,bcst->xsytc", op, w)
        n = op.shape[0] * d
        op = op.reshape(n, n, w.shape[1])
    return op[:, :, 0]


def _left_update(env, a, w):
    x = np.tensordot(env, a, axes=(2, 0))
    x = np.tensordot(x, w, axes=([1, 2], [0, 3]))
    x = np.tensordot(a.conj(), x, axes=([0, 1], [0, 3]))
    return x.transpose(0, 2, 1)


def _right_update(env, b, w):
    x = np.tensordot(b, env, axes=(2, 2))
    x = np.tensordot(x, w, axes=([3, 1], [1, 3]))
    x = np.tensordot(b.conj(), x, axes=([1, 2], [3, 1]))
    return x.transpose(0, 2, 1)


def _apply_heff(lenv, w1, w2, renv, theta):
    x = np.tensordot(lenv, theta, axes=(2, 0))
    x = np.tensordot(x, w1, axes=([1, 2], [0, 3]))
    x = np.tensordot(x, w2, axes=([3, 1], [0, 3]))
    return np.tensordot(x, renv, axes=([1, 3], [2, 1]))


@dataclass
class SweepConfig:
    max_sweeps: int = 50
    min_sweeps: int = 2
    energy_tol: float = 1e-10
    lanczos_tol: float = 1e-13
    svd_cutoff: float = 1e-14
    init_bond: int = 8
    seed: int = 1234


@dataclass
class DMRGResult:
    mps: MPS
    energy: float
    sweep_energies: list[float] = field(default_factory=list)
    converged: bool = False
    max_truncation: float = 0.0


def _lowest_eigenpair(matvec, shape, dtype, v0, tol):
    dim = v0.size
    if dim <= 128:
        h = np.column_stack([matvec(e) for e in np.eye(dim, dtype=dtype)])
        h = 0.5 * (h + h.conj().T)
        w, v = np.linalg.eigh(h)
        return w[0], v[:, 0]
    op = spla.LinearOperator((dim, dim), matvec=matvec, dtype=dtype)
    w, v = spla.eigsh(op, k=1, which="SA", v0=v0, tol=tol, ncv=min(dim, 24))
    return w[0], v[:, 0]


def dmrg_ground_state(model: SpinChainModel, bond: int, config: SweepConfig | None = None,
                      initial: MPS | None = None) -> DMRGResult:
    """Variational ground state with bond dimension at most ``bond``.

    Returns the best state found; ``converged`` is False when the energy
    change per sweep never dropped below ``config.energy_tol``.
    """
    if bond < 1:
        raise ValueError("bond dimension must be >= 1")
    cfg = config or SweepConfig()
    mpo = model_mpo(model)
    real = all(np.all(w.imag == 0) for w in mpo)
    dtype = np.float64 if real else np.complex128
    mpo = [w.real.copy() if real else w for w in mpo]
    N, d = model.N, model.d

    if initial is None:
        rng = np.random.default_rng(cfg.seed)
        psi = random_mps(N, d, min(bond, cfg.init_bond), rng, dtype=dtype)
    else:
        psi = initial.canonicalize(0).normalized()
    ts = [t.astype(dtype, copy=True) for t in psi.canonicalize(0).tensors]

    lenv = [None] * (N + 1)
    renv = [None] * (N + 1)
    lenv[0] = np.ones((1, 1, 1), dtype=dtype)
    renv[N - 1] = np.ones((1, 1, 1), dtype=dtype)
    for i in range(N - 1, 0, -1):
        renv[i - 1] = _right_update(renv[i], ts[i], mpo[i])

    energies: list[float] = []
    converged = False
    max_trunc = 0.0
    energy = np.inf
    for sweep in range(cfg.max_sweeps):
        sweep_trunc = 0.0
        for direction in (1, -1):
            sites = range(N - 1) if direction == 1 else range(N - 2, -1, -1)
            for i in sites:
                theta = np.tensordot(ts[i], ts[i + 1], axes=(2, 0))
                shape = theta.shape
                le, re, w1, w2 = lenv[i], renv[i + 1], mpo[i], mpo[i + 1]

                def matvec(x, le=le, re=re, w1=w1, w2=w2, shape=shape):
                    return _apply_heff(le, w1, w2, re, x.reshape(shape)).reshape(-1)

                energy, vec = _lowest_eigenpair(matvec, shape, dtype, theta.reshape(-1), cfg.lanczos_tol)
                dl, _, _, dr = shape
                u, s, vh = svd(vec.reshape(dl * d, d * dr))
                k = min(bond, max(1, int(np.count_nonzero(s > cfg.svd_cutoff * s[0]))))
                sweep_trunc = max(sweep_trunc, float(np.sum(s[k:] ** 2)))
                s = s[:k] / np.linalg.norm(s[:k])
                if direction == 1:
                    ts[i] = u[:, :k].reshape(dl, d, k)
                    ts[i + 1] = (s[:, None] * vh[:k]).reshape(k, d, dr)
                    lenv[i + 1] = _left_update(lenv[i], ts[i], mpo[i])
                else:
                    ts[i] = (u[:, :k] * s).reshape(dl, d, k)
                    ts[i + 1] = vh[:k].reshape(k, d, dr)
                    renv[i] = _right_update(renv[i + 1], ts[i + 1], mpo[i + 1])
        max_trunc = sweep_trunc
        energies.append(float(energy))
        log.debug("sweep %d energy %.14f truncation %.2e", sweep, energy, sweep_trunc)
        if sweep + 1 >= cfg.min_sweeps and len(energies) > 1 and abs(energies[-1] - energies[-2]) < cfg.energy_tol:
            converged = True
            break

    out = MPS(tuple(t.astype(complex) for t in ts), center=0, model_fingerprint=model.fingerprint())
    return DMRGResult(out.normalized(), float(energies[-1]), energies, converged, max_trunc)
