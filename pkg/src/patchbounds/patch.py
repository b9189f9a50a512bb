"""Local patch subspaces ``V_L = span{|I_a>}`` cut out of an MPS.

For a window ``L = [start, stop)`` the state is written as

    |psi> = sum_{g, h} |left_g> (x) |I_{g h}> (x) |right_h>

with ``left_g`` / ``right_h`` the Schmidt vectors of the two cuts bounding
the window.  Keeping only the ``keep`` largest Schmidt indices on each cut
gives ``q <= keep**2`` inner vectors, resolved with the full bond dimension
inside the window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import hermitize, orthonormal_span, svd
from .models import MAX_DENSE_DIM, embed_two_site
from .mps import MPS

# dense basis is materialised only below this many complex entries
MAX_BASIS_ENTRIES = 2**23


@dataclass(eq=False)
class PatchSubspace:
    """Orthonormalised inner vectors of a window.

    ``coeffs`` maps the column-normalised inner vectors onto an orthonormal
    basis: ``W = I_normalised @ coeffs``.
    """

    window: tuple[int, int]
    d: int
    segment: list[np.ndarray]
    column_norms: np.ndarray
    coeffs: np.ndarray
    left_weights: np.ndarray
    right_weights: np.ndarray
    keep: tuple[int, int]
    singular_values: np.ndarray = field(repr=False, default=None)
    _basis: np.ndarray | None = field(repr=False, default=None)

    @property
    def q(self) -> int:
        return self.coeffs.shape[1]

    @property
    def n_sites(self) -> int:
        return self.window[1] - self.window[0]

    @property
    def interior(self) -> tuple[int, int]:
        """``L_0``: the window minus its outermost site on each side."""
        return (self.window[0] + 1, self.window[1] - 1)

    @property
    def boundary(self) -> tuple[int, int]:
        """``dL``: sites coupled to the outside by a nearest-neighbour term."""
        return (self.window[0], self.window[1] - 1)

    @property
    def dim(self) -> int:
        return self.d**self.n_sites

    def inner_vectors(self) -> np.ndarray:
        """Column-normalised ``|I_a>`` as a ``(d**n, keep_l * keep_r)`` matrix."""
        if self.dim * self.column_norms.size > MAX_BASIS_ENTRIES:
            raise ValueError(f"inner vectors of dimension {self.dim} are too large to materialise")
        return _dense_inner(self.segment) / self.column_norms

    @property
    def basis(self) -> np.ndarray:
        """Dense isometry ``W`` whose columns span ``V_L``."""
        if self._basis is None:
            self._basis = self.inner_vectors() @ self.coeffs
        return self._basis

    @property
    def has_dense_basis(self) -> bool:
        return self.dim * self.column_norms.size <= MAX_BASIS_ENTRIES

    def project(self, op: np.ndarray) -> np.ndarray:
        """``W^H O W`` for a dense operator on the window."""
        w = self.basis
        if op.shape != (w.shape[0], w.shape[0]):
            raise ValueError(f"operator of shape {op.shape} does not act on a window of dimension {w.shape[0]}")
        return hermitize(w.conj().T @ op @ w) if _is_hermitian(op) else w.conj().T @ op @ w

    def project_local(self, op: np.ndarray, sites: tuple[int, int]) -> np.ndarray:
        """``W^H B W`` for a two-site ``B``, contracted without dense vectors."""
        start, stop = self.window
        i = sites[0] - start
        if i < 0 or sites[1] >= stop:
            raise ValueError(f"sites {sites} not inside window {self.window}")
        raw = _segment_matrix(self.segment, op, i)
        raw = raw / np.outer(self.column_norms, self.column_norms)
        out = self.coeffs.conj().T @ raw @ self.coeffs
        return hermitize(out)

    def projector_residual(self) -> float:
        """``max |W^H W - 1|``."""
        if self.has_dense_basis:
            w = self.basis
            g = w.conj().T @ w
        else:
            raw = _segment_matrix(self.segment, None, 0) / np.outer(self.column_norms, self.column_norms)
            g = self.coeffs.conj().T @ raw @ self.coeffs
        return float(np.max(np.abs(g - np.eye(self.q))))

    def projected_density(self) -> np.ndarray:
        """``W^H rho_L W`` of the state the subspace was cut from.

        The segment carries the Schmidt weights of both cuts, so
        ``rho_L = sum_a |I_a><I_a|`` over the unnormalised inner vectors.
        With ``keep`` below the bond dimension this is the density of the
        truncated state and its trace is the retained weight.
        """
        gram = _segment_matrix(self.segment, None, 0) / np.outer(self.column_norms, self.column_norms)
        m = self.coeffs.conj().T @ gram
        return hermitize(m @ np.diag(self.column_norms**2) @ m.conj().T)

    def embed(self, op: np.ndarray, sites: tuple[int, int]) -> np.ndarray:
        return embed_two_site(op, sites, self.window, self.d)

    def header(self) -> dict:
        return {
            "window": list(self.window),
            "d": self.d,
            "q": self.q,
            "keep": list(self.keep),
            "left_weights": [float(x) for x in self.left_weights],
            "right_weights": [float(x) for x in self.right_weights],
        }


def _is_hermitian(op: np.ndarray) -> bool:
    return bool(np.allclose(op, op.conj().T, rtol=0, atol=1e-12 * max(1.0, float(np.max(np.abs(op))))))


def _dense_inner(segment: list[np.ndarray]) -> np.ndarray:
    t = segment[0]
    for s in segment[1:]:
        t = np.tensordot(t, s, axes=(t.ndim - 1, 0))
    kl, kr = t.shape[0], t.shape[-1]
    t = t.reshape(kl, -1, kr)
    return t.transpose(1, 0, 2).reshape(t.shape[1], kl * kr)


def _segment_matrix(segment: list[np.ndarray], op: np.ndarray | None, pos: int) -> np.ndarray:
    """``<I_a| O |I_b>`` for all boundary pairs, via transfer matrices.

    ``O`` acts on segment sites ``pos, pos+1`` (identity when ``op`` is None).
    """
    kl = segment[0].shape[0]
    # env[g, h, c, c']: bra/ket left boundary, then open bra/ket bonds
    env = np.einsum("gc,hd->ghcd", np.eye(kl), np.eye(kl)).astype(complex)
    d = segment[0].shape[1]
    k = 0
    n = len(segment)
    while k < n:
        if op is not None and k == pos:
            theta = np.tensordot(segment[k], segment[k + 1], axes=(2, 0))  # a s t b
            dl, dr = theta.shape[0], theta.shape[-1]
            theta = theta.reshape(dl, d * d, dr)
            ket = np.einsum("st,atb->asb", op, theta)
            x = np.tensordot(env, ket, axes=(3, 0))  # g h c s b
            env = np.tensordot(x, theta.conj(), axes=([2, 3], [0, 1]))  # g h b d -> ket b, bra d
            env = env.transpose(0, 1, 3, 2)
            k += 2
            continue
        t = segment[k]
        x = np.tensordot(env, t, axes=(3, 0))  # g h c s b
        env = np.tensordot(x, t.conj(), axes=([2, 3], [0, 1]))  # g h b(ket) e(bra)
        env = env.transpose(0, 1, 3, 2)
        k += 1
    kr = env.shape[2]
    # env[g, h, e, b]: <I_{g e}| O |I_{h b}>
    return env.transpose(0, 2, 1, 3).reshape(kl * kr, kl * kr)


def extract_patch(mps: MPS, sites: tuple[int, int], radius: int, keep: int | tuple[int, int] | None = None,
                  rank_rtol: float = 1e-10) -> PatchSubspace:
    """Patch subspace of radius ``radius`` around a two-site observable.

    Parameters
    ----------
    mps : MPS
        The (approximate) ground state.
    sites : (i, i+1)
        Support of the observable.
    radius : int
        ``ell``; the window is ``[i - ell, i + 1 + ell]`` (``2 ell + 2`` sites).
    keep : int or (int, int), optional
        Number of Schmidt vectors kept at the left/right cut; defaults to
        the full bond dimension.
    """
    start = sites[0] - radius
    stop = sites[1] + radius + 1
    return extract_window(mps, (start, stop), keep, rank_rtol)


def extract_window(mps: MPS, window: tuple[int, int], keep=None, rank_rtol: float = 1e-10) -> PatchSubspace:
    start, stop = window
    if start < 1 or stop > mps.N - 1 or stop - start < 2:
        raise ValueError(f"window {window} must lie strictly inside the chain of {mps.N} sites")
    d = mps.d

    # left cut: Schmidt basis between start-1 and start
    m = mps.canonicalize(start)
    ts = list(m.tensors)
    t = ts[start]
    dl, _, dr = t.shape
    u, s_left, _ = svd(t.reshape(dl, d * dr))
    ts[start] = np.tensordot(u.conj().T, t, axes=(1, 0))
    s_left = s_left / np.linalg.norm(s_left)

    # move the centre to the last window site, right cut Schmidt basis
    for k in range(start, stop - 1):
        a, dd, b = ts[k].shape
        q, r = np.linalg.qr(ts[k].reshape(a * dd, b))
        ts[k] = q.reshape(a, dd, q.shape[1])
        ts[k + 1] = np.tensordot(r, ts[k + 1], axes=(1, 0))
    t = ts[stop - 1]
    a, dd, b = t.shape
    _, s_right, vh = svd(t.reshape(a * dd, b))
    ts[stop - 1] = np.tensordot(t, vh.conj().T, axes=(2, 0))
    s_right = s_right / np.linalg.norm(s_right)

    if keep is None:
        keep = (s_left.size, s_right.size)
    elif np.isscalar(keep):
        keep = (int(keep), int(keep))
    kl, kr = keep
    if kl > s_left.size or kr > s_right.size:
        raise ValueError(f"keep {keep} exceeds bond dimensions ({s_left.size}, {s_right.size})")
    segment = [x.copy() for x in ts[start:stop]]
    segment[0] = segment[0][:kl]
    segment[-1] = segment[-1][:, :, :kr]

    dim = d ** (stop - start)
    if dim * kl * kr <= MAX_BASIS_ENTRIES:
        inner = _dense_inner(segment)
        norms = np.linalg.norm(inner, axis=0)
        if np.any(norms == 0):
            raise ValueError("an inner vector vanished; reduce keep")
        nv = inner / norms
        u, sv, vh = svd(nv)
        rank = int(np.count_nonzero(sv > rank_rtol * sv[0]))
        coeffs = vh[:rank].conj().T / sv[:rank]
        patch = PatchSubspace((start, stop), d, segment, norms, coeffs, s_left, s_right, (kl, kr), sv)
        patch._basis = u[:, :rank]
    else:
        gram = _segment_matrix(segment, None, 0)
        norms = np.sqrt(np.real(np.diag(gram)))
        if np.any(norms == 0):
            raise ValueError("an inner vector vanished; reduce keep")
        gram = hermitize(gram / np.outer(norms, norms))
        w, v = np.linalg.eigh(gram)
        w, v = w[::-1], v[:, ::-1]
        sv = np.sqrt(np.clip(w, 0, None))
        # Gram eigenvalues are squares of singular values; resolve to ~1e-7 only
        cut = max(rank_rtol**2, 1e-14) * w[0]
        rank = int(np.count_nonzero(w > cut))
        coeffs = v[:, :rank] / np.sqrt(w[:rank])
        patch = PatchSubspace((start, stop), d, segment, norms, coeffs, s_left, s_right, (kl, kr), sv)
    return patch


def reduced_density(state, window: tuple[int, int], N: int | None = None, d: int | None = None) -> np.ndarray:
    """Dense reduced density matrix of ``window`` from an MPS or a full vector."""
    start, stop = window
    if isinstance(state, MPS):
        n = stop - start
        if state.d**n > 4096:
            raise ValueError(f"window of dimension {state.d ** n} is too large for a dense density matrix")
        m = state.canonicalize(start)
        theta = m.tensors[start]
        for t in m.tensors[start + 1 : stop]:
            theta = np.tensordot(theta, t, axes=(theta.ndim - 1, 0))
        dl, dr = theta.shape[0], theta.shape[-1]
        theta = theta.reshape(dl, -1, dr).transpose(1, 0, 2).reshape(state.d**n, dl * dr)
        # left part is left-canonical and the right part right-canonical
        rho = theta @ theta.conj().T
        return rho / np.trace(rho).real
    psi = np.asarray(state).reshape(-1)
    if N is None or d is None:
        raise ValueError("N and d are required for dense states")
    if d**N > MAX_DENSE_DIM:
        raise ValueError("state too large")
    a = d**start
    n = d ** (stop - start)
    psi = psi.reshape(a, n, -1)
    rho = np.einsum("aib,ajb->ij", psi, psi.conj())
    return rho / np.trace(rho).real


def support_leakage(patch: PatchSubspace, rho: np.ndarray) -> float:
    """Trace norm of ``(1 - P_V) rho (1 - P_V)``, i.e. ``1 - Tr(P_V rho)``."""
    w = patch.basis
    return float(np.trace(rho).real - np.trace(w.conj().T @ rho @ w).real)
