"""Dense complex matrix kernels shared by the rest of the package.

All matrices are plain ``numpy`` arrays stored in row-major (C) order.
Tolerances are relative to a cheap spectral-norm estimate (the largest
absolute entry times the dimension bound is too loose, so we use the
Frobenius norm, which upper-bounds the spectral norm).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

HERMITIAN_RTOL = 1e-12


class NotHermitianError(ValueError):
    """Raised when a matrix expected to be Hermitian is not."""


def norm_estimate(m: np.ndarray) -> float:
    """Frobenius norm, used as an upper bound on the spectral norm."""
    return float(np.linalg.norm(m))


def hermitian_defect(m: np.ndarray) -> float:
    """Return ``max|M - M^H| / max|M|`` (0 for the zero matrix)."""
    scale = np.max(np.abs(m)) if m.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(m - m.conj().T)) / scale)


def check_hermitian(m: np.ndarray, rtol: float = HERMITIAN_RTOL, name: str = "matrix") -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotHermitianError(f"{name} must be square, got shape {m.shape}")
    defect = hermitian_defect(m)
    if defect > rtol:
        raise NotHermitianError(
            f"{name} is not Hermitian: max|M - M^H| / max|M| = {defect:.3e} > {rtol:.1e}"
        )


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def hermitian_eigen(m: np.ndarray, rtol: float = HERMITIAN_RTOL):
    """Eigen-decomposition of a Hermitian matrix.

    Parameters
    ----------
    m : ndarray, shape (n, n)
        Hermitian matrix (checked to relative tolerance ``rtol``).

    Returns
    -------
    evals : ndarray, shape (n,)
        Real eigenvalues in ascending order.
    evecs : ndarray, shape (n, n)
        Orthonormal eigenvectors as columns.
    """
    m = np.asarray(m)
    check_hermitian(m, rtol)
    return sla.eigh(hermitize(m))


def eigvalsh(m: np.ndarray, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    m = np.asarray(m)
    check_hermitian(m, rtol)
    return sla.eigvalsh(hermitize(m))


def extreme_eigenvalues(m: np.ndarray) -> tuple[float, float]:
    """Smallest and largest eigenvalue of a Hermitian matrix."""
    w = eigvalsh(m)
    return float(w[0]), float(w[-1])


def svd(m: np.ndarray):
    """Thin SVD ``M = U diag(s) Vh`` with descending singular values.

    Falls back to the slower but more robust ``gesvd`` driver when the
    default divide-and-conquer routine fails to converge.
    """
    m = np.asarray(m)
    try:
        return sla.svd(m, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        return sla.svd(m, full_matrices=False, lapack_driver="gesvd")


def orthonormal_span(vectors: np.ndarray, rtol: float = 1e-10):
    """Orthonormal basis for the column span of ``vectors``.

    Columns are first scaled to unit norm (zero columns dropped), then an
    SVD is taken and singular values below ``rtol`` times the largest are
    discarded.

    Returns
    -------
    basis : ndarray, shape (dim, rank)
    s : ndarray
        All singular values of the column-normalised matrix.
    """
    norms = np.linalg.norm(vectors, axis=0)
    keep = norms > 0
    v = vectors[:, keep] / norms[keep]
    u, s, _ = svd(v)
    if s.size == 0:
        return np.zeros((vectors.shape[0], 0), dtype=vectors.dtype), s
    rank = int(np.count_nonzero(s > rtol * s[0]))
    return u[:, :rank], s


def psd_violation(m: np.ndarray) -> float:
    """``max(0, -lambda_min(M))`` for Hermitian ``M``."""
    return max(0.0, -float(eigvalsh(m, rtol=1e-8)[0]))


def partial_trace(rho: np.ndarray, dims: list[int], keep: list[int]) -> np.ndarray:
    """Partial trace of an operator on a tensor product of ``dims``.

    ``keep`` lists the factors (by position) that survive, in order.
    """
    n = len(dims)
    t = rho.reshape(list(dims) * 2)
    traced = [k for k in range(n) if k not in keep]
    # contract matching row/column axes of traced factors
    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = list(letters[:n])
    cols = list(letters[n : 2 * n])
    for k in traced:
        cols[k] = rows[k]
    out = "".join(rows[k] for k in keep) + "".join(cols[k] for k in keep)
    res = np.einsum("".join(rows) + "".join(cols) + "->" + out, t)
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    return res.reshape(dk, dk)


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (g + g.conj().T)


def random_density_matrix(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random full- or fixed-rank density matrix (normalised Wishart)."""
    k = n if rank is None else rank
    g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
