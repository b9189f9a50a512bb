"""Benchmark spin-chain Hamiltonians, two-site observables and an exact
diagonalization oracle.

Every model is stored as an open chain of ``N`` sites with one Hermitian
``d**2 x d**2`` term per bond ``(i, i+1)``.  Single-site field terms are
split half-and-half between the two adjacent bonds (full weight on the
first and last bond) so each model is strictly two-local.

Site indices are 0-based; a window is a half-open pair ``(start, stop)``.
Two-site matrices use the ``np.kron`` ordering, i.e. the left site is the
most significant index.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .linalg import check_hermitian, hermitian_eigen

# guard for dense / full-vector constructions
MAX_DENSE_DIM = 2**20
MAX_FULL_MATRIX_DIM = 4096
DENSE_EIGH_DIM = 1024  # full eigh below this, Lanczos above

MODEL_NAMES = ("aklt", "ising", "xy", "random_xy")
MODEL_ALIASES = {
    "a": "aklt",
    "aklt": "aklt",
    "b": "ising",
    "ising": "ising",
    "transverse_ising": "ising",
    "c": "xy",
    "xy": "xy",
    "transverse_xy": "xy",
    "d": "random_xy",
    "random_xy": "random_xy",
    "random_field_xy": "random_xy",
}

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)


def spin_one_operators():
    """Spin-1 ``(Sx, Sy, Sz)`` in the ``m = +1, 0, -1`` basis."""
    s = 1.0 / np.sqrt(2.0)
    sx = s * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
    sy = s * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return sx, sy, sz


def aklt_bond_term() -> np.ndarray:
    """``S.S/2 + (S.S)^2/6 + 1/3``, the projector onto total spin 2."""
    sx, sy, sz = spin_one_operators()
    ss = sum(np.kron(a, a) for a in (sx, sy, sz))
    return 0.5 * ss + ss @ ss / 6.0 + np.eye(9) / 3.0


def canonical_model_name(name: str) -> str:
    try:
        return MODEL_ALIASES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {MODEL_NAMES}") from None


@dataclass(frozen=True)
class ModelParams:
    h: float = 1.1
    alpha: float = 0.5
    field_seed: int = 0
    field_range: tuple[float, float] = (1.05, 1.15)


@dataclass
class SpinChainModel:
    """Open nearest-neighbour chain ``H = sum_i h_i``.

    ``terms[i]`` acts on sites ``(i, i+1)``.
    """

    name: str
    N: int
    d: int
    terms: list[np.ndarray]
    params: ModelParams = field(default_factory=ModelParams)
    fields: np.ndarray | None = None

    @property
    def frustration_free(self) -> bool:
        return self.name == "aklt"

    def term_on(self, i: int) -> np.ndarray:
        return self.terms[i]

    def sparse_hamiltonian(self, window: tuple[int, int] | None = None) -> sp.csr_matrix:
        """Sum of the terms supported inside ``window`` (whole chain by default)."""
        start, stop = window if window is not None else (0, self.N)
        n = stop - start
        dim = self.d**n
        if dim > MAX_DENSE_DIM:
            raise ValueError(f"window of {n} sites has dimension {dim} > {MAX_DENSE_DIM}")
        h = sp.csr_matrix((dim, dim), dtype=complex)
        for i in range(start, stop - 1):
            left = sp.identity(self.d ** (i - start), format="csr", dtype=complex)
            right = sp.identity(self.d ** (stop - i - 2), format="csr", dtype=complex)
            h = h + sp.kron(sp.kron(left, sp.csr_matrix(self.terms[i])), right, format="csr")
        return h

    def patch_hamiltonian(self, window: tuple[int, int]) -> np.ndarray:
        """Dense ``H_L``: all terms whose two sites lie in ``window``."""
        start, stop = window
        if not (0 <= start < stop <= self.N):
            raise ValueError(f"window {window} outside chain of {self.N} sites")
        n = stop - start
        dim = self.d**n
        if dim > MAX_DENSE_DIM:
            raise ValueError(f"window of {n} sites has dimension {dim} > {MAX_DENSE_DIM}")
        if dim > MAX_FULL_MATRIX_DIM:
            raise ValueError(
                f"dense patch Hamiltonian of dimension {dim} exceeds {MAX_FULL_MATRIX_DIM}; "
                "use sparse_hamiltonian"
            )
        out = np.zeros((dim, dim), dtype=complex)
        d = self.d
        for i in range(start, stop - 1):
            k = i - start
            out += np.kron(np.kron(np.eye(d**k), self.terms[i]), np.eye(d ** (n - k - 2)))
        return out

    def dense_hamiltonian(self) -> np.ndarray:
        return self.patch_hamiltonian((0, self.N))

    def fingerprint(self) -> str:
        """Short content hash identifying the model (terms included)."""
        hsh = hashlib.sha256()
        hsh.update(json.dumps(self.header(), sort_keys=True).encode())
        for t in self.terms:
            hsh.update(np.ascontiguousarray(t, dtype="<c16").tobytes())
        return hsh.hexdigest()[:16]

    def header(self) -> dict:
        return {
            "name": self.name,
            "N": self.N,
            "d": self.d,
            "params": {
                "h": self.params.h,
                "alpha": self.params.alpha,
                "field_seed": self.params.field_seed,
                "field_range": list(self.params.field_range),
            },
            "fields": None if self.fields is None else [float(x) for x in self.fields],
        }

    def to_json(self) -> dict:
        doc = self.header()
        doc["fingerprint"] = self.fingerprint()
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "SpinChainModel":
        p = doc["params"]
        params = ModelParams(
            h=p["h"], alpha=p["alpha"], field_seed=p["field_seed"], field_range=tuple(p["field_range"])
        )
        model = build_model(doc["name"], doc["N"], params)
        if doc.get("fields") is not None and not np.allclose(model.fields, doc["fields"], rtol=0, atol=0):
            raise ValueError("stored random fields do not match the regenerated ones")
        return model


def _field_weights(i: int, N: int) -> tuple[float, float]:
    wl = 1.0 if i == 0 else 0.5
    wr = 1.0 if i == N - 2 else 0.5
    return wl, wr


def random_fields(N: int, params: ModelParams) -> np.ndarray:
    lo, hi = params.field_range
    rng = np.random.default_rng(params.field_seed)
    return rng.uniform(lo, hi, size=N)


def build_model(name: str, N: int, params: ModelParams | None = None, **overrides) -> SpinChainModel:
    """Construct one of the four benchmark chains.

    Parameters
    ----------
    name : {'aklt', 'ising', 'xy', 'random_xy'} or an alias ('A'..'D')
    N : int
        Number of sites, at least 4.
    params : ModelParams, optional
        ``h`` (transverse field, also used in the global prefactor),
        ``alpha`` (XY anisotropy) and ``field_seed`` for the random fields.
    """
    name = canonical_model_name(name)
    params = params or ModelParams()
    if overrides:
        params = ModelParams(**{**params.__dict__, **overrides})
    if N < 4:
        raise ValueError(f"need N >= 4, got {N}")
    if name == "aklt":
        t = aklt_bond_term()
        return SpinChainModel(name, N, 3, [t.copy() for _ in range(N - 1)], params)

    h = params.h
    if not np.isfinite(h) or h <= 0:
        raise ValueError(f"transverse field must be positive, got h={h}")
    pref = -1.0 / (2.0 * np.sqrt(1.0 + h * h))
    if name == "ising":
        coupling = np.kron(SIGMA_X, SIGMA_X)
        site_fields = np.full(N, h)
    else:
        a = params.alpha
        if not (-1.0 <= a <= 1.0):
            raise ValueError(f"alpha must lie in [-1, 1], got {a}")
        coupling = 0.5 * (1 - a) * np.kron(SIGMA_X, SIGMA_X) + 0.5 * (1 + a) * np.kron(SIGMA_Y, SIGMA_Y)
        site_fields = random_fields(N, params) if name == "random_xy" else np.full(N, h)
    terms = []
    for i in range(N - 1):
        wl, wr = _field_weights(i, N)
        t = coupling + wl * site_fields[i] * np.kron(SIGMA_Z, ID2) + wr * site_fields[i + 1] * np.kron(ID2, SIGMA_Z)
        terms.append(pref * t)
    fields = site_fields if name == "random_xy" else None
    return SpinChainModel(name, N, 2, terms, params, fields)


# --------------------------------------------------------------------------
# observables

OBSERVABLE_KINDS = ("pxpx", "pzpz", "random")


@dataclass
class ObservableSpec:
    kind: str
    sites: tuple[int, int]
    d: int
    rank: int
    seed: int | None
    matrix: np.ndarray

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "sites": list(self.sites),
            "d": self.d,
            "rank": self.rank,
            "seed": self.seed,
            "matrix_real": self.matrix.real.tolist(),
            "matrix_imag": self.matrix.imag.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ObservableSpec":
        m = np.asarray(doc["matrix_real"], dtype=float) + 1j * np.asarray(doc["matrix_imag"], dtype=float)
        return cls(doc["kind"], tuple(doc["sites"]), doc["d"], doc["rank"], doc["seed"], m)


def random_projector(dim: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    """Projector onto the span of ``rank`` complex Gaussian vectors."""
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    q, _ = np.linalg.qr(g)
    p = q @ q.conj().T
    return 0.5 * (p + p.conj().T)


def build_observable(kind: str, sites: tuple[int, int], d: int, rank: int = 1, seed: int | None = None,
                     N: int | None = None) -> ObservableSpec:
    """Two-site projector observable.

    ``pxpx`` is ``|++><++|``, ``pzpz`` is ``|00><00|`` (both qubit only);
    ``random`` is a rank-``rank`` projector drawn from ``seed``.
    """
    kind = kind.lower()
    i, j = sites
    if j != i + 1 or i < 0 or (N is not None and j > N - 1):
        raise ValueError(f"observable sites must be adjacent and inside the chain, got {sites}")
    if kind == "pxpx":
        if d != 2:
            raise ValueError("pxpx needs d=2")
        plus = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
        v = np.kron(plus, plus)
        return ObservableSpec(kind, (i, j), d, 1, None, np.outer(v, v.conj()))
    if kind == "pzpz":
        if d != 2:
            raise ValueError("pzpz needs d=2")
        m = np.zeros((4, 4), dtype=complex)
        m[0, 0] = 1.0
        return ObservableSpec(kind, (i, j), d, 1, None, m)
    if kind == "random":
        if not 1 <= rank <= d * d:
            raise ValueError(f"rank must lie in [1, {d * d}], got {rank}")
        if seed is None:
            raise ValueError("random observables need an explicit seed")
        m = random_projector(d * d, rank, np.random.default_rng(seed))
        return ObservableSpec(kind, (i, j), d, rank, seed, m)
    raise ValueError(f"unknown observable kind {kind!r}; choose from {OBSERVABLE_KINDS}")


def embed_two_site(op: np.ndarray, sites: tuple[int, int], window: tuple[int, int], d: int) -> np.ndarray:
    """Embed a two-site operator into the dense space of ``window``."""
    start, stop = window
    i = sites[0] - start
    n = stop - start
    if i < 0 or sites[1] >= stop:
        raise ValueError(f"sites {sites} not inside window {window}")
    return np.kron(np.kron(np.eye(d**i), op), np.eye(d ** (n - i - 2)))


# --------------------------------------------------------------------------
# exact diagonalization oracle

@dataclass
class ExactSpectrum:
    energies: np.ndarray
    states: np.ndarray  # columns

    @property
    def gap(self) -> float:
        return float(self.energies[1] - self.energies[0])


def exact_low_spectrum(model: SpinChainModel, k: int = 2, seed: int = 0) -> ExactSpectrum:
    """Lowest ``k`` eigenpairs of the full chain.

    Dense ``eigh`` up to dimension ``DENSE_EIGH_DIM``, Lanczos above.
    The Lanczos start vector is drawn from ``seed`` so degenerate ground
    spaces resolve to a reproducible state.
    """
    dim = model.d**model.N
    if dim > MAX_DENSE_DIM:
        raise ValueError(f"chain dimension {dim} exceeds {MAX_DENSE_DIM}")
    if dim <= DENSE_EIGH_DIM or k >= dim - 1:
        w, v = hermitian_eigen(model.dense_hamiltonian())
        return ExactSpectrum(w[:k], v[:, :k])
    h = model.sparse_hamiltonian()
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(dim) + 0j
    w, v = spla.eigsh(h, k=k, which="SA", v0=v0, tol=1e-13, ncv=max(2 * k + 1, 20))
    order = np.argsort(w)
    return ExactSpectrum(w[order], v[:, order])


def exact_ground(model: SpinChainModel, seed: int = 0) -> tuple[float, np.ndarray]:
    spec = exact_low_spectrum(model, k=1, seed=seed)
    return float(spec.energies[0]), spec.states[:, 0]


def check_term_hermiticity(model: SpinChainModel) -> None:
    for i, t in enumerate(model.terms):
        check_hermitian(t, name=f"h_{i}")
