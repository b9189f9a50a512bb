import numpy as np
import pytest
from numpy.testing import assert_allclose

import oracles
from patchbounds.models import (
    ModelParams,
    ObservableSpec,
    SpinChainModel,
    build_model,
    build_observable,
    exact_ground,
    exact_low_spectrum,
    spin_one_operators,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)


def site_op(op, i, N, d=2):
    return np.kron(np.kron(np.eye(d**i), op), np.eye(d ** (N - i - 1)))


def direct_hamiltonian(name, N, h=1.1, alpha=0.5, fields=None):
    """Chain Hamiltonian from site operators, fields kept as single-site terms."""
    if name == "aklt":
        s = spin_one_operators()
        out = np.zeros((3**N, 3**N), dtype=complex)
        for i in range(N - 1):
            ss = sum(site_op(a, i, N, 3) @ site_op(a, i + 1, N, 3) for a in s)
            out += 0.5 * ss + ss @ ss / 6.0 + np.eye(3**N) / 3.0
        return out
    pref = -1.0 / (2.0 * np.sqrt(1.0 + h * h))
    jx, jy = (1.0, 0.0) if name == "ising" else (0.5 * (1 - alpha), 0.5 * (1 + alpha))
    g = np.full(N, h) if fields is None else fields
    out = np.zeros((2**N, 2**N), dtype=complex)
    for i in range(N - 1):
        out += jx * site_op(X, i, N) @ site_op(X, i + 1, N) + jy * site_op(Y, i, N) @ site_op(Y, i + 1, N)
    for i in range(N):
        out += g[i] * site_op(Z, i, N)
    return pref * out


@pytest.mark.parametrize("name", ["aklt", "ising", "xy", "random_xy"])
def test_terms_reassemble_direct_hamiltonian(name):
    N = 6 if name == "aklt" else 8
    model = build_model(name, N)
    ref = direct_hamiltonian(name, N, fields=model.fields)
    assert_allclose(model.dense_hamiltonian(), ref, atol=1e-14)
    assert_allclose(model.sparse_hamiltonian().toarray(), ref, atol=1e-14)
    for t in model.terms:
        assert_allclose(t, t.conj().T, atol=1e-15)


def test_aklt_terms_are_projectors_with_zero_ground_energy():
    model = build_model("aklt", 6)
    for t in model.terms:
        assert_allclose(t @ t, t, atol=1e-12)
    assert abs(exact_ground(model)[0]) <= 1e-10
    spec = exact_low_spectrum(model, k=5)
    # four zero-energy edge states on the open chain
    assert_allclose(spec.energies[:4], 0.0, atol=1e-10)
    assert spec.energies[4] > 0.1


def test_aliases_and_determinism():
    a = build_model("B", 10)
    b = build_model("ising", 10)
    assert a.name == "ising"
    assert a.fingerprint() == b.fingerprint()
    c = build_model("random_xy", 12, ModelParams(field_seed=3))
    d = build_model("D", 12, ModelParams(field_seed=3))
    assert_allclose(c.fields, d.fields, rtol=0, atol=0)
    assert c.fingerprint() != build_model("random_xy", 12).fingerprint()


def test_random_fields_in_range():
    model = build_model("random_xy", 100, ModelParams(field_seed=42))
    assert np.all(model.fields >= 1.05) and np.all(model.fields <= 1.15)


def test_model_json_round_trip():
    model = build_model("random_xy", 10, ModelParams(field_seed=5))
    back = SpinChainModel.from_json(model.to_json())
    assert back.fingerprint() == model.fingerprint()


@pytest.mark.parametrize("kwargs, match", [
    ({"name": "heisenberg", "N": 10}, "unknown"),
    ({"name": "ising", "N": 3}, "N >= 4"),
    ({"name": "ising", "N": 10, "h": -1.0}, "positive"),
    ({"name": "xy", "N": 10, "alpha": 2.0}, "alpha"),
])
def test_build_model_errors(kwargs, match):
    with pytest.raises(ValueError, match=match):
        build_model(**kwargs)


def test_pxpx_pzpz_matrices():
    px = build_observable("pxpx", (3, 4), 2)
    assert_allclose(px.matrix, np.full((4, 4), 0.25))
    pz = build_observable("pzpz", (3, 4), 2)
    assert_allclose(pz.matrix, np.diag([1.0, 0, 0, 0]))


def test_random_projector_properties():
    ob = build_observable("random", (4, 5), 3, rank=2, seed=9)
    m = ob.matrix
    assert_allclose(np.trace(m).real, 2.0, atol=1e-12)
    assert_allclose(m @ m, m, atol=1e-12)
    assert_allclose(np.linalg.norm(m, 2), 1.0, atol=1e-12)
    again = build_observable("random", (4, 5), 3, rank=2, seed=9)
    assert_allclose(again.matrix, m, rtol=0, atol=0)
    back = ObservableSpec.from_json(ob.to_json())
    assert_allclose(back.matrix, m, rtol=0, atol=0)


@pytest.mark.parametrize("args, match", [
    (("random", (4, 5), 3, 10, 1), "rank"),
    (("random", (4, 6), 3, 2, 1), "adjacent"),
    (("pxpx", (4, 5), 3), "d=2"),
    (("random", (4, 5), 3, 2, None), "seed"),
])
def test_observable_errors(args, match):
    with pytest.raises(ValueError, match=match):
        build_observable(*args)


def test_patch_hamiltonian():
    model = build_model("xy", 8)
    assert_allclose(model.patch_hamiltonian((3, 5)), model.terms[3])
    hl = model.patch_hamiltonian((2, 6))
    assert_allclose(hl, hl.conj().T, atol=1e-12)
    assert_allclose(model.patch_hamiltonian((0, 8)), direct_hamiltonian("xy", 8), atol=1e-14)
    with pytest.raises(ValueError, match="outside"):
        model.patch_hamiltonian((5, 9))
    with pytest.raises(ValueError, match="exceeds"):
        build_model("ising", 30).patch_hamiltonian((0, 13))


def test_exact_ground_residual_and_gap():
    model = build_model("ising", 10)
    e0, v = exact_ground(model)
    h = model.sparse_hamiltonian()
    assert np.linalg.norm(h @ v - e0 * v) <= 1e-9
    assert exact_low_spectrum(model).gap > 0


@pytest.mark.parametrize("name", ["ising", "xy", "random_xy"])
def test_free_fermion_oracle_agrees_with_exact_diagonalisation(name):
    model = build_model(name, 10)
    kw = {"fields": model.fields} if model.fields is not None else {}
    spec = exact_low_spectrum(model, k=1)
    assert_allclose(spec.energies[0], oracles.ground_energy(name, 10, **kw), atol=1e-12)


def test_ising_gap_matches_thermodynamic_value():
    # the finite-size gap at N=12 is still about twice the bulk value, so
    # the comparison uses the free-fermion solution at N=100
    h = 1.1
    bulk = 2 * (h - 1) / (2 * np.sqrt(1 + h * h))
    assert_allclose(bulk, 0.067, atol=5e-4)
    ed = exact_low_spectrum(build_model("ising", 12)).gap
    assert_allclose(ed, oracles.gap("ising", 12), rtol=1e-10)
    assert abs(oracles.gap("ising", 100) - bulk) <= 0.15 * bulk
