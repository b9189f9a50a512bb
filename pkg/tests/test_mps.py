import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from patchbounds.models import build_model, build_observable, exact_ground, spin_one_operators
from patchbounds.mps import (
    MPS,
    aklt_mps,
    correlation_length,
    default_probe,
    expectation,
    mps_from_dense,
    product_mps,
    random_antihermitian_operator,
    random_mpo_dense,
    random_mps,
    schmidt_spectrum,
)


def dense_expectation(psi, op, first, N, d):
    full = np.kron(np.kron(np.eye(d**first), op), np.eye(d ** (N - first - 2)))
    return np.vdot(psi, full @ psi).real / np.vdot(psi, psi).real


def test_boundary_and_bond_validation():
    with pytest.raises(ValueError, match="boundary"):
        MPS((np.ones((2, 2, 1)),))
    with pytest.raises(ValueError, match="mismatch"):
        MPS((np.ones((1, 2, 2)), np.ones((3, 2, 1))))


@settings(max_examples=25, deadline=None)
@given(N=st.integers(2, 8), bond=st.integers(1, 6), center=st.integers(0, 7), seed=st.integers(0, 10**6))
def test_canonical_form_isometries(N, bond, center, seed):
    m = random_mps(N, 2, bond, np.random.default_rng(seed))
    c = min(center, N - 1)
    cm = m.canonicalize(c)
    assert cm.isometry_residual() <= 1e-10
    assert abs(cm.norm_squared() - 1.0) <= 1e-10
    assert_allclose(abs(np.vdot(m.to_dense(), cm.to_dense())), 1.0, atol=1e-10)


def test_expectation_matches_dense(rng):
    N, d = 8, 3
    m = random_mps(N, d, 5, rng)
    psi = m.to_dense()
    ob = build_observable("random", (3, 4), d, rank=2, seed=4)
    assert_allclose(expectation(m, ob), dense_expectation(psi, ob.matrix, 3, N, d), atol=1e-10)
    ident = build_observable("random", (3, 4), d, rank=9, seed=0)
    assert_allclose(expectation(m, ident), 1.0, atol=1e-12)
    with pytest.raises(ValueError, match="does not fit"):
        expectation(m, build_observable("random", (7, 8), d, rank=1, seed=1))


def test_mps_from_dense_round_trip(rng):
    v = rng.standard_normal(2**9) + 1j * rng.standard_normal(2**9)
    v /= np.linalg.norm(v)
    m = mps_from_dense(v, 9, 2)
    assert_allclose(abs(np.vdot(v, m.to_dense())), 1.0, atol=1e-12)
    with pytest.raises(ValueError, match="not a state"):
        mps_from_dense(v[:100], 9, 2)


def test_schmidt_spectra():
    s = schmidt_spectrum(product_mps([[1, 0], [0.6, 0.8], [1, 1]]), 1)
    assert_allclose(s.weights[0], 1.0, atol=1e-12)
    assert np.all(s.weights[1:] < 1e-12)

    a = schmidt_spectrum(aklt_mps(30), 14)
    assert_allclose(a.weights, [1 / np.sqrt(2)] * 2, atol=1e-6)

    r = random_mps(10, 2, 8, np.random.default_rng(3))
    for bond in range(9):
        w = schmidt_spectrum(r, bond).weights
        assert_allclose(np.sum(w**2), 1.0, atol=1e-10)
        assert np.all(np.diff(w) <= 1e-15)


def test_aklt_mps_is_zero_energy_ground_state():
    model = build_model("aklt", 8)
    psi = aklt_mps(8).to_dense()
    h = model.sparse_hamiltonian()
    assert np.linalg.norm(h @ psi) <= 1e-12
    # a different edge choice gives an orthogonal member of the ground space
    other = aklt_mps(8, left_edge=1).to_dense()
    assert np.linalg.norm(h @ other) <= 1e-12
    assert abs(np.vdot(psi, other)) <= 1e-12


def test_truncation_keeps_small_bonds(rng):
    m = random_mps(10, 2, 16, rng)
    t = m.truncated(4)
    assert t.max_bond <= 4
    assert abs(t.norm_squared() - 1.0) <= 1e-10


def test_aklt_correlation_length():
    fit = correlation_length(aklt_mps(40), spin_one_operators()[2], start=10, max_distance=14)
    assert fit.reliable
    assert_allclose(fit.xi, 1.0 / np.log(3.0), rtol=1e-3)


def test_correlation_length_flags_uncorrelated_state():
    fit = correlation_length(product_mps([[1, 0]] * 12), np.diag([1.0, -1.0]))
    assert not fit.reliable
    assert np.isnan(fit.xi)


@pytest.mark.slow
@pytest.mark.parametrize("name, xi", [("ising", 8.8), ("xy", 4.3)])
def test_frustrated_correlation_lengths(chain_states, name, xi):
    gs = chain_states(name)
    fit = correlation_length(gs.mps, default_probe(gs.model))
    assert fit.reliable
    assert abs(fit.xi - xi) <= 0.2 * xi


def test_random_mpo_is_dense_operator(rng):
    m = random_mpo_dense(3, 2, 4, rng)
    assert m.shape == (8, 8)
    with pytest.raises(ValueError, match="too large"):
        random_mpo_dense(13, 2, 4, rng)


def test_random_antihermitian_operator(rng):
    a = random_antihermitian_operator(4, 2, 20, rng)
    assert np.max(np.abs(a + a.conj().T)) <= 1e-12 * np.max(np.abs(a))
    assert_allclose(np.linalg.norm(a), 1.0)
    again = random_antihermitian_operator(4, 2, 20, np.random.default_rng(5))
    assert_allclose(random_antihermitian_operator(4, 2, 20, np.random.default_rng(5)), again, rtol=0, atol=0)


def test_commutator_with_eigenstate_has_zero_expectation(rng):
    N = 10
    model = build_model("ising", N)
    _, psi = exact_ground(model)
    a = random_antihermitian_operator(4, 2, 20, rng)
    full = np.kron(np.kron(np.eye(2**3), a), np.eye(2**3))
    h = model.sparse_hamiltonian()
    comm = h @ full - (h.T @ full.T).T
    assert abs(np.vdot(psi, comm @ psi)) <= 1e-9
