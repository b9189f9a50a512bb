import numpy as np
import pytest
from numpy.testing import assert_allclose

from patchbounds.bounds import (
    BoundResult,
    agsp_profile,
    agsp_residual,
    basic_bounds,
    commutator_residual,
    eigen_decay_profile,
    fit_decay_rate,
)
from patchbounds.linalg import random_density_matrix
from patchbounds.models import build_model, build_observable, exact_low_spectrum
from patchbounds.mps import aklt_mps, expectation, mps_from_dense
from patchbounds.patch import extract_patch, reduced_density

AKLT_XI = 1.0 / np.log(3.0)


@pytest.fixture(scope="module")
def aklt12():
    mps = aklt_mps(12)
    return mps, mps.to_dense()


def test_bound_result_json_round_trip():
    r = BoundResult("basic", 3, 36, 0.1, 0.4, oracle=0.2, seeds={"observable": 1})
    assert_allclose(r.half_width, 0.15)
    assert r.contains(0.2) and not r.contains(0.45) and r.contains(0.45, slack=0.06)
    back = BoundResult.from_json(r.to_json())
    assert back == r
    with pytest.raises(ValueError, match="empty interval"):
        BoundResult("basic", 3, 36, 0.5, 0.4)


def test_basic_bounds_identity_and_exact_bracket():
    N = 10
    model = build_model("ising", N)
    psi = exact_low_spectrum(model, k=1).states[:, 0]
    mps = mps_from_dense(psi, N, 2)
    patch = extract_patch(mps, (4, 5), 2)
    ident = build_observable("random", (4, 5), 2, rank=4, seed=0)
    r = basic_bounds(patch, ident)
    assert_allclose([r.k_min, r.k_max], [1.0, 1.0], atol=1e-12)
    pz = build_observable("pzpz", (4, 5), 2)
    value = expectation(mps, pz)
    r = basic_bounds(patch, pz, oracle=value)
    assert r.k_min - 1e-12 <= value <= r.k_max + 1e-12
    assert r.l == 2 and r.q == patch.q


def test_aklt_table_pattern():
    # exact AKLT bond dimension is 2, so keep=2 is the full subspace
    mps = aklt_mps(60)
    for seed in (1, 2, 3):
        ob = build_observable("random", (29, 30), 3, rank=2, seed=seed)
        value = expectation(mps, ob)
        r3 = basic_bounds(extract_patch(mps, ob.sites, 3, keep=2), ob, oracle=value)
        r4 = basic_bounds(extract_patch(mps, ob.sites, 4, keep=2), ob, oracle=value)
        assert r3.contains(value) and r4.contains(value)
        assert 2e-3 <= r3.half_width <= 2e-2
        assert r4.half_width < r3.half_width
        assert 1e-3 <= r4.half_width <= 5e-3
        assert r4.seeds == {"observable": seed}


def test_fit_decay_rate():
    xs = np.arange(5)
    assert_allclose(fit_decay_rate(xs, 3.0 * np.exp(-0.7 * xs)), 0.7)
    assert fit_decay_rate(xs, np.zeros(5)) == float("inf")
    # floor points are ignored
    ys = np.exp(-xs.astype(float))
    ys[-1] = 1e-15
    assert_allclose(fit_decay_rate(xs, ys), 1.0)
    with pytest.raises(ValueError, match="three points"):
        fit_decay_rate([1, 2], [0.1, 0.01])


def test_aklt_eigen_decay_profile():
    mps = aklt_mps(60)
    ob = build_observable("random", (29, 30), 3, rank=2, seed=2)
    prof = eigen_decay_profile(mps, ob, range(2, 9), keep=2)
    assert prof.rate > 0
    assert 0.5 * AKLT_XI <= prof.decay_length <= 2 * AKLT_XI
    assert np.all(np.diff(prof.deviations) <= 1e-12)
    assert all(lam > 0 for lam in prof.lambda_min_sq)
    lines = prof.to_csv().splitlines()
    assert lines[0] == "l,deviation,lambda_min_sq" and len(lines) == 8

    ident = build_observable("random", (29, 30), 3, rank=9, seed=0)
    prof = eigen_decay_profile(mps, ident, [2, 3, 4], keep=2)
    assert max(prof.deviations) <= 1e-10
    with pytest.raises(ValueError, match="three radii"):
        eigen_decay_profile(mps, ob, [2, 3])


def test_agsp_residual_decay_and_markov_identity(aklt12):
    mps, psi = aklt12
    ob = build_observable("random", (5, 6), 3, rank=2, seed=1)
    norms, rate = agsp_profile(psi, mps, ob, [1, 2, 3, 4])
    assert rate > 0
    assert all(n <= 2.0 for n in norms)
    assert np.all(np.diff(norms) < 0)
    r = agsp_residual(psi, extract_patch(mps, ob.sites, 3), ob, 12)
    assert_allclose(r.markov_sum, r.norm**2, atol=1e-10)
    assert_allclose(r.expectation, expectation(mps, ob), atol=1e-12)
    eps = 0.05
    assert r.weight_outside(eps) <= r.norm**2 / eps**2 + 1e-12


def test_agsp_identity_is_exact(aklt12):
    mps, psi = aklt12
    ident = build_observable("random", (5, 6), 3, rank=9, seed=0)
    r = agsp_residual(psi, extract_patch(mps, ident.sites, 2), ident, 12)
    assert r.norm <= 1e-12
    with pytest.raises(ValueError, match="does not match"):
        agsp_residual(psi[:10], extract_patch(mps, ident.sites, 2), ident, 12)


@pytest.mark.parametrize("name", ["ising", "xy", "random_xy"])
def test_commutator_residual_discriminates_eigenstates(name, rng):
    N, window = 10, (2, 8)
    model = build_model(name, N)
    spec = exact_low_spectrum(model, k=2)
    h_l = model.patch_hamiltonian(window)
    for k in range(2):
        rho = reduced_density(spec.states[:, k], window, N, 2)
        assert commutator_residual(rho, h_l, 6, 2) <= 1e-9
    samples = [commutator_residual(random_density_matrix(64, rng), h_l, 6, 2) for _ in range(100)]
    assert np.median(samples) >= 1e-2


def test_aklt_density_commutes_with_patch_hamiltonian():
    model = build_model("aklt", 8)
    rho = reduced_density(aklt_mps(8), (2, 6))
    h_l = model.patch_hamiltonian((2, 6))
    assert np.linalg.norm(rho @ h_l - h_l @ rho) <= 1e-10
    assert commutator_residual(rho, h_l, 4, 3) <= 1e-10


def test_commutator_residual_errors():
    h = np.eye(8)
    with pytest.raises(ValueError, match="must act"):
        commutator_residual(np.eye(4), h, 3, 2)
    with pytest.raises(ValueError, match="inconsistent"):
        commutator_residual(np.eye(8), h, 3, 2, boundary=(0, 3))
