import numpy as np
import pytest
from numpy.testing import assert_allclose

from patchbounds.bounds import agsp_residual
from patchbounds.dl import (
    agsp_decomposition,
    build_layers,
    dl_contraction_rate,
    fixed_point_residual,
    ground_space,
    kernel_projector,
    lightcone_depth,
    lightcone_identity_check,
)
from patchbounds.models import build_model, build_observable
from patchbounds.mps import aklt_mps
from patchbounds.patch import extract_patch


@pytest.fixture(scope="module")
def aklt8():
    model = build_model("aklt", 8)
    return build_layers(model), ground_space(model), aklt_mps(8).to_dense()


@pytest.fixture(scope="module")
def aklt10():
    mps = aklt_mps(10)
    return build_layers(build_model("aklt", 10)), mps, mps.to_dense()


def test_layer_structure(aklt8):
    layers, _, _ = aklt8
    assert layers.g == 2
    assert [len(layer) for layer in layers.layers] == [4, 3]
    for layer in layers.layers:
        sites = [s for i, _ in layer for s in (i, i + 1)]
        assert len(sites) == len(set(sites))
        for _, p in layer:
            assert_allclose(p @ p, p, atol=1e-12)
    # each layer product is idempotent as an operator on the chain
    rng = np.random.default_rng(0)
    v = rng.standard_normal(3**8) + 1j * rng.standard_normal(3**8)
    for k in range(2):
        once = layers.apply_layer(k, v)
        assert_allclose(layers.apply_layer(k, once), once, atol=1e-12)


def test_dl_fixes_ground_states(aklt8):
    layers, ground, psi = aklt8
    assert fixed_point_residual(layers, psi) <= 1e-10
    assert ground.shape[1] == 4
    for k in range(4):
        assert fixed_point_residual(layers, ground[:, k]) <= 1e-10


def test_contraction_profile(aklt8):
    layers, ground, _ = aklt8
    prof = dl_contraction_rate(layers, ground, 6)
    assert prof.norms[0] == 1.0
    assert np.all(np.diff(prof.norms) <= 1e-10)
    assert prof.c < 1.0
    assert prof.degeneracy == 4
    # geometric: consecutive ratios stay close to the fitted factor
    ratios = np.array(prof.norms[2:]) / np.array(prof.norms[1:-1])
    assert np.all(np.abs(ratios - prof.ratio) <= 0.05)
    assert prof.to_csv().splitlines()[0] == "l,norm"


def test_lightcone_depth_geometry():
    assert lightcone_depth((4, 5), (3, 7), 10) == 0
    assert lightcone_depth((4, 5), (2, 8), 10) == 1
    assert lightcone_depth((4, 5), (1, 9), 10) == 1
    assert lightcone_depth((40, 41), (30, 52), 100) > lightcone_depth((40, 41), (36, 46), 100)


def test_lightcone_identity_inside_the_cone(aklt10):
    layers, mps, psi = aklt10
    ob = build_observable("random", (4, 5), 3, rank=2, seed=1)
    patch = extract_patch(mps, ob.sites, 3)
    check = lightcone_identity_check(layers, patch, psi, ob.matrix, ob.sites, 1)
    assert check.inside_cone
    assert check.residual <= 1e-10
    zero = lightcone_identity_check(layers, patch, psi, ob.matrix, ob.sites, 0)
    assert zero.residual == 0.0
    ident = np.eye(9)
    for depth in (1, 2, 3):
        assert lightcone_identity_check(layers, patch, psi, ident, ob.sites, depth).residual <= 1e-10


def test_lightcone_identity_fails_outside_the_cone(aklt10):
    layers, mps, psi = aklt10
    ob = build_observable("random", (4, 5), 3, rank=2, seed=1)
    patch = extract_patch(mps, ob.sites, 1)
    check = lightcone_identity_check(layers, patch, psi, ob.matrix, ob.sites, 1)
    assert not check.inside_cone
    assert check.residual > 1e-6


def test_residual_is_bounded_by_dl_decomposition(aklt10):
    layers, mps, psi = aklt10
    ground = ground_space(build_model("aklt", 10))
    ob = build_observable("random", (4, 5), 3, rank=2, seed=1)
    for ell in (2, 3):
        patch = extract_patch(mps, ob.sites, ell)
        delta = agsp_residual(psi, patch, ob, 10).norm
        dec = agsp_decomposition(layers, patch, ground, psi, ob.matrix, ob.sites, delta)
        assert dec.depth == 1
        assert delta <= dec.bound + 1e-9
        assert dec.dl_term <= dec.complement_norm * np.linalg.norm(ob.matrix, 2) + 1e-9


def test_non_frustration_free_model_is_rejected():
    with pytest.raises(ValueError, match="not positive semidefinite"):
        build_layers(build_model("ising", 6))
    with pytest.raises(ValueError, match="no zero-energy"):
        kernel_projector(np.eye(4))
