"""Invariant suites behind ``patchbounds verify``.

Each suite returns ``{"suite", "passed", "checks": [...]}`` where every
check records the measured value next to its threshold.
"""

from __future__ import annotations

import time

import numpy as np

from .bounds import agsp_residual, commutator_residual, eigen_decay_profile
from .linalg import random_density_matrix
from .models import build_model, build_observable, exact_low_spectrum
from .mps import aklt_mps, expectation
from .patch import extract_patch, reduced_density
from . import sdp

AKLT_XI = 1.0 / np.log(3.0)


def _check(name: str, value, passed: bool, threshold=None) -> dict:
    return {"name": name, "value": value, "threshold": threshold, "passed": bool(passed)}


def suite_decay(quick: bool = False) -> list[dict]:
    N = 40 if quick else 60
    ells = list(range(2, 7 if quick else 9))
    psi = aklt_mps(N)
    mid = N // 2 - 1
    checks = []
    for seed in (1, 2, 3):
        obs = build_observable("random", (mid, mid + 1), 3, rank=2, seed=seed)
        prof = eigen_decay_profile(psi, obs, ells, keep=2)
        ratio = prof.decay_length / AKLT_XI
        checks.append(_check(f"decay length / xi (seed {seed})", ratio, 0.5 <= ratio <= 2.0, [0.5, 2.0]))
        steps = np.diff(prof.deviations)
        checks.append(_check(f"deviations nonincreasing (seed {seed})", float(np.max(steps)),
                             bool(np.all(steps <= 1e-12)), 1e-12))
    ident = build_observable("random", (mid, mid + 1), 3, rank=9, seed=0)
    prof = eigen_decay_profile(psi, ident, ells[:3], keep=2)
    checks.append(_check("identity deviation", max(prof.deviations), max(prof.deviations) <= 1e-10, 1e-10))
    return checks


def suite_agsp(quick: bool = False) -> list[dict]:
    N = 10 if quick else 12
    ells = [1, 2, 3] if quick else [1, 2, 3, 4]
    mps = aklt_mps(N)
    psi = mps.to_dense()
    mid = N // 2 - 1
    obs = build_observable("random", (mid, mid + 1), 3, rank=2, seed=1)
    res = [agsp_residual(psi, extract_patch(mps, obs.sites, ell), obs, N) for ell in ells]
    norms = [r.norm for r in res]
    from .bounds import fit_decay_rate

    rate = fit_decay_rate(ells, norms)
    markov = max(abs(r.norm**2 - r.markov_sum) for r in res)
    return [
        _check("residual decay rate", rate, rate > 0, 0.0),
        _check("Markov identity", markov, markov <= 1e-10, 1e-10),
        _check("residual <= 2", max(norms), max(norms) <= 2.0, 2.0),
    ]


def suite_corollary(quick: bool = False) -> list[dict]:
    checks = []
    N = 10
    rng = np.random.default_rng(2024)
    n_random = 20 if quick else 100
    for name in ("ising", "xy", "random_xy"):
        model = build_model(name, N)
        spec = exact_low_spectrum(model, k=2)
        window = (2, 8)
        h_l = model.patch_hamiltonian(window)
        for k in (0, 1):
            rho = reduced_density(spec.states[:, k], window, N, 2)
            r = commutator_residual(rho, h_l, 6, 2)
            checks.append(_check(f"{name} eigenstate {k}", r, r <= 1e-9, 1e-9))
        samples = [commutator_residual(random_density_matrix(64, rng), h_l, 6, 2) for _ in range(n_random)]
        med = float(np.median(samples))
        checks.append(_check(f"{name} random median", med, med >= 1e-2, 1e-2))
    a = aklt_mps(8)
    model = build_model("aklt", 8)
    window = (2, 6)
    rho = reduced_density(a, window)
    h_l = model.patch_hamiltonian(window)
    comm = float(np.linalg.norm(rho @ h_l - h_l @ rho))
    checks.append(_check("aklt [rho_L, H_L]", comm, comm <= 1e-10, 1e-10))
    return checks


def suite_dl(quick: bool = False) -> list[dict]:
    from .dl import (agsp_decomposition, build_layers, dl_contraction_rate, fixed_point_residual, ground_space,
                     lightcone_identity_check)

    checks = []
    model = build_model("aklt", 8)
    layers = build_layers(model)
    ground = ground_space(model)
    psi = aklt_mps(8).to_dense()
    fp = fixed_point_residual(layers, psi)
    checks.append(_check("DL fixes the ground state", fp, fp <= 1e-10, 1e-10))
    prof = dl_contraction_rate(layers, ground, 4 if quick else 6)
    steps = np.diff(prof.norms)
    checks.append(_check("complement norms nonincreasing", float(np.max(steps)), bool(np.all(steps <= 1e-10)), 1e-10))
    checks.append(_check("contraction constant c", prof.c, prof.c < 1.0, 1.0))
    checks.append(_check("norms", prof.norms, True))

    N = 10
    mps = aklt_mps(N)
    psi = mps.to_dense()
    obs = build_observable("random", (4, 5), 3, rank=2, seed=1)
    layers10 = build_layers(build_model("aklt", N))
    patch = extract_patch(mps, obs.sites, 3)
    lc = lightcone_identity_check(layers10, patch, psi, obs.matrix, obs.sites, 1)
    checks.append(_check("light-cone identity, l=3, l'=1", lc.residual, lc.inside_cone and lc.residual <= 1e-10,
                         1e-10))
    if not quick:
        ground10 = ground_space(build_model("aklt", N))
        for ell in (2, 3):
            patch = extract_patch(mps, obs.sites, ell)
            delta = agsp_residual(psi, patch, obs, N).norm
            dec = agsp_decomposition(layers10, patch, ground10, psi, obs.matrix, obs.sites, delta)
            checks.append(_check(f"AGSP residual vs DL bound, l={ell}", [delta, dec.bound],
                                 delta <= dec.bound + 1e-9))
    return checks


def suite_sdp(quick: bool = False) -> list[dict]:
    rng = np.random.default_rng(7)
    n_max, m_max = (20, 200) if quick else (40, 800)
    worst_gap, worst_eig, failures = 0.0, 0.0, 0
    for _ in range(200):
        n = int(rng.integers(2, n_max + 1))
        m = int(rng.integers(1, min(m_max, n * n - 1) + 1))
        sol = sdp.solve(sdp.random_feasible_problem(n, m, rng))
        failures += not sol.optimal
        worst_gap = max(worst_gap, abs(sol.gap))
        worst_eig = min(worst_eig, sol.lmi_min_eig)
    m = rng.standard_normal((36, 36)) + 1j * rng.standard_normal((36, 36))
    m = 0.5 * (m + m.conj().T)
    sol = sdp.solve(sdp.lambda_max_problem(m))
    err = abs(sol.primal_objective - float(np.linalg.eigvalsh(m)[-1]))
    return [
        _check("non-optimal instances", failures, failures == 0, 0),
        _check("worst duality gap", worst_gap, worst_gap <= 1e-8, 1e-8),
        _check("worst LMI eigenvalue", worst_eig, worst_eig >= -1e-9, -1e-9),
        _check("lambda_max via SDP", err, err <= 1e-8, 1e-8),
    ]


SUITES = {
    "decay": suite_decay,
    "agsp": suite_agsp,
    "corollary": suite_corollary,
    "dl": suite_dl,
    "sdp": suite_sdp,
}


def run_suite(name: str, quick: bool = False) -> dict:
    t0 = time.perf_counter()
    try:
        checks = SUITES[name](quick)
        passed = all(c["passed"] for c in checks)
        error = None
    except Exception as exc:  # a crashing suite is a failed suite
        checks, passed, error = [], False, f"{type(exc).__name__}: {exc}"
    return {"suite": name, "passed": passed, "checks": checks, "error": error,
            "seconds": time.perf_counter() - t0}
