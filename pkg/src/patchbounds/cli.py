"""Command-line interface.

Every command accepts ``--config FILE`` with ``key = value`` lines using
the option names below (dashes or underscores); explicit flags win over
the file.  Exit codes: 0 success, 1 failed check or non-converged run,
2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .io import dumps_json, read_mps, read_mps_metadata, write_json, write_mps
from .models import MAX_DENSE_DIM, exact_low_spectrum
from .mps import expectation
from .pipeline import (
    RunConfig,
    compare_endpoint,
    compute_bound,
    ground_state,
    model_from_config,
    observable_from_config,
    parse_key_values,
    provenance,
    reference_values,
)

log = logging.getLogger("patchbounds")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# (flag, RunConfig field, type, help)
RUN_OPTIONS = [
    ("--model", "model", str, "aklt, ising, xy, random_xy (or A-D)"),
    ("--n", "n", int, "number of sites"),
    ("--h", "h", float, "transverse field (also sets the prefactor)"),
    ("--alpha", "alpha", float, "XY anisotropy"),
    ("--field-seed", "field_seed", int, "seed of the random fields"),
    ("--bond", "bond", int, "DMRG bond dimension"),
    ("--dmrg-seed", "dmrg_seed", int, "seed of the initial MPS"),
    ("--max-sweeps", "max_sweeps", int, "DMRG sweep limit"),
    ("--keep", "keep", int, "Schmidt vectors kept at each cut"),
    ("--obs", "obs", str, "pxpx, pzpz or random"),
    ("--obs-rank", "obs_rank", int, "rank of a random projector"),
    ("--obs-seed", "obs_seed", int, "seed of a random projector"),
    ("--site", "site", int, "left site of the observable (0-based)"),
    ("--l", "l", int, "patch radius"),
    ("--method", "method", str, "basic or cgo"),
    ("--batch", "batch", int, "generators added per CGO step"),
    ("--max-m", "max_m", int, "generator cap per bound"),
    ("--seed-upper", "seed_upper", int, "generator stream of the upper bound"),
    ("--seed-lower", "seed_lower", int, "generator stream of the lower bound"),
    ("--mpo-bond", "mpo_bond", int, "bond dimension of the random generator MPOs"),
    ("--wiggle", "wiggle", float, "relative worsening that stops the CGO run"),
    ("--sdp-tol", "sdp_tol", float, "SDP tolerance"),
]


class UsageError(Exception):
    pass


def _run_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="key = value file; flags take precedence")
    for flag, dest, typ, text in RUN_OPTIONS:
        p.add_argument(flag, dest=dest, type=typ, default=None, help=text)
    p.add_argument("--output", "-o", help="output path (default: stdout for JSON)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parent = _run_parent()
    parser = argparse.ArgumentParser(prog="patchbounds", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("ground", parents=[parent], help="ground state as an MPS file")
    g.add_argument("--mps", help="MPS output file (default ground.mps)")

    sub.add_parser("exact", parents=[parent], help="exact diagonalisation for small chains")

    b = sub.add_parser("bound", parents=[parent], help="basic or CGO interval")
    b.add_argument("--mps", help="MPS file from 'ground'; computed when absent")
    b.add_argument("--trace", help="CSV file for the CGO convergence trace")

    t = sub.add_parser("table", parents=[parent], help="reference table for several systems")
    t.add_argument("--systems", default="aklt,ising,xy,random_xy")
    t.add_argument("--ells", default="3,4")
    t.add_argument("--no-cgo", action="store_true", help="basic intervals only")
    t.add_argument("--workers", type=int, default=1)
    t.add_argument("--csv", help="also write the table as CSV")

    v = sub.add_parser("verify", parents=[parent], help="invariant suites")
    v.add_argument("--suite", action="append", choices=["decay", "agsp", "corollary", "dl", "sdp"],
                   help="suite to run (repeatable; default all)")
    v.add_argument("--quick", action="store_true", help="reduced sizes")
    v.add_argument("--workers", type=int, default=1)

    r = sub.add_parser("residual", parents=[parent], help="local eigenstate constraint residual")
    r.add_argument("--state", type=int, default=0, help="index of the exact eigenstate")
    r.add_argument("--window", help="start,stop of the window (default: around the observable)")
    r.add_argument("--random", type=int, default=0, help="also sample this many random density matrices")
    r.add_argument("--seed", type=int, default=0)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        try:
            values.update(parse_key_values(Path(args.config).read_text()))
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
    for _, dest, _, _ in RUN_OPTIONS:
        v = getattr(args, dest, None)
        if v is not None:
            values[dest] = v
    try:
        return RunConfig.from_mapping(values)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def _emit(doc: dict, path: str | None) -> None:
    if path:
        write_json(path, doc)
    else:
        sys.stdout.write(dumps_json(doc))


# ----------------------------------------------------------------------
# commands

def cmd_ground(args, cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    gs = ground_state(cfg)
    path = args.mps or "ground.mps"
    meta = provenance(cfg, energy=gs.energy, converged=gs.converged, method=gs.method,
                      sweep_energies=gs.sweep_energies, model=gs.model.to_json())
    write_mps(path, gs.mps, meta)
    report = provenance(cfg, mps=path, energy=gs.energy, converged=gs.converged, method=gs.method,
                        bond_dims=gs.mps.bond_dims, seconds=time.perf_counter() - t0)
    ok = gs.converged
    if gs.model.d ** gs.model.N <= MAX_DENSE_DIM and gs.model.N <= 12:
        e0 = float(exact_low_spectrum(gs.model, k=1).energies[0])
        report["exact_energy"] = e0
        report["exact_delta"] = abs(gs.energy - e0)
        ok = ok and report["exact_delta"] <= 1e-8
    _emit(report, args.output)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_exact(args, cfg: RunConfig) -> int:
    model = model_from_config(cfg)
    if model.d**model.N > MAX_DENSE_DIM:
        raise UsageError(f"exact diagonalisation limited to dimension {MAX_DENSE_DIM}")
    spec = exact_low_spectrum(model, k=2)
    obs = observable_from_config(cfg, model)
    from .mps import mps_from_dense

    psi = mps_from_dense(spec.states[:, 0], model.N, model.d)
    _emit(provenance(cfg, energies=spec.energies, gap=spec.gap, expectation=expectation(psi, obs),
                     observable=obs.to_json()), args.output)
    return EXIT_OK


def _load_state(args, cfg: RunConfig):
    model = model_from_config(cfg)
    if args.mps:
        mps = read_mps(args.mps)
        if mps.model_fingerprint and mps.model_fingerprint != model.fingerprint():
            stored = read_mps_metadata(args.mps).get("config", {})
            raise UsageError(f"MPS file was computed for a different model (stored config {stored})")
        return model, mps
    return model, ground_state(cfg, model).mps


def cmd_bound(args, cfg: RunConfig) -> int:
    model, mps = _load_state(args, cfg)
    run = compute_bound(cfg, model, mps)
    doc = provenance(cfg, result=run.result.to_json())
    if run.trace is not None:
        doc["stop_reason"] = run.trace.stop_reason
        if args.trace:
            Path(args.trace).write_text(run.trace.to_csv())
            doc["trace"] = args.trace
    _emit(doc, args.output)
    return EXIT_OK


def _table_cells(systems, ells, cgo: bool):
    ref = reference_values()["systems"]
    for system in systems:
        for obs_key in ref[system]:
            for ell in ells:
                methods = ["basic"] + (["cgo"] if cgo and system != "aklt" else [])
                for method in methods:
                    yield system, obs_key, ell, method


def _table_cell(job):
    base, system, obs_key, ell, method, states = job
    ref = reference_values()
    cfg = RunConfig.from_mapping({**base, "model": system, "l": ell, "method": method})
    if obs_key.startswith("random"):
        cfg.obs = "random"
        cfg.obs_seed = int(obs_key.split("_")[1]) if "_" in obs_key else cfg.obs_seed
    else:
        cfg.obs = obs_key
    row = {"system": system, "observable": obs_key, "l": ell, "method": method}
    try:
        model = model_from_config(cfg)
        mps = states[system] if states and system in states else ground_state(cfg, model).mps
        run = compute_bound(cfg, model, mps)
        r = run.result
        row.update(exact=r.oracle, k_min=r.k_min, k_max=r.k_max, half_width=r.half_width,
                   generators=r.generator_count, seeds=r.seeds, bracket=r.contains(r.oracle))
        cell = ref["systems"][system].get(obs_key, {})
        tol = ref["tolerances"]
        if cell.get("reproducible"):
            row["exact_matches"] = compare_endpoint(r.oracle, cell["exact"], tol["oracle"])
            key = f"{method}_{ell}"
            if method == "cgo" and key in cell:
                row["endpoints_match"] = (compare_endpoint(r.k_min, cell[key][0], tol["cgo_endpoint"])
                                          and compare_endpoint(r.k_max, cell[key][1], tol["cgo_endpoint"]))
        row["reference"] = cell
    except Exception as exc:  # reported per cell, the table continues
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_table(args, cfg: RunConfig) -> int:
    from .models import canonical_model_name

    systems = [canonical_model_name(s) for s in args.systems.split(",") if s]
    ells = [int(x) for x in args.ells.split(",") if x]
    base = cfg.to_json()
    states = {}
    for s in systems:
        c = RunConfig.from_mapping({**base, "model": s})
        states[s] = ground_state(c).mps
    jobs = [(base, *cell, states) for cell in _table_cells(systems, ells, not args.no_cgo)]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            rows = list(pool.map(_table_cell, jobs))
    else:
        rows = [_table_cell(j) for j in jobs]
    doc = provenance(cfg, rows=rows, tolerances=reference_values()["tolerances"])
    _emit(doc, args.output)
    if args.csv:
        _write_table_csv(args.csv, rows)
    failed = [r for r in rows if "error" in r or r.get("exact_matches") is False or r.get("bracket") is False]
    return EXIT_FAIL if failed else EXIT_OK


def _write_table_csv(path, rows) -> None:
    import csv

    cols = ["system", "observable", "l", "method", "exact", "k_min", "k_max", "half_width", "generators",
            "bracket", "exact_matches", "endpoints_match", "error"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, cols, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def cmd_verify(args, cfg: RunConfig) -> int:
    from .verify import SUITES, run_suite

    names = args.suite or list(SUITES)
    jobs = [(name, args.quick) for name in names]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            results = list(pool.map(_suite_job, jobs))
    else:
        results = [run_suite(n, q) for n, q in jobs]
    doc = provenance(cfg, quick=args.quick, suites=results, passed=all(r["passed"] for r in results))
    _emit(doc, args.output)
    return EXIT_OK if doc["passed"] else EXIT_FAIL


def _suite_job(job):
    from .verify import run_suite

    return run_suite(*job)


def cmd_residual(args, cfg: RunConfig) -> int:
    from .bounds import commutator_residual
    from .linalg import random_density_matrix
    from .patch import reduced_density

    model = model_from_config(cfg)
    if model.d**model.N > MAX_DENSE_DIM:
        raise UsageError("residual needs an exactly diagonalisable chain")
    if args.window:
        window = tuple(int(x) for x in args.window.split(","))
    else:
        i, j = cfg.sites
        window = (max(0, i - cfg.l), min(model.N, j + cfg.l + 1))
    n = window[1] - window[0]
    if n < 3 or model.d**n > 4096:
        raise UsageError(f"window {window} must have 3 or more sites and dimension at most 4096")
    spec = exact_low_spectrum(model, k=args.state + 1)
    rho = reduced_density(spec.states[:, args.state], window, model.N, model.d)
    h_l = model.patch_hamiltonian(window)
    res = commutator_residual(rho, h_l, n, model.d)
    doc = provenance(cfg, window=list(window), state=args.state, energy=float(spec.energies[args.state]),
                     residual=res)
    if args.random:
        rng = np.random.default_rng(args.seed)
        samples = [commutator_residual(random_density_matrix(model.d**n, rng), h_l, n, model.d)
                   for _ in range(args.random)]
        doc["random_median"] = float(np.median(samples))
        doc["random_min"] = float(np.min(samples))
    _emit(doc, args.output)
    return EXIT_OK


COMMANDS = {
    "ground": cmd_ground,
    "exact": cmd_exact,
    "bound": cmd_bound,
    "table": cmd_table,
    "verify": cmd_verify,
    "residual": cmd_residual,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except (UsageError, ValueError) as exc:
        # ValueError comes from model and observable validation
        print(f"patchbounds: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
