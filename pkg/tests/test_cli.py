import json
import subprocess
import sys

import pytest

from patchbounds import __version__
from patchbounds.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    doc = json.loads(out.out) if out.out.strip().startswith("{") else None
    return code, doc, out.err


def check_provenance(doc):
    assert doc["version"] == __version__
    assert set(doc["config"]) >= {"model", "n", "bond", "dmrg_seed", "seed_upper", "seed_lower", "obs_seed"}


def test_usage_errors(capsys, tmp_path):
    assert run(capsys, "frobnicate")[0] == EXIT_USAGE
    code, _, err = run(capsys, "exact", "--model", "potts")
    assert code == EXIT_USAGE and "potts" in err
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    code, _, err = run(capsys, "exact", "--config", str(bad))
    assert code == EXIT_USAGE and "unknown configuration key" in err
    code, _, err = run(capsys, "exact", "--config", str(tmp_path / "missing.cfg"))
    assert code == EXIT_USAGE and "cannot read" in err
    code, _, err = run(capsys, "exact", "--n", "40")
    assert code == EXIT_USAGE and "limited" in err
    assert run(capsys, "--version")[0] == EXIT_OK


def test_ground_is_exact_and_reproducible(capsys, tmp_path):
    a, b = tmp_path / "a.mps", tmp_path / "b.mps"
    code, doc, _ = run(capsys, "ground", "--model", "B", "--n", "10", "--bond", "16", "--mps", str(a))
    assert code == EXIT_OK
    check_provenance(doc)
    assert doc["exact_delta"] <= 1e-8 and doc["converged"]
    run(capsys, "ground", "--model", "ising", "--n", "10", "--bond", "16", "--mps", str(b))
    assert a.read_bytes() == b.read_bytes()
    side = json.loads((tmp_path / "a.mps.json").read_text())
    assert side["metadata"]["config"]["bond"] == 16


def test_ground_reports_failure_when_not_converged(capsys, tmp_path):
    code, doc, _ = run(capsys, "ground", "--model", "xy", "--n", "10", "--bond", "2", "--max-sweeps", "1",
                       "--mps", str(tmp_path / "x.mps"))
    assert code == EXIT_FAIL
    assert not (doc["converged"] and doc["exact_delta"] <= 1e-8)


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small chain\nmodel = xy\nn = 8\nobs = pzpz\n")
    code, doc, _ = run(capsys, "exact", "--config", str(cfg), "--n", "10")
    assert code == EXIT_OK
    assert doc["config"]["model"] == "xy" and doc["config"]["n"] == 10 and doc["config"]["obs"] == "pzpz"
    assert doc["gap"] > 0 and 0 <= doc["expectation"] <= 1


def test_bound_from_stored_state(capsys, tmp_path):
    mps = tmp_path / "g.mps"
    run(capsys, "ground", "--model", "ising", "--n", "10", "--mps", str(mps))
    code, doc, _ = run(capsys, "bound", "--model", "ising", "--n", "10", "--mps", str(mps), "--l", "2")
    assert code == EXIT_OK
    check_provenance(doc)
    r = doc["result"]
    assert r["method"] == "basic" and r["k_min"] <= r["oracle"] <= r["k_max"]
    trace = tmp_path / "t.csv"
    out = tmp_path / "cgo.json"
    code, _, _ = run(capsys, "bound", "--model", "ising", "--n", "10", "--mps", str(mps), "--l", "2",
                     "--method", "cgo", "--max-m", "40", "--trace", str(trace), "-o", str(out))
    assert code == EXIT_OK
    doc = json.loads(out.read_text())
    c = doc["result"]
    assert c["k_min"] >= r["k_min"] - 1e-9 and c["k_max"] <= r["k_max"] + 1e-9
    assert c["k_max"] - c["k_min"] < r["k_max"] - r["k_min"]
    assert trace.read_text().startswith("step,m_upper")
    assert doc["stop_reason"]
    # a state computed for another model is refused
    code, _, err = run(capsys, "bound", "--model", "xy", "--n", "10", "--mps", str(mps))
    assert code == EXIT_USAGE and "different model" in err


def test_aklt_cgo_falls_back_to_basic(capsys):
    code, _, err = run(capsys, "bound", "--model", "aklt", "--n", "12")
    assert code == EXIT_USAGE and "d=2" in err
    args = ["bound", "--model", "aklt", "--n", "12", "--l", "2", "--obs", "random"]
    _, basic, _ = run(capsys, *args)
    _, cgo, _ = run(capsys, *args, "--method", "cgo")
    assert cgo["result"]["k_min"] == pytest.approx(basic["result"]["k_min"], abs=1e-10)
    assert cgo["result"]["k_max"] == pytest.approx(basic["result"]["k_max"], abs=1e-10)
    assert cgo["result"]["notes"]


def test_small_table(capsys, tmp_path):
    csv = tmp_path / "t.csv"
    code, doc, _ = run(capsys, "table", "--systems", "aklt", "--ells", "2,3", "--n", "14", "--no-cgo",
                       "--csv", str(csv))
    assert code == EXIT_OK
    check_provenance(doc)
    rows = doc["rows"]
    assert len(rows) == 6 and all(r["bracket"] for r in rows)
    assert {r["method"] for r in rows} == {"basic"}
    lines = csv.read_text().splitlines()
    assert lines[0].startswith("system,observable,l,method") and len(lines) == 7


def test_verify_and_residual(capsys):
    code, doc, _ = run(capsys, "verify", "--suite", "dl", "--quick")
    assert code == EXIT_OK and doc["passed"]
    check_provenance(doc)
    code, doc, _ = run(capsys, "residual", "--model", "ising", "--n", "10", "--l", "2", "--random", "20")
    assert code == EXIT_OK
    check_provenance(doc)
    assert doc["residual"] <= 1e-9 and doc["random_median"] >= 1e-2
    code, _, err = run(capsys, "residual", "--model", "ising", "--n", "10", "--window", "4,6")
    assert code == EXIT_USAGE


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "patchbounds.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for command in ("ground", "exact", "bound", "table", "verify", "residual"):
        assert command in out.stdout
