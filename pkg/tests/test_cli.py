import json
import subprocess
import sys

import numpy as np
import pytest

from hodgecgo import __version__, container
from hodgecgo.cli import config_hash, main

SMALL = {
    "check-identities": {"draws": 50, "grids": [12, 24], "split_grids": [17, 33], "forms": 2},
    "solve-bvp": {"grid": {"m": 9}},
    "boundary-map": {"grid": {"m": 6}},
    "cgo-residual": {"grid": {"m": 13}, "taus": [4, 8], "quasimode_m": 48},
    "ray-transform": {"m": 64, "lam": 0.5, "n_entry": 8, "n_dir": 9},
    "reconstruct": {"kmax": 3.2, "n": 16, "max_error": 1.0},
    "carleman-sweep": {"grid": {"m": 14}, "hs": [0.1, 0.05]},
}


def run(tmp_path, sub, cfg, *extra):
    tmp_path.mkdir(parents=True, exist_ok=True)
    p = tmp_path / f"{sub}.cfg.json"
    p.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    code = main([sub, "--config", str(p), "--out", str(out), *extra])
    return code, out


@pytest.mark.parametrize("sub", sorted(SMALL))
def test_every_subcommand_runs(tmp_path, sub):
    code, out = run(tmp_path, sub, SMALL[sub])
    doc = json.loads((out / f"{sub}.json").read_text())
    assert code == (0 if doc["status"] == "pass" else 1)
    assert doc["version"] == __version__ and doc["seed"] == 0
    for name in doc["files"]:
        if name.endswith(".csv"):
            head = (out / name).read_text().splitlines()[0]
            assert head == f"# config_hash={doc['config_hash']},version={__version__}"


def test_outputs_are_deterministic(tmp_path):
    a = run(tmp_path / "a", "solve-bvp", SMALL["solve-bvp"], "--seed", "3")[1]
    b = run(tmp_path / "b", "solve-bvp", SMALL["solve-bvp"], "--seed", "3", "--threads", "1")[1]
    for name in ("solve-bvp.json", "solution_norms.csv", "solution.hcgo"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    c = run(tmp_path / "c", "solve-bvp", SMALL["solve-bvp"], "--seed", "4")[1]
    assert (a / "solution.hcgo").read_bytes() != (c / "solution.hcgo").read_bytes()


def test_saved_solution_loads(tmp_path):
    _, out = run(tmp_path, "solve-bvp", SMALL["solve-bvp"])
    u = container.load(out / "solution.hcgo")
    assert u.data.shape == (8, 9, 9, 9) and np.all(np.isfinite(u.data))


def test_config_errors_exit_2(tmp_path):
    code, out = run(tmp_path, "solve-bvp", {"kind": "dirichlet"})
    assert code == 2
    err = json.loads((out / "error.json").read_text())
    assert err["exit_code"] == 2 and err["error_type"] == "ConfigError"
    assert run(tmp_path, "solve-bvp", {"bogus": 1})[0] == 2
    assert main(["solve-bvp", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 2


def test_numerical_failure_exit_3(tmp_path):
    # Q = 0 makes the top-degree relative problem a pure Neumann problem
    code, out = run(tmp_path, "boundary-map", {"grid": {"m": 6}, "potential": {"family": "zero"}})
    assert code == 3
    assert json.loads((out / "error.json").read_text())["error_type"] == "NearSingular"
    # a later successful run clears the stale error file
    assert run(tmp_path, "boundary-map", SMALL["boundary-map"])[0] == 0
    assert not (out / "error.json").exists()


def test_config_hash_is_order_independent():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})


def test_environment_defaults(tmp_path, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(SMALL["ray-transform"]))
    monkeypatch.setenv("HODGECGO_CONFIG", str(cfg))
    monkeypatch.setenv("HODGECGO_OUT", str(tmp_path / "env-out"))
    monkeypatch.setenv("HODGECGO_SEED", "7")
    assert main(["ray-transform"]) == 0
    doc = json.loads((tmp_path / "env-out" / "ray-transform.json").read_text())
    assert doc["seed"] == 7 and doc["checks"]["diameter"]


def test_console_module_entry(tmp_path):
    r = subprocess.run([sys.executable, "-m", "hodgecgo", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip() == __version__
