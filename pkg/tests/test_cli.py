import json
import math

import numpy as np
import pytest

from rhlab.cli import main
from rhlab.config import RunConfig, load_config
from rhlab.errors import ConfigurationError

CUBE = """
[domain]
dimension = 3
extent = 1
h = 0.125

[rhi]
queries = 2:2

[calibration]
cn = 1.0
"""

COULOMB = """
[domain]
dimension = 3
extent = 4
origin = -2
h = 0.25

[potential]
kind = power_law
amplitude = -2
exponent = 1
center = 0, 0, 0

[mc]
alpha = 1
r = 2.5

[calibration]
bank_size = 4
nodes = 9
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def report(out):
    with open(out / "report.json") as fh:
        return json.load(fh)


def test_minimal_config(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", write(tmp_path, CUBE), "--out", str(out)]) == 0
    rep = report(out)
    assert rep["status"] == "ok"
    rows = rep["rhi"]["rows"]
    assert len(rows) == 1 and rows[0]["ratio"] == 1.0
    assert (out / "rhi.csv").read_text().count("\n") == 2
    assert (out / "eigen.csv").exists()


def test_malformed_config_writes_nothing(tmp_path):
    out = tmp_path / "out"
    bad = CUBE.replace("queries = 2:2", "queries = 2:1")
    assert main(["run", "--config", write(tmp_path, bad), "--out", str(out)]) == 2
    assert not out.exists()


@pytest.mark.parametrize("edit", [
    ("h = 0.125", "h = 0.3"),            # does not divide the extent
    ("[rhi]", "[rhi]\nbogus = 1"),       # unknown key
    ("[rhi]", "[nonsense]\n[rhi]"),      # unknown section
    ("dimension = 3", "dimension = x"),
])
def test_config_errors(tmp_path, edit):
    text = CUBE.replace(*edit)
    assert main(["solve", "--config", write(tmp_path, text), "--out", str(tmp_path / "o")]) == 2


def test_missing_config_file(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.ini")]) == 2


def test_config_round_trip(tmp_path):
    cfg = load_config(write(tmp_path, COULOMB))
    again = RunConfig.from_dict(cfg.to_dict())
    assert again == cfg
    assert cfg.queries[-1] == (3.0, math.inf)
    assert all(q >= p for p, q in cfg.queries)


def test_rerun_from_embedded_config(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", write(tmp_path, CUBE), "--out", str(a)]) == 0
    assert main(["run", "--config", str(a / "report.json"), "--out", str(b)]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_dump_matrix(tmp_path):
    out = tmp_path / "out"
    assert main(["solve", "--config", write(tmp_path, CUBE), "--out", str(out), "--dump-matrix"]) == 0
    head, *lines = (out / "matrix.coo").read_text().splitlines()
    m, n, nnz = (int(t) for t in head[1:].split())
    assert m == n == 343 and len(lines) == nnz
    row, col, val = lines[0].split()
    assert (row, col) == ("0", "0") and float(val) == 6 * 64


def test_calibrate_then_verify(tmp_path):
    out = tmp_path / "out"
    cfg = write(tmp_path, COULOMB)
    assert main(["fp-calibrate", "--config", cfg, "--out", str(out)]) == 0
    saved = json.loads((out / "calibration.json").read_text())
    for key in ("value", "r", "n", "bank_seed", "safety_factor"):
        assert key in saved
    assert main(["verify", "--config", cfg, "--out", str(out)]) == 0
    rep = report(out)
    assert rep["calibration"]["source"] == "calibration.json"
    assert rep["calibration"]["C_n"] == saved["value"] * saved["safety_factor"]
    assert rep["constants"]["C_n"] == rep["calibration"]["C_n"]
    assert rep["rhi"]["max_fitted_C"] > 0


def test_moser_p_below_two(tmp_path):
    out = tmp_path / "out"
    text = CUBE + "\n[moser]\np = 1\nlevels = 3\n"
    assert main(["moser", "--config", write(tmp_path, text), "--out", str(out)]) == 4
    err = report(out)["error"]
    assert err["stage"] == "hypothesis" and "max{p, 2}" in err["message"]


def test_solver_failure_exit_code(tmp_path):
    out = tmp_path / "out"
    text = CUBE + "\n[solver]\ntolerance = 1e-14\nmax_iterations = 1\n"
    assert main(["solve", "--config", write(tmp_path, text), "--out", str(out)]) == 3
    err = report(out)["error"]
    assert err["stage"] == "solver" and "residual" in err


def test_hypothesis_failure_exit_code(tmp_path):
    out = tmp_path / "out"
    text = CUBE + "\n[mc]\nalpha = 1\nr = 2\n"   # r = 2/alpha
    assert main(["verify", "--config", write(tmp_path, text), "--out", str(out)]) == 4


def test_coulomb_pipeline_matches_modules(tmp_path):
    from rhlab.eigensolver import SolverConfig, smallest_eigenpairs
    from rhlab.mesh import avoid_singularities, build_domain, build_grid
    from rhlab.operator import CoefficientField, assemble
    from rhlab.potentials import MCParams, PowerLaw, mc_norm, sample_potential

    out = tmp_path / "out"
    assert main(["run", "--config", write(tmp_path, COULOMB), "--out", str(out)]) == 0
    rep = report(out)
    V = PowerLaw(-2.0, 1.0, (0, 0, 0))
    g = avoid_singularities(build_grid(3, 4.0, 17, origin=-2.0), [V.center])
    m = build_domain(g)
    op = assemble(g, m, CoefficientField.identity(3), sample_potential(V, g, m))
    lam = smallest_eigenpairs(op, 1, SolverConfig())[0].lam
    assert rep["eigen"][0]["lambda"] == lam
    assert rep["mc"]["value"] == mc_norm(V, MCParams(1.0, 2.5), g, m).value
    assert rep["mc"]["value"] == pytest.approx(rep["mc"]["analytic"], rel=0.05)


def test_determinism_and_workers(tmp_path):
    cfg = write(tmp_path, COULOMB)
    runs = []
    for name, workers in (("a", 1), ("b", 1), ("c", 3)):
        out = tmp_path / name
        assert main(["run", "--config", cfg, "--out", str(out), "--workers", str(workers)]) == 0
        runs.append(out)
    for fname in ("report.json", "rhi.csv", "eigen.csv", "calibration.json"):
        assert (runs[0] / fname).read_bytes() == (runs[1] / fname).read_bytes()
    a, c = report(runs[0]), report(runs[2])
    for x, y in zip(a["rhi"]["rows"], c["rhi"]["rows"]):
        assert y["fitted_C"] == pytest.approx(x["fitted_C"], rel=1e-12)


def test_payne_rayner_command(tmp_path):
    out = tmp_path / "out"
    text = "[domain]\ndimension = 2\nh = 0.25\n[payne_rayner]\nshape = disk\nh = 0.03125\n"
    assert main(["payne-rayner", "--config", write(tmp_path, text), "--out", str(out)]) == 0
    rec = report(out)["payne_rayner"]
    assert abs(rec["gap"]) < 0.02


def test_workers_must_be_positive(tmp_path):
    assert main(["solve", "--config", write(tmp_path, CUBE), "--workers", "0"]) == 2
