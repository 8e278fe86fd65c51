import csv
import json
import math

import numpy as np
import pytest

from mptp.action import action_report
from mptp.cli import main, read_path_csv, write_path_csv
from mptp.model import Path, make_potential

OU_DOC = {"potential": {"id": "ou", "params": {"theta": 2.0, "mu": 1.0}},
          "x0": [0.0], "xl": [2.0], "l": 3.0, "sigma": 1.0, "dt": 1e-4,
          "method": "linear_bridge"}


def write_config(tmp_path, doc, name="cfg.json"):
    f = tmp_path / name
    f.write_text(json.dumps(doc))
    return str(f)


def run(args, capsys=None):
    code = main([str(a) for a in args])
    err = capsys.readouterr().err if capsys else ""
    return code, err


def load(f):
    return json.loads(f.read_text())


def test_solve_ou(tmp_path):
    cfg = write_config(tmp_path, OU_DOC)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "lb")]) == 0
    path = read_path_csv(tmp_path / "lb" / "path.csv")
    assert path.times[-1] == pytest.approx(3.0, abs=1e-12)
    assert abs(path.values[-1, 0] - 2.0) <= 1e-3
    summary = load(tmp_path / "lb" / "summary.json")
    assert summary["method"] == "linear_bridge"
    assert set(summary["actions"]) >= {"om", "fw_half", "fw_paper_discrete"}

    assert main(["solve", "--config", cfg, "--method", "el_shooting",
                 "--out", str(tmp_path / "el")]) == 0
    other = read_path_csv(tmp_path / "el" / "path.csv")
    assert np.max(np.abs(other.values - path.values)) <= 1e-3
    assert load(tmp_path / "el" / "summary.json")["iterations"] >= 1


def test_solve_free_constant(tmp_path):
    cfg = write_config(tmp_path, {"potential": "free", "x0": [0.5, 1.0], "xl": [0.5, 1.0],
                                  "l": 1.0, "dt": 0.01})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 0
    path = read_path_csv(tmp_path / "path.csv")
    assert np.all(path.values == [0.5, 1.0])
    acts = load(tmp_path / "summary.json")["actions"]
    assert acts["fw_half"] == 0.0 and acts["om"] == 0.0


def test_csv_round_trip_matches_summary(tmp_path):
    doc = dict(OU_DOC, potential={"id": "double_well"}, x0=[-1.0], xl=[1.0], l=2.0,
               dt=1e-3, method="appr2")
    cfg = write_config(tmp_path, doc)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert main(["action", "--config", cfg, "--out", str(tmp_path)]) == 0
    s = load(tmp_path / "summary.json")["actions"]
    a = load(tmp_path / "action.json")["actions"]
    for key in ("om", "fw_half", "fw_paper_discrete"):
        assert abs(s[key] - a[key]) <= 1e-12
    with open(tmp_path / "path.csv") as fh:
        header = next(csv.reader(fh))
    assert header == ["t", "psi_1"]


def test_write_read_path_exact(tmp_path):
    rng = np.random.default_rng(0)
    p = Path(0.0, 0.1, rng.normal(size=(11, 3)))
    write_path_csv(p, tmp_path / "p.csv")
    q = read_path_csv(tmp_path / "p.csv")
    assert np.array_equal(p.values, q.values)
    pot = make_potential("free", dim=3)
    assert action_report(q, pot, 1.0).fw_half == pytest.approx(action_report(p, pot, 1.0).fw_half,
                                                               abs=1e-12)


def test_reruns_are_byte_identical(tmp_path):
    doc = dict(OU_DOC, dt=1e-3)
    cfg = write_config(tmp_path, doc)
    blobs = []
    for _ in range(2):
        assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 0
        blobs.append(((tmp_path / "path.csv").read_bytes(),
                      (tmp_path / "summary.json").read_bytes()))
    assert blobs[0] == blobs[1]


def test_overrides(tmp_path):
    cfg = write_config(tmp_path, dict(OU_DOC, dt=1e-3))
    assert main(["solve", "--config", cfg, "--set", "potential.params.theta=1.5",
                 "--set", "l=2", "--out", str(tmp_path)]) == 0
    prob = load(tmp_path / "summary.json")["problem"]
    assert prob["potential"]["params"]["theta"] == 1.5 and prob["l"] == 2.0


@pytest.mark.parametrize("doc, field", [
    ({"potential": "morse", "x0": 0, "xl": 1, "l": 1}, None),
    (dict(OU_DOC, l=-1.0), "l"),
    (dict(OU_DOC, method="ou_analytic", potential={"id": "double_well"}), "method"),
])
def test_config_errors_exit_1(tmp_path, capsys, doc, field):
    cfg = write_config(tmp_path, doc)
    code, err = run(["solve", "--config", cfg, "--out", tmp_path], capsys)
    assert code == 1
    msg = json.loads(err.strip().splitlines()[-1])
    assert msg["exit_code"] == 1
    if field:
        assert msg["field"] == field


def test_unreadable_config(tmp_path, capsys):
    code, _ = run(["solve", "--config", tmp_path / "missing.json", "--out", tmp_path], capsys)
    assert code == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    code, err = run(["solve", "--config", bad, "--out", tmp_path], capsys)
    assert code == 1 and json.loads(err)["field"] == "<document>"


def test_nonconvergence_exit_2(tmp_path, capsys):
    # the forward flow explodes long before l for a large initial gap
    doc = {"potential": "double_well", "x0": [-1.0], "xl": [50.0], "l": 40.0,
           "dt": 0.01, "method": "el_shooting"}
    code, err = run(["solve", "--config", write_config(tmp_path, doc), "--out", tmp_path], capsys)
    assert code == 2
    msg = json.loads(err.strip().splitlines()[-1])
    assert msg["error"] == "Nonconvergence" and "reason" in msg


def test_mc_verify_low_power_exit_3(tmp_path, capsys):
    code, err = run(["mc-verify", "--n", 10, "--substeps", 5, "--out", tmp_path], capsys)
    assert code == 3
    assert json.loads(err)["error"] == "StatisticalPowerError"


def test_mc_verify_rejects_nonlinear(tmp_path, capsys):
    cfg = write_config(tmp_path, {"potential": "double_well", "x0": 0, "xl": 1, "l": 1})
    code, _ = run(["mc-verify", "--config", cfg, "--out", tmp_path], capsys)
    assert code == 1


def test_mc_verify_deterministic(tmp_path):
    args = ["mc-verify", "--n", 4000, "--delta", 0.4, "--substeps", 10, "--seed", 5]
    blobs = []
    for name in ("a", "b"):
        assert main([str(a) for a in args] + ["--out", str(tmp_path / name)]) == 0
        blobs.append((tmp_path / name / "mc_report.json").read_bytes())
    assert blobs[0] == blobs[1]
    rep = json.loads(blobs[0])
    assert rep["params"]["seed"] == 5 and len(rep["checks"]) == 2


def _density_rows(out):
    with open(out / "density.csv") as fh:
        rows = list(csv.DictReader(fh))
    return rows


def test_density(tmp_path):
    doc = {"potential": {"id": "ou", "params": {"theta": 2.0, "mu": 0.0}},
           "x0": [1.0], "xl": [0.5], "l": 2.0}
    cfg = write_config(tmp_path, doc)
    assert run(["density", "--config", cfg, "--nt", 4, "--nx", 2001, "--out", tmp_path])[0] == 0
    rows = _density_rows(tmp_path)
    t1 = [r for r in rows if float(r["t"]) == 1.0]
    xs = np.array([float(r["x"]) for r in t1])
    dens = np.array([float(r["transition_density"]) for r in t1])
    assert abs(np.trapezoid(dens, xs) - 1.0) <= 1e-6
    # a = 0: symmetric about the mean exp(-theta t) x0
    mean = math.exp(-2.0)
    assert np.allclose(xs - mean, -(xs - mean)[::-1], atol=1e-12)
    assert np.allclose(dens, dens[::-1], rtol=1e-9)
    bridge = np.array([float(r["bridge_density"]) for r in t1])
    assert abs(np.trapezoid(bridge, xs) - 1.0) <= 1e-3
    summary = load(tmp_path / "density_summary.json")
    assert len(summary["slices"]) == 3
    for r in rows:
        for v in r.values():
            assert v == "" or math.isfinite(float(v))


def test_density_bridge_variance_vanishes(tmp_path):
    doc = {"potential": {"id": "ou", "params": {"theta": 2.0, "mu": 1.0}},
           "x0": [0.0], "xl": [2.0], "l": 2.0}
    cfg = write_config(tmp_path, doc)
    assert run(["density", "--config", cfg, "--nt", 200, "--nx", 11, "--out", tmp_path])[0] == 0
    v = np.array([s["bridge_variance"] for s in load(tmp_path / "density_summary.json")["slices"]])
    late = v[len(v) // 2:]
    assert np.all(np.diff(late) < 0)
    assert v[-1] < 0.011 and v[-1] / v.max() < 0.05


def test_density_unsupported(tmp_path, capsys):
    cfg = write_config(tmp_path, {"potential": "double_well", "x0": 0, "xl": 1, "l": 1})
    code, err = run(["density", "--config", cfg, "--out", tmp_path], capsys)
    assert code == 1 and json.loads(err)["error"] == "UnsupportedPotential"
