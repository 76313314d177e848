import csv
import io
import json
import math

import pytest

from wpsystole import __version__, cli
from wpsystole.series import RieraResult


def run(capsys, *argv):
    rc = cli.main(list(argv))
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_systole_bolza(capsys):
    rc, out, _ = run(capsys, "systole", "--surface", "bolza")
    assert rc == 0
    rec = json.loads(out)
    assert rec["systole"] == pytest.approx(2 * math.acosh(1 + math.sqrt(2)), abs=1e-9)
    prov = rec["provenance"]
    assert prov["tool"] == "wpsystole" and prov["version"] == __version__ and prov["schema"] == cli.SCHEMA_VERSION
    assert prov["seed"] == 0 and "samples" in prov["budgets"] and prov["config"]["surface"] == "bolza"
    assert "threads" not in prov["config"]


def test_systole_fn_and_cylinder(capsys):
    rc, out, _ = run(capsys, "systole", "--surface", "fn2", "--lengths", "0.1,2,2")
    assert rc == 0 and json.loads(out)["systole"] == pytest.approx(0.1, abs=1e-6)
    rc, out, _ = run(capsys, "systole", "--surface", "cylinder", "--length", "2")
    assert rc == 0 and json.loads(out)["systole"] == 2.0


def test_gradnorm_cylinder_csv(capsys, tmp_path):
    rc, out, _ = run(capsys, "gradnorm", "--surface", "cylinder", "--length", "1", "--p", "1,2,4,inf",
                     "--format", "csv", "--out", str(tmp_path))
    assert rc == 0
    rows = {r["p"]: r for r in csv.DictReader(io.StringIO(out))}
    assert float(rows["1.0"]["value"]) == pytest.approx(2.0, rel=1e-6)
    assert float(rows["2.0"]["integral"]) == pytest.approx(2 / math.pi, rel=1e-6)
    assert float(rows["4.0"]["integral"]) == pytest.approx(5 / math.pi ** 3, rel=1e-6)
    assert float(rows["inf"]["value"]) == pytest.approx(2 / math.pi, rel=1e-6)
    rec = json.loads((tmp_path / "gradnorm.json").read_text())
    assert rec["riera_check"]["passed"] and (tmp_path / "gradnorm.csv").read_text() == out


def test_riera_command(capsys):
    rc, out, _ = run(capsys, "riera", "--surface", "fn2", "--lengths", "1,1,1", "--riera-u", "300")
    rec = json.loads(out)
    assert rc == 0 and rec["riera"]["value"] > rec["lower_bound"]
    assert rec["provenance"]["budgets"]["riera_u"] == 300.0


def test_bad_surface_and_curve(capsys):
    assert run(capsys, "systole", "--surface", "torus")[0] == 2
    assert run(capsys, "riera", "--surface", "bolza", "--curve", "nosuch")[0] == 2
    assert run(capsys, "systole", "--surface", "fn2", "--lengths", "1,-1,1")[0] == 2
    assert run(capsys, "gradnorm", "--samples", "0")[0] == 2


def test_budget_exit(capsys):
    # a ball too small to hold the Dirichlet domain
    rc, _, err = run(capsys, "gradnorm", "--surface", "bolza", "--p", "2", "--domain", "dirichlet",
                     "--ball-radius", "1", "--samples", "5000")
    assert rc == 3 and "budget" in err


def test_riera_discrepancy_exit(capsys, monkeypatch):
    import wpsystole.series as series

    real = series.riera

    def off(*a, **k):
        r = real(*a, **k)
        return RieraResult(**{**r.__dict__, "value": 1.5 * r.value})

    monkeypatch.setattr(series, "riera", off)
    rc, out, _ = run(capsys, "gradnorm", "--surface", "bolza", "--p", "2", "--samples", "20000")
    assert rc == 4 and not json.loads(out)["riera_check"]["passed"]


def test_surface_file_precedence(capsys, tmp_path):
    f = tmp_path / "s.txt"
    f.write_text("kind = fn2\nlengths = 0.5, 2, 2\nseed = 7\n")
    rc, out, _ = run(capsys, "systole", "--surface", str(f))
    rec = json.loads(out)
    assert rc == 0 and rec["systole"] == pytest.approx(0.5, abs=1e-6) and rec["provenance"]["seed"] == 7
    rc, out, _ = run(capsys, "systole", "--surface", str(f), "--lengths", "0.3,2,2", "--seed", "1")
    rec = json.loads(out)
    assert rec["systole"] == pytest.approx(0.3, abs=1e-6) and rec["provenance"]["seed"] == 1


def test_resolve_defaults():
    ns = cli.build_parser().parse_args(["strata", "--p", "2,4,inf", "--family-grid", "0.1:1:3"])
    cfg = cli.resolve_config(ns)
    assert cfg.exponents == (2.0, 4.0, math.inf) and cfg.family_grid == "0.1:1:3"
    assert cfg.to_json()["exponents"] == ["2", "4", "inf"]
