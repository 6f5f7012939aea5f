import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np
import pytest

from diradopt import cli
from diradopt.adoption import corner_threshold, entry_threshold, optimal_intensity
from diradopt.autarky import solve_autarky

SCENARIOS = Path(__file__).resolve().parents[1] / "demos" / "scenarios"

CANONICAL = {
    "worker": {"theta": [1.0, 1.0], "s": [1.0, 1.0], "sigma": 2.0, "gamma": 1.0, "budget": 1.0},
    "technologies": [{"t": [0.8, 0.6], "chi": 1.0167}],
    "sweeps": {"chi": {"min": 0.5, "max": 2.2, "steps": 200, "technology": 0}},
    "monte_carlo": {"samples": 5000, "seed": 7},
}


def write(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(tmp_path, verb, data, *extra, out="out"):
    scenario = write(tmp_path, data)
    return cli.run([verb, "--scenario", scenario, "--out", str(tmp_path / out), *extra])


def test_solve_writes_autarky_row(tmp_path):
    assert run(tmp_path, "solve", CANONICAL) == 0
    rows = read_csv(tmp_path / "out" / "autarky.csv")
    assert len(rows) == 1
    aut = solve_autarky(cli.parse_scenario(CANONICAL).worker)
    assert float(rows[0]["x_A_1"]) == aut.x_A[0]
    assert float(rows[0]["p_A_2"]) == aut.p_A[1]
    assert float(rows[0]["phi"]) == pytest.approx(2.0)
    assert float(rows[0]["Y_A"]) == aut.output
    assert float(rows[0]["rho"]) == aut.rho_A
    adoption = read_csv(tmp_path / "out" / "adoption.csv")
    assert adoption[0]["regime"] == "partial"


def test_sigma_one_is_rejected(tmp_path, capsys):
    bad = json.loads(json.dumps(CANONICAL))
    bad["worker"]["sigma"] = 1.0
    assert run(tmp_path, "solve", bad) == 2
    err = capsys.readouterr().err
    assert "worker.sigma" in err and "line" in err


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda d: d["worker"].update(gamma="fast"), "worker.gamma"),
        (lambda d: d["worker"].pop("theta"), "worker"),
        (lambda d: d["sweeps"]["chi"].update(steps=1), "sweeps.chi.steps"),
        (lambda d: d["sweeps"]["chi"].update(min=3.0), "sweeps.chi.max"),
        (lambda d: d["sweeps"]["chi"].update(technology=4), "sweeps.chi.technology"),
        (lambda d: d["technologies"][0].update(t=[0.8, 0.6, 0.1]), "technologies.0.t"),
        (lambda d: d.update(extra=1), "scenario"),
        (lambda d: d.update(outputs=["plot.png"]), "outputs.0"),
    ],
)
def test_schema_errors_name_the_field(tmp_path, capsys, mutate, field):
    bad = json.loads(json.dumps(CANONICAL))
    mutate(bad)
    assert run(tmp_path, "solve", bad) == 2
    assert f"{field}:" in capsys.readouterr().err


def test_malformed_json_reports_line(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "worker": {\n    "theta": [1, 1],,\n  }\n}\n')
    assert cli.run(["solve", "--scenario", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "line 3" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert cli.run(["solve", "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2


def test_bad_flags(tmp_path):
    assert run(tmp_path, "cone", CANONICAL, "--samples", "0") == 2
    assert run(tmp_path, "cone", CANONICAL, "--seed", "-1") == 2
    assert run(tmp_path, "solve", CANONICAL, "--tolerance", "nan") == 2
    assert cli.run(["explode"]) == 2


def test_solver_failure_exits_3(tmp_path, monkeypatch):
    def fail(*args, **kwargs):
        raise cli.ConvergenceError("stalled", residual=1.0)

    monkeypatch.setattr(cli, "optimal_intensity", fail)
    assert run(tmp_path, "solve", CANONICAL) == 3


def test_sweep_table(tmp_path):
    assert run(tmp_path, "sweep", CANONICAL) == 0
    rows = read_csv(tmp_path / "out" / "sweep.csv")
    assert len(rows) == 200
    assert list(rows[0]) == ["chi", "lambda_star", "output", "regime", "phi0", "in_cone"]
    chi = np.array([float(r["chi"]) for r in rows])
    assert np.all(np.diff(chi) > 0)


def test_intensity_regimes(tmp_path):
    assert run(tmp_path, "sweep", CANONICAL) == 0
    w = cli.parse_scenario(CANONICAL).worker
    t = np.array([0.8, 0.6])
    chi0, chi100 = entry_threshold(t, w), corner_threshold(t, w)
    for row in read_csv(tmp_path / "out" / "intensity.csv"):
        chi, lam = float(row["chi"]), float(row["lambda_star"])
        if chi < chi0:
            assert lam == 0.0
        elif chi > chi100:
            assert lam == 1.0
        else:
            assert 0.0 < lam < 1.0


def test_cone_tables(tmp_path):
    assert run(tmp_path, "cone", CANONICAL) == 0
    half = read_csv(tmp_path / "out" / "half_angle.csv")
    assert float(half[0]["phi0"]) == 0.0
    phi = np.array([float(r["phi0"]) for r in half])
    assert np.all(np.diff(phi) > 0)
    measure = np.array([float(r["measure"]) for r in read_csv(tmp_path / "out" / "measure.csv")])
    assert np.all((0 <= measure) & (measure <= 1)) and np.all(np.diff(measure) >= 0)


def test_curvature_table(tmp_path):
    data = json.loads((SCENARIOS / "curvature.json").read_text())
    assert run(tmp_path, "cone", data, "--samples", "1000") == 0
    rows = read_csv(tmp_path / "out" / "curvature.csv")
    assert len(rows) == 5
    assert float(rows[0]["gamma"]) + float(rows[0]["sigma"]) == pytest.approx(2.0)
    assert float(rows[-1]["gamma"]) + float(rows[-1]["sigma"]) == pytest.approx(32.0)


def test_multi_table(tmp_path):
    data = json.loads((SCENARIOS / "two_tools.json").read_text())
    assert run(tmp_path, "multi", data) == 0
    rows = {r["technology"]: r for r in read_csv(tmp_path / "out" / "multi.csv")}
    assert float(rows["1"]["share"]) > 1 - 1e-6
    entry = read_csv(tmp_path / "out" / "entry.csv")
    assert [r["adopt"] for r in entry] == ["true", "true"]


def test_byte_identical_reruns(tmp_path):
    for verb in ("solve", "sweep", "cone", "multi"):
        assert run(tmp_path, verb, CANONICAL, out="a") == 0
        assert run(tmp_path, verb, CANONICAL, out="b") == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_flag_changes_measure(tmp_path):
    assert run(tmp_path, "cone", CANONICAL, "--seed", "1", out="a") == 0
    assert run(tmp_path, "cone", CANONICAL, "--seed", "2", out="b") == 0
    a = (tmp_path / "a" / "measure.csv").read_bytes()
    b = (tmp_path / "b" / "measure.csv").read_bytes()
    assert a != b


def test_manifest_lists_every_file(tmp_path):
    assert run(tmp_path, "sweep", CANONICAL, "--tolerance", "1e-9") == 0
    manifest = json.loads((tmp_path / "out" / "manifest-sweep.json").read_text())
    assert set(manifest["files"]) == {"sweep.csv", "intensity.csv"}
    for name, digest in manifest["files"].items():
        assert hashlib.sha256((tmp_path / "out" / name).read_bytes()).hexdigest() == digest
    assert manifest["tolerances"]["lambda"] == 1e-9
    assert manifest["inputs_sha256"] == hashlib.sha256((tmp_path / "scenario.json").read_bytes()).hexdigest()


def test_outputs_filter(tmp_path):
    data = dict(CANONICAL, outputs=["autarky.csv"])
    assert run(tmp_path, "solve", data) == 0
    assert not (tmp_path / "out" / "adoption.csv").exists()


def test_non_unit_direction_is_normalised_with_warning(tmp_path, caplog):
    data = json.loads(json.dumps(CANONICAL))
    data["technologies"][0]["t"] = [4.0, 3.0]
    with caplog.at_level("WARNING", logger="diradopt"):
        sc = cli.parse_scenario(data)
    np.testing.assert_allclose(sc.technologies[0].t, [0.8, 0.6])
    assert "normalised" in caplog.text


def test_figure_data():
    tables = cli.figure_data(cli.parse_scenario(CANONICAL))
    assert set(tables) == {"half_angle.csv", "intensity.csv", "measure.csv"}
    assert tables["half_angle.csv"].rows[0][1] == 0.0
    assert math.isclose(tables["half_angle.csv"].rows[0][0], 1.0)


def test_csv_round_trips_doubles(tmp_path):
    assert run(tmp_path, "solve", CANONICAL) == 0
    value = float(read_csv(tmp_path / "out" / "adoption.csv")[0]["lambda_star"])
    sc = cli.parse_scenario(CANONICAL)
    assert value == optimal_intensity(sc.technologies[0], sc.worker).lambda_star
