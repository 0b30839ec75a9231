import json

import numpy as np
import pytest

from hetclaw.cli import expand_sweep, main, run, sweep
from hetclaw.config import config_from_dict
from hetclaw.errors import ConfigError
from hetclaw.output import read_snapshot, write_json


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_simulate_stationary_shock(tmp_path, capsys):
    code = main(["simulate", "--out", str(tmp_path / "o")])
    assert code == 0
    assert "PASS stationary_simple_shock" in capsys.readouterr().out
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["criteria"] == {"restricted_max_principle": True,
                                    "stationary_simple_shock": True}
    x, u, meta = read_snapshot(tmp_path / "o" / "snapshot_001")
    assert meta["time"] == 1.0 and np.all(u[x < -0.01] == 1.0) and np.all(u[x > 0.01] == 0.0)


def test_validate_flux_reports_positivity_failure(tmp_path):
    cfg = _write(tmp_path, "flux.family = gaussian_lwr\n")
    assert main(["validate-flux", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    rep = json.loads((tmp_path / "o" / "assumptions.json").read_text())
    assert not rep["checks"]["P"]["passed"] and rep["checks"]["S"]["passed"]


def test_emergence_small_grid(tmp_path):
    cfg = _write(tmp_path, "flux.family = convex_combination\ndata.kind = piecewise4\n"
                           "grid.domain = -3, 10\ngrid.n_cells = 1300\nhorizon = 12\n")
    main(["emergence", "--config", cfg, "--out", str(tmp_path / "o")])
    rep = json.loads((tmp_path / "o" / "emergence.json").read_text())
    assert rep["emerged"] and np.isfinite(rep["T_detected"])


def test_characteristics_and_negcheck(tmp_path):
    cfg = _write(tmp_path, "flux.family = convex_combination\n"
                           "characteristics.seeds = 0, 0.5, -0.5, 2\n")
    assert main(["characteristics", "--config", cfg, "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "trajectory_001.csv").exists()
    cfg = _write(tmp_path, "flux.family = negative_heterogeneity\n", "n.cfg")
    assert main(["negcheck", "--config", cfg, "--out", str(tmp_path / "n"),
                 "--n-cells", "2000", "--horizon", "0.2"]) == 0


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "none.cfg")]) == 2
    cfg = _write(tmp_path, "horizon = -1\n")
    assert main(["simulate", "--config", cfg]) == 2
    assert "horizon" in capsys.readouterr().err
    cfg = _write(tmp_path, "flux.family = convex_combination\n", "w.cfg")
    assert main(["negcheck", "--config", cfg]) == 2


def test_deterministic_outputs(tmp_path):
    cfg = _write(tmp_path, "flux.family = gaussian_lwr\ndata.kind = constant\n"
                           "data.value = 0.5\ngrid.domain = -6, 6\ngrid.n_cells = 300\n"
                           "horizon = 2\n")
    for name in ("a", "b"):
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / name)]) in (0, 1)
    for f in sorted((tmp_path / "a").iterdir()):
        other = (tmp_path / "b" / f.name).read_text()
        if f.name == "manifest.json":
            a, b = json.loads(f.read_text()), json.loads(other)
            for d in (a, b):
                d.pop("wall_clock")
                d["config"].pop("output_dir")
            assert a == b
        else:
            assert f.read_text() == other


def test_sweep_refinement_halves_error(tmp_path, capsys):
    cfg = _write(tmp_path, f"flux.family = homogeneous_quadratic\ngrid.domain = -2, 3\n"
                           f"horizon = 2\noutput_dir = {tmp_path / 'sw'}\n"
                           "sweep.grid.n_cells = 500, 1000, 2000, 4000\n")
    assert main(["sweep", "--config", cfg, "--workers", "2"]) == 0
    lines = (tmp_path / "sw" / "summary.csv").read_text().splitlines()
    header = lines[0].split(",")
    errs = [float(r.split(",")[header.index("l1_error")]) for r in lines[1:]]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.allclose(ratios, 2.0, rtol=0.1)
    assert capsys.readouterr().out.count("PASS") == 4


def test_sweep_isolates_failures(tmp_path):
    good = config_from_dict({"output_dir": str(tmp_path / "same"), "grid.n_cells": 100})
    dup = config_from_dict({"output_dir": str(tmp_path / "same"), "grid.n_cells": 200})
    bad = config_from_dict({"experiment": "negcheck", "output_dir": str(tmp_path / "x")})
    out = sweep([good, dup, bad], workers=1)
    assert out[0].passed
    assert out[1].status == "error" and "collides" in out[1].error
    assert out[2].status == "error" and "ConfigError" in out[2].error
    with pytest.raises(ConfigError):
        sweep([])


def test_expand_sweep_product(tmp_path):
    configs, axes = expand_sweep({"output_dir": str(tmp_path), "sweep.data.amplitude": [0.1, 0.2],
                                  "sweep.grid.n_cells": [100, 200, 400],
                                  "data.kind": "perturbed_phi"})
    assert len(configs) == 6 and axes == ["data.amplitude", "grid.n_cells"]
    assert len({c.output_dir for c in configs}) == 6


def test_run_writes_manifest_once(tmp_path):
    m = run(config_from_dict({"output_dir": str(tmp_path), "grid.n_cells": 100}))
    assert m.passed and (tmp_path / "manifest.json").exists()
    assert sorted(p.name for p in tmp_path.iterdir()).count("manifest.json") == 1


def test_json_writer_handles_numpy(tmp_path):
    path = write_json(tmp_path / "x.json", {"a": np.float64(0.1), "b": np.array([1, 2]),
                                            "c": float("nan"), "d": np.bool_(True)})
    assert json.loads(path.read_text()) == {"a": 0.1, "b": [1, 2], "c": "nan", "d": True}
