import csv
import json

import pytest

from irmlmc.cli import ConfigError, build_config, main


def _report(out, name):
    doc = json.loads((out / f"{name}_report.json").read_text())
    doc.pop("created")
    return doc


def _header(path):
    with open(path, newline="") as fh:
        return next(csv.reader(fh))


def test_grid(tmp_path):
    assert main(["grid", "--n", "4", "--m", "3", "--out", str(tmp_path)]) == 0
    assert _header(tmp_path / "grid_coarse.csv") == ["index", "time", "step"]
    rows = list(csv.reader(open(tmp_path / "grid_fine.csv")))
    assert len(rows) == 1 + 13 and float(rows[-1][1]) == 1.0


def test_simulate_and_limit(tmp_path):
    assert main(["simulate", "--n", "16", "--reps", "50", "--out", str(tmp_path)]) == 0
    assert _header(tmp_path / "simulate.csv") == ["rep", "component", "x_coarse_T", "x_fine_T", "scaled_error"]
    assert main(["limit", "--reps", "200", "--steps", "32", "--out", str(tmp_path)]) == 0
    assert _header(tmp_path / "limit_u.csv") == ["rep", "component", "x_T", "u_T"]
    assert _report(tmp_path, "limit")["results"]["abort_count"] == 0


def test_mlmc_small(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 8, "reps": 30, "limit_reps": 500, "steps": 32, "level0_rule": "n_squared"}))
    status = main(["mlmc", "--config", str(cfg), "--out", str(tmp_path)])
    assert status in (0, 1)
    rep = _report(tmp_path, "mlmc")
    assert rep["results"]["allocation"] == [192, 12, 6, 3]
    assert {c["name"] for c in rep["checks"]} == {"jarque_bera", "variance_rel_error", "mean_centered"}
    assert _header(tmp_path / "mlmc_levels.csv") == ["level", "count", "mean", "variance"]


@pytest.mark.parametrize("check,args", [
    ("psi", ["--reps", "5", "--config", None]),
    ("cross_qv", ["--n", "256", "--reps", "20"]),
    ("lemma3", ["--n", "64", "--reps", "200"]),
    ("match", ["--n", "32", "--reps", "500", "--steps", "32"]),
])
def test_verify_runs(tmp_path, check, args):
    if None in args:
        cfg = tmp_path / "psi.json"
        cfg.write_text(json.dumps({"ns": [16, 64]}))
        args = [a if a is not None else str(cfg) for a in args]
    status = main(["verify", check, *args, "--out", str(tmp_path)])
    rep = _report(tmp_path, f"verify_{check}")
    assert status == (0 if rep["pass"] else 1)
    assert rep["checks"] and all({"name", "value", "threshold", "pass"} <= set(c) for c in rep["checks"])


def test_bs_small(tmp_path):
    status = main(["bs", "--n", "32", "--reps", "500", "--steps", "32", "--out", str(tmp_path)])
    rep = _report(tmp_path, "bs")
    assert status == (0 if rep["pass"] else 1)
    assert abs(rep["results"]["call_value_t0"] - 10.450583572185566) < 1e-9
    assert _header(tmp_path / "bs_samples.csv") == ["rep", "hedging_error", "limit_projection"]


def test_unknown_command_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_invalid_fields_named(tmp_path, capsys):
    assert main(["simulate", "--seed", "-1", "--out", str(tmp_path)]) == 2
    assert "seed" in capsys.readouterr().err
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["grid", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "bogus" in capsys.readouterr().err
    assert main(["grid", "--config", str(tmp_path / "missing.json")]) == 2
    with pytest.raises(ConfigError) as exc:
        build_config("grid", None, {"theta": {"name": "affine", "a": 1.0, "b": -5.0}}, {})
    assert exc.value.field == "theta"
    with pytest.raises(ConfigError):
        build_config("bs", None, {"t_eval": 2.0}, {})


def test_mlmc_bad_power_exits_2(tmp_path):
    assert main(["mlmc", "--n", "6", "--reps", "2", "--out", str(tmp_path)]) == 2


def test_rerun_and_jobs_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    argv = ["verify", "match", "--n", "16", "--reps", "1500", "--steps", "16"]
    main([*argv, "--jobs", "1", "--out", str(a)])
    main([*argv, "--jobs", "8", "--out", str(b)])
    assert _report(a, "verify_match") == _report(b, "verify_match")
    assert (a / "match_samples.csv").read_bytes() == (b / "match_samples.csv").read_bytes()
    main([*argv, "--jobs", "1", "--out", str(b)])
    assert _report(a, "verify_match") == _report(b, "verify_match")


def test_out_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("IRMLMC_OUT", str(tmp_path / "env"))
    assert main(["grid", "--n", "2"]) == 0
    assert (tmp_path / "env" / "grid_report.json").exists()
