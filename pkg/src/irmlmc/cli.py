"""Command-line entry point.

    irmlmc grid      --n 8 --m 2
    irmlmc simulate  --config run.json --reps 1000
    irmlmc limit     --reps 10000
    irmlmc mlmc      --config mlmc.json
    irmlmc verify    cross_qv --n 4096 --m 2
    irmlmc bs        --strike 100 --vol 0.2 --reps 10000

Configs and reports are JSON, bulk samples are CSV.  A report holds every
statistic next to the threshold that judges it; the exit status is 0 iff
all checks pass.  Report content is a pure function of the configuration
(the ``created`` timestamp aside) and never depends on ``--jobs``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bsapp import BsParams, call_gradient, call_value, hedging_error_experiment
from .config import DEFAULT, Tolerances
from .engine import SimulationAborted, coupled_terminals, error_scale
from .grid import GridError, build_coarse, nested, refine
from .limit import SingularZError, gbm_error_variance, limit_samples, limit_variance
from .mlmc import PAYOFFS, WEIGHTS, MlmcConfig, MlmcError, allocate_levels, clt_ensemble, mlmc_estimate, single_level
from .model import ModelError, model_from_spec, theta_from_spec
from .seeding import SeedSpec, default_jobs
from .stats import check_cross_qv, check_lemma3, check_psi_limit, jarque_bera, match_error_to_limit, stderr_of_mean, theta_integral

OUT_ENV = "IRMLMC_OUT"
COMMANDS = ("grid", "simulate", "limit", "mlmc", "verify", "bs")
CHECKS = ("psi", "cross_qv", "lemma3", "match", "clt")

BASE = {
    "model": {"name": "gbm", "mu": 0.05, "sigma": 0.2, "x0": 1.0},
    "theta": {"name": "rate", "c": 1.0},
    "T": 1.0,
    "n": 256,
    "m": 2,
    "alpha": 0.5,
    "reps": 10000,
    "steps": 512,
    "seed": 20240601,
    "a_seq": "constant",
    "payoff": "identity",
    "level0_rule": "uniform",
    "allow_aborts": False,
    "tolerances": {},
}

DEFAULTS = {
    "grid": {"n": 8},
    "simulate": {"reps": 1000},
    "limit": {"reps": 10000},
    "mlmc": {"n": 64, "reps": 200, "limit_reps": 100000},
    "verify:psi": {"p": 2, "ns": [256, 1024, 4096], "reps": 100},
    "verify:cross_qv": {"n": 4096, "reps": 100},
    "verify:lemma3": {"n": 1024, "reps": 2000},
    "verify:match": {"n": 256, "reps": 10000},
    "verify:clt": {"n": 64, "reps": 200, "limit_reps": 100000},
    "bs": {
        "model": None,
        "n": 256,
        "reps": 10000,
        "bs": {"mu": 0.05, "r": 0.05, "vol": 0.2, "strike": 100.0, "T": 1.0, "x1_0": 100.0, "x2_0": 1.0},
        "t_eval": 0.5,
    },
}


class ConfigError(ValueError):
    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


@dataclass
class RunConfig:
    command: str
    check: str | None
    params: dict
    out: Path
    jobs: int
    tolerances: Tolerances = field(default_factory=lambda: DEFAULT)

    @property
    def key(self) -> str:
        return self.command if self.check is None else f"{self.command}:{self.check}"


# ------------------------------------------------------------------ config

def _positive_int(params, name, minimum=1):
    v = params.get(name)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v or v < minimum:
        raise ConfigError(name, f"must be an integer >= {minimum}, got {v!r}")
    params[name] = int(v)


def _positive_real(params, name):
    v = params.get(name)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
        raise ConfigError(name, f"must be a positive real, got {v!r}")
    params[name] = float(v)


def build_config(command: str, check: str | None, file_cfg: dict, flags: dict) -> RunConfig:
    if command not in COMMANDS:
        raise ConfigError("command", f"unknown subcommand {command!r}")
    if command == "verify" and check not in CHECKS:
        raise ConfigError("check", f"must be one of {', '.join(CHECKS)}, got {check!r}")
    key = command if check is None else f"{command}:{check}"
    params = json.loads(json.dumps(BASE))
    params.update(json.loads(json.dumps(DEFAULTS.get(key, {}))))
    unknown = sorted(set(file_cfg) - set(params) - {"p", "ns", "t_eval", "limit_reps", "bs", "out", "jobs", "check", "m_values"})
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration field")
    params.update({k: v for k, v in file_cfg.items() if k not in ("out", "jobs", "check")})
    params.update({k: v for k, v in flags.items() if v is not None and k not in ("out", "jobs")})

    for name in ("n", "m", "reps", "steps"):
        _positive_int(params, name, 2 if name in ("m", "steps") else 1)
    _positive_real(params, "T")
    seed = params["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed", f"must be an unsigned 64-bit integer, got {seed!r}")
    if not 0.5 <= float(params["alpha"]) <= 1.0:
        raise ConfigError("alpha", "must lie in [1/2, 1]")
    if params["a_seq"] not in WEIGHTS:
        raise ConfigError("a_seq", f"must be one of {sorted(WEIGHTS)}")
    if params["payoff"] not in PAYOFFS:
        raise ConfigError("payoff", f"must be one of {sorted(PAYOFFS)}")
    if params["level0_rule"] not in ("uniform", "n_squared"):
        raise ConfigError("level0_rule", "must be 'uniform' or 'n_squared'")
    if params.get("model") is not None:
        try:
            model_from_spec(params["model"])
        except ModelError as exc:
            raise ConfigError("model", str(exc)) from None
    try:
        theta = theta_from_spec(params["theta"])
        theta.check(params["T"])
    except ModelError as exc:
        raise ConfigError("theta", str(exc)) from None
    if "p" in params and params["p"] not in (1, 2):
        raise ConfigError("p", "must be 1 or 2")
    if "ns" in params:
        if not params["ns"] or any(isinstance(v, bool) or not isinstance(v, int) or v < 1 for v in params["ns"]):
            raise ConfigError("ns", "must be a nonempty list of positive integers")
    if "limit_reps" in params:
        _positive_int(params, "limit_reps", 2)
    if key == "bs":
        try:
            BsParams(**params["bs"])
        except (TypeError, ValueError) as exc:
            raise ConfigError("bs", str(exc)) from None
        if not 0 < params["t_eval"] < params["bs"]["T"]:
            raise ConfigError("t_eval", "must lie in (0, T)")
    try:
        tol = DEFAULT.override(**params.get("tolerances", {}))
    except ValueError as exc:
        raise ConfigError("tolerances", str(exc)) from None

    jobs = next((v for v in (flags.get("jobs"), file_cfg.get("jobs")) if v is not None), default_jobs())
    if isinstance(jobs, bool) or not isinstance(jobs, int) or jobs < 1:
        raise ConfigError("jobs", "must be a positive integer")
    out = flags.get("out") or file_cfg.get("out") or os.environ.get(OUT_ENV) or "irmlmc-out"
    return RunConfig(command, check, params, Path(out), int(jobs), tol)


# ------------------------------------------------------------------ output

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


class Report:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.results: dict = {}
        self.checks: list[dict] = []
        self.artifacts: list[str] = []

    def check(self, name, value, threshold, passed, **extra):
        self.checks.append({"name": name, "value": value, "threshold": threshold, "pass": bool(passed), **extra})

    def csv(self, name, header, rows):
        write_csv(self.cfg.out / name, header, rows)
        self.artifacts.append(name)

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def document(self) -> dict:
        return {
            "command": self.cfg.command,
            "check": self.cfg.check,
            "config": self.cfg.params,
            "tolerances": self.cfg.tolerances.as_dict(),
            "version": __version__,
            "results": self.results,
            "checks": self.checks,
            "artifacts": self.artifacts,
            "pass": self.passed,
        }

    def write(self) -> Path:
        doc = _jsonable(self.document())
        doc["created"] = datetime.now(timezone.utc).isoformat()
        name = self.cfg.command if self.cfg.check is None else f"{self.cfg.command}_{self.cfg.check}"
        path = self.cfg.out / f"{name}_report.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="ascii")
        return path


# ------------------------------------------------------------------ commands

def _objects(p):
    return model_from_spec(p["model"]), theta_from_spec(p["theta"])


def _cmd_grid(cfg: RunConfig, rep: Report):
    p = cfg.params
    _, theta = _objects(p)
    coarse = build_coarse(theta, p["n"], p["T"])
    g = refine(coarse, theta, p["m"])

    def rows(pts):
        steps = np.concatenate([[0.0], np.diff(pts)])
        return [(i, t, s) for i, (t, s) in enumerate(zip(pts, steps))]

    rep.csv("grid_coarse.csv", ["index", "time", "step"], rows(coarse.points))
    rep.csv("grid_fine.csv", ["index", "time", "step"], rows(g.fine.points))
    rep.results = {
        "coarse_points": coarse.size + 1,
        "fine_points": g.fine.size + 1,
        "max_coarse_step": float(coarse.steps.max()),
        "max_fine_step": float(g.fine.steps.max()),
        "step_bound": theta.inv_bound / p["n"],
    }
    rep.check("coarse_step_bound", float(coarse.steps.max()), theta.inv_bound / p["n"] * (1 + 1e-9),
              coarse.steps.max() <= theta.inv_bound / p["n"] * (1 + 1e-9))


def _cmd_simulate(cfg: RunConfig, rep: Report):
    p = cfg.params
    model, theta = _objects(p)
    g = nested(theta, p["n"], p["m"], p["T"])
    xc, xf, aborted = coupled_terminals(model, g, p["reps"], p["seed"], cfg.jobs)
    err = error_scale(g.n, g.m) * (xf - xc)
    rows = [(r, c, xc[r, c], xf[r, c], err[r, c]) for r in range(p["reps"]) for c in range(model.d)]
    rep.csv("simulate.csv", ["rep", "component", "x_coarse_T", "x_fine_T", "scaled_error"], rows)
    ok = ~aborted
    rep.results = {
        "abort_count": int(aborted.sum()),
        "aborted_reps": np.flatnonzero(aborted).tolist(),
        "error_mean": err[ok].mean(axis=0),
        "error_var": err[ok].var(axis=0, ddof=1),
    }
    rep.check("abort_count", int(aborted.sum()), 0, p["allow_aborts"] or not aborted.any())


def _cmd_limit(cfg: RunConfig, rep: Report):
    p = cfg.params
    model, theta = _objects(p)
    x, _, u, aborted = limit_samples(model, theta, p["T"], p["steps"], p["reps"], p["seed"], cfg.jobs, cfg.tolerances)
    rep.csv("limit_u.csv", ["rep", "component", "x_T", "u_T"],
            [(r, c, x[r, c], u[r, c]) for r in range(p["reps"]) for c in range(model.d)])
    ok = ~aborted
    rep.results = {"abort_count": int(aborted.sum()), "u_mean": u[ok].mean(axis=0), "u_var": u[ok].var(axis=0, ddof=1)}
    rep.check("abort_count", int(aborted.sum()), 0, p["allow_aborts"] or not aborted.any())
    for c in range(model.d):
        se = stderr_of_mean(u[ok, c])
        rep.check(f"u_mean_centered[{c}]", float(u[ok, c].mean()), cfg.tolerances.mean_z * se,
                  abs(u[ok, c].mean()) <= cfg.tolerances.mean_z * se or se == 0)


def _reference(model, theta, p):
    """Analytic E f(X_T) where known, else a single-level run with 16x resolution."""
    mp = model.params
    if model.name == "gbm" and p["payoff"] == "identity":
        return mp["x0"] * math.exp(mp["mu"] * p["T"]), 0.0, "analytic"
    if model.name == "gbm" and p["payoff"] == "square":
        return mp["x0"] ** 2 * math.exp((2 * mp["mu"] + mp["sigma"] ** 2) * p["T"]), 0.0, "analytic"
    f, _ = PAYOFFS[p["payoff"]]
    val, se = single_level(model, theta, 16 * p["n"], p["T"], f, 200_000, p["seed"])
    return val, se, "single-level n_ref=16n"


def _clt(cfg: RunConfig, rep: Report, write_levels: bool):
    p = cfg.params
    tol = cfg.tolerances
    model, theta = _objects(p)
    try:
        mcfg = MlmcConfig.build(p["n"], p["m"], p["alpha"], p["T"], p["a_seq"], p["payoff"], p["level0_rule"])
    except MlmcError as exc:
        raise ConfigError("n", str(exc)) from None
    ref, ref_se, ref_kind = _reference(model, theta, p)
    est = mlmc_estimate(model, theta, mcfg, SeedSpec(p["seed"], 0), ref, p["allow_aborts"])
    ens = clt_ensemble(model, theta, mcfg, ref, p["reps"], p["seed"], cfg.jobs)
    lv, lv_se = limit_variance(model, theta, p["T"], mcfg.payoff_gradient, p["limit_reps"], p["steps"], p["seed"], cfg.jobs, tol)
    if write_levels:
        rep.csv("mlmc_levels.csv", ["level", "count", "mean", "variance"],
                [(s.level, s.count, s.mean, s.variance) for s in est.per_level])
    rep.csv("mlmc_scaled_errors.csv", ["rep", "scaled_error"], list(enumerate(ens)))
    var = float(np.var(ens, ddof=1))
    se = stderr_of_mean(ens)
    jb = jarque_bera(ens) if len(ens) >= 20 else None
    rep.results = {
        "q_n": est.q_n,
        "allocation": allocate_levels(mcfg),
        "per_level": [vars(s) for s in est.per_level],
        "scaled_error": est.scaled_error,
        "abort_count": est.abort_count,
        "reference": ref,
        "reference_stderr": ref_se,
        "reference_kind": ref_kind,
        "ensemble_mean": float(np.mean(ens)),
        "ensemble_stderr": se,
        "ensemble_variance": var,
        "limit_variance": lv,
        "limit_variance_stderr": lv_se,
        "jarque_bera": jb,
    }
    if jb is not None:
        rep.check("jarque_bera", jb, tol.jb_critical, jb < tol.jb_critical)
    rep.check("variance_rel_error", abs(var / lv - 1), tol.clt_var_rel, abs(var / lv - 1) <= tol.clt_var_rel)
    rep.check("mean_centered", float(np.mean(ens)), tol.mean_z * se, abs(np.mean(ens)) <= tol.mean_z * se)


def _cmd_mlmc(cfg: RunConfig, rep: Report):
    _clt(cfg, rep, write_levels=True)


def _verify_psi(cfg: RunConfig, rep: Report):
    p = cfg.params
    tol = cfg.tolerances
    _, theta = _objects(p)
    stats = [check_psi_limit(theta, n, p["T"], p["p"], p["seed"], p["reps"], jobs=cfg.jobs) for n in p["ns"]]
    medians = [s.median_sup_error for s in stats]
    rep.results = {
        "ns": p["ns"],
        "mean_sup_error": [s.mean_sup_error for s in stats],
        "median_sup_error": medians,
        "t_grid": stats[-1].t_grid,
        "empirical": stats[-1].empirical,
        "target": stats[-1].target,
    }
    rep.csv("psi_sup_errors.csv", ["n", "rep", "sup_error"],
            [(s.n, r, v) for s in stats for r, v in enumerate(s.per_rep_sup)])
    last = stats[-1].mean_sup_error
    rep.check("mean_sup_error", last, tol.psi_sup_max, last < tol.psi_sup_max, n=p["ns"][-1])
    mono = all(b <= a for a, b in zip(medians, medians[1:]))
    rep.check("median_non_increasing", medians, "non-increasing", mono)


def _verify_cross_qv(cfg: RunConfig, rep: Report):
    p = cfg.params
    tol = cfg.tolerances
    _, theta = _objects(p)
    ms = p.get("m_values") or [p["m"]]
    rep.results = {"runs": []}
    for m in ms:
        s = check_cross_qv(theta, p["n"], m, p["T"], p["seed"], p["reps"], jobs=cfg.jobs)
        emp, tgt = float(s.empirical[-1]), float(s.target[-1])
        rep.results["runs"].append({"m": m, "empirical_T": emp, "target_T": tgt, "sup_error": s.sup_error,
                                    "t_grid": s.t_grid, "empirical": s.empirical, "target": s.target})
        rep.csv(f"cross_qv_m{m}.csv", ["rep", "value_T"], list(enumerate(s.terminal)))
        rel = abs(emp / tgt - 1)
        rep.check(f"relative_error_m{m}", rel, tol.cross_qv_rel, rel <= tol.cross_qv_rel, target=tgt, empirical=emp)


def _verify_lemma3(cfg: RunConfig, rep: Report):
    p = cfg.params
    tol = cfg.tolerances
    _, theta = _objects(p)
    d = check_lemma3(theta, p["n"], p["T"], p["seed"], p["reps"], jobs=cfg.jobs, tol=tol)
    samples = d.extra.pop("terminal_samples")
    rep.results = d.to_dict()
    rep.csv("lemma3_terminal.csv", ["rep", "value"], list(enumerate(samples)))
    ex = d.extra
    rep.check("drift_integral_sup", ex["mean_sup_drift_integral"], ex["sup_bound"], d.flags["drift_integral_small"])
    rel = abs(ex["variance_ratio"] - 1)
    rep.check("variance_rel_error", rel, tol.error_var_rel, rel <= tol.error_var_rel, target=ex["target_variance"])
    rep.check("jarque_bera", d.jb_statistic, tol.jb_critical, d.flags["gaussian"])


def _verify_match(cfg: RunConfig, rep: Report):
    p = cfg.params
    tol = cfg.tolerances
    model, theta = _objects(p)
    d = match_error_to_limit(model, theta, p["T"], p["n"], p["m"], p["reps"], p["steps"], p["seed"], jobs=cfg.jobs, tol=tol)
    err = d.extra.pop("error_samples")
    lim = d.extra.pop("limit_samples")
    rep.results = d.to_dict()
    rep.csv("match_samples.csv", ["rep", "scaled_error", "u_T"], [(i, a, b) for i, (a, b) in enumerate(zip(err, lim))])
    rep.check("ks_statistic", d.ks_statistic, tol.ks_max, d.ks_statistic < tol.ks_max)
    ratio = d.extra["variance_ratio"]
    rep.check("variance_ratio", ratio, [1 - tol.error_var_rel, 1 + tol.error_var_rel], d.flags["variance_ratio_in_band"])
    rep.check("error_mean_centered", d.moments[0]["mean"], tol.mean_z * d.extra["stderr_mean"][0], d.flags["mean_a_centered"])
    rep.check("limit_mean_centered", d.moments[1]["mean"], tol.mean_z * d.extra["stderr_mean"][1], d.flags["mean_b_centered"])
    if model.name == "gbm":
        mp = model.params
        cf = gbm_error_variance(mp["mu"], mp["sigma"], mp["x0"], p["T"], theta_integral(theta, p["T"], 1.0))
        rel = abs(d.moments[0]["var"] / cf - 1)
        rep.results["closed_form_variance"] = cf
        rep.check("error_variance_vs_closed_form", rel, tol.error_var_rel, rel <= tol.error_var_rel, closed_form=cf)


def _cmd_verify(cfg: RunConfig, rep: Report):
    {"psi": _verify_psi, "cross_qv": _verify_cross_qv, "lemma3": _verify_lemma3,
     "match": _verify_match, "clt": lambda c, r: _clt(c, r, write_levels=False)}[cfg.check](cfg, rep)


def _cmd_bs(cfg: RunConfig, rep: Report):
    p = cfg.params
    tol = cfg.tolerances
    bp = BsParams(**p["bs"])
    theta = theta_from_spec(p["theta"])
    d = hedging_error_experiment(bp, theta, p["n"], p["m"], p["t_eval"], p["reps"], p["steps"], p["seed"], cfg.jobs, tol)
    err = d.extra.pop("error_samples")
    lim = d.extra.pop("limit_samples")
    rep.csv("bs_samples.csv", ["rep", "hedging_error", "limit_projection"], [(i, a, b) for i, (a, b) in enumerate(zip(err, lim))])
    rep.results = d.to_dict()
    rep.results["call_value_t0"] = float(call_value(bp, 0.0, bp.x1_0, bp.x2_0))
    rep.results["call_gradient_t0"] = call_gradient(bp, 0.0, bp.x1_0, bp.x2_0)
    ratio = d.extra["variance_ratio"]
    rep.check("variance_ratio", ratio, [tol.hedge_ratio_lo, tol.hedge_ratio_hi], d.flags["variance_ratio_in_band"])
    rep.check("error_mean_centered", d.moments[0]["mean"], tol.mean_z * d.extra["stderr_mean"][0], d.flags["mean_a_centered"])
    rep.check("limit_mean_centered", d.moments[1]["mean"], tol.mean_z * d.extra["stderr_mean"][1], d.flags["mean_b_centered"])


HANDLERS = {"grid": _cmd_grid, "simulate": _cmd_simulate, "limit": _cmd_limit,
            "mlmc": _cmd_mlmc, "verify": _cmd_verify, "bs": _cmd_bs}


def run(cfg: RunConfig) -> tuple[int, Report]:
    rep = Report(cfg)
    HANDLERS[cfg.command](cfg, rep)
    return (0 if rep.passed else 1), rep


# ------------------------------------------------------------------ argv

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--reps", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--m", type=int)
    common.add_argument("--T", type=float)
    common.add_argument("--steps", type=int, help="auxiliary steps for the limit process")
    common.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or ./irmlmc-out)")
    common.add_argument("--jobs", type=int, help="worker threads; never changes results")

    ap = argparse.ArgumentParser(prog="irmlmc", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"irmlmc {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="{" + ",".join(COMMANDS) + "}")
    for name in ("grid", "simulate", "limit", "mlmc"):
        sub.add_parser(name, parents=[common])
    v = sub.add_parser("verify", parents=[common])
    v.add_argument("check", choices=CHECKS)
    b = sub.add_parser("bs", parents=[common])
    for flag in ("mu", "r", "vol", "strike", "x1", "x2", "t-eval"):
        b.add_argument(f"--{flag}", type=float)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    file_cfg = {}
    if args.config is not None:
        try:
            file_cfg = json.loads(args.config.read_text())
        except OSError as exc:
            print(f"irmlmc: cannot read config {args.config}: {exc.strerror}", file=sys.stderr)
            return 2
        except json.JSONDecodeError as exc:
            print(f"irmlmc: config {args.config} is not valid JSON: {exc}", file=sys.stderr)
            return 2
        if not isinstance(file_cfg, dict):
            print(f"irmlmc: config {args.config} must hold a JSON object", file=sys.stderr)
            return 2
    flags = {k: getattr(args, k, None) for k in ("seed", "reps", "n", "m", "T", "steps", "out", "jobs")}
    if args.command == "bs":
        bs = dict(DEFAULTS["bs"]["bs"])
        bs.update(file_cfg.get("bs", {}))
        for flag, key in (("mu", "mu"), ("r", "r"), ("vol", "vol"), ("strike", "strike"), ("x1", "x1_0"), ("x2", "x2_0")):
            if getattr(args, flag) is not None:
                bs[key] = getattr(args, flag)
        if args.T is not None:
            bs["T"] = args.T
            flags["T"] = None
        flags["bs"] = bs
        flags["t_eval"] = args.t_eval
    try:
        cfg = build_config(args.command, getattr(args, "check", None), file_cfg, flags)
        status, rep = run(cfg)
        path = rep.write()
    except ConfigError as exc:
        print(f"irmlmc: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except (GridError, ModelError, MlmcError) as exc:
        print(f"irmlmc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (SimulationAborted, SingularZError) as exc:
        print(f"irmlmc: simulation aborted: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"irmlmc: I/O error at {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 3
    for c in rep.checks:
        print(f"{'PASS' if c['pass'] else 'FAIL'}  {c['name']}: {c['value']} (threshold {c['threshold']})")
    print(f"report: {path}")
    return status


if __name__ == "__main__":
    sys.exit(main())
