"""Empirical checks of the quadratic-variation and error-limit results.

Stable convergence is only tested through its unconditional consequence:
error samples and limit samples should share a distribution.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import partial

import numpy as np
from scipy import integrate, stats as sps

from .config import DEFAULT
from .engine import scaled_errors
from .grid import build_coarse, nested
from .limit import limit_samples
from .model import SdeModel, ThetaSpec
from .seeding import SeedSpec, chunks, run_ordered


@dataclass
class QvStatistic:
    n: int
    t_grid: np.ndarray
    empirical: np.ndarray  # replication average of the running functional
    target: np.ndarray
    sup_error: float  # max |empirical - target| over t_grid
    per_rep_sup: np.ndarray = field(default_factory=lambda: np.empty(0))
    terminal: np.ndarray = field(default_factory=lambda: np.empty(0))  # per-rep value at T

    @property
    def mean_sup_error(self) -> float:
        return float(np.mean(self.per_rep_sup))

    @property
    def median_sup_error(self) -> float:
        return float(np.median(self.per_rep_sup))


@dataclass
class DistReport:
    sizes: list
    moments: list  # per sample: mean, var, skew, kurtosis
    ks_statistic: float | None
    jb_statistic: float | None
    flags: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def two_sample_ks(a, b) -> float:
    """sup_x |F_a(x) - F_b(x)| for the empirical distribution functions."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    x = np.concatenate([a, b])
    fa = np.searchsorted(a, x, side="right") / a.size
    fb = np.searchsorted(b, x, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_critical(na: int, nb: int, tol=DEFAULT) -> float:
    return tol.ks_c_alpha * math.sqrt((na + nb) / (na * nb))


def moments(x) -> dict:
    """Sample mean and unbiased variance, plus population skewness and kurtosis."""
    x = np.asarray(x, dtype=float)
    c = x - x.mean()
    m2 = float(np.mean(c**2))
    if m2 == 0.0:
        skew, kurt = 0.0, float("nan")
    else:
        skew = float(np.mean(c**3) / m2**1.5)
        kurt = float(np.mean(c**4) / m2**2)
    var = float(c @ c / (len(x) - 1)) if len(x) > 1 else 0.0
    return {"mean": float(x.mean()), "var": var, "skew": skew, "kurtosis": kurt}


def jarque_bera(samples) -> float:
    x = np.asarray(samples, dtype=float)
    if x.size < 20:
        raise ValueError("Jarque-Bera needs at least 20 samples")
    mo = moments(x)
    return x.size / 6.0 * (mo["skew"] ** 2 + (mo["kurtosis"] - 3.0) ** 2 / 4.0)


def stderr_of_mean(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.std(x, ddof=1) / math.sqrt(x.size))


def theta_integral(theta: ThetaSpec, t: float, power: float) -> float:
    """int_0^t theta(s)^(-power) ds by adaptive quadrature."""
    if t == 0:
        return 0.0
    val, _ = integrate.quad(lambda s: float(theta.theta(s)) ** (-power), 0.0, t, epsabs=1e-13, epsrel=1e-12)
    return val


def eval_times(T: float, count: int = 16) -> np.ndarray:
    return T * np.arange(1, count + 1) / count


# ---------------------------------------------------------------- psi limit

def _psi_one(grid, p, sub, t_grid, master_seed, r):
    rng = SeedSpec(master_seed, r).rng("psi")
    K = grid.size
    h = grid.steps
    frac = np.arange(sub + 1) / sub
    local_t = grid.points[:-1, None] + h[:, None] * frac  # (K, sub+1)
    inc = rng.standard_normal((K, sub)) * np.sqrt(h / sub)[:, None]
    dev = np.concatenate([np.zeros((K, 1)), np.cumsum(inc, axis=1)], axis=1)  # W_s - W_tau_k
    psi = grid.n ** (p / 2) * dev**p
    per_int = (0.5 * (psi[:, 1:] + psi[:, :-1]) * (h / sub)[:, None])
    cum = np.concatenate([[0.0], np.cumsum(per_int.ravel())])
    times = np.concatenate([[0.0], local_t[:, 1:].ravel()])
    return np.interp(t_grid, times, cum)


def check_psi_limit(theta: ThetaSpec, n: int, T: float, p: int, master_seed: int, reps: int,
                    sub: int = 32, n_eval: int = 16, jobs: int = 1) -> QvStatistic:
    """Compare int_0^t n^{p/2} (W_s - W_{eta(s)})^p ds with a_p int_0^t theta^{-p/2}."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    grid = build_coarse(theta, n, T)
    t_grid = eval_times(T, n_eval)
    a_p = 0.0 if p == 1 else 0.5
    target = np.array([a_p * theta_integral(theta, t, p / 2) for t in t_grid])
    fn = partial(_psi_one, grid, p, sub, t_grid, master_seed)
    runs = np.array(run_ordered(fn, list(range(reps)), jobs))
    emp = runs.mean(axis=0)
    return QvStatistic(n, t_grid, emp, target, float(np.max(np.abs(emp - target))),
                       np.max(np.abs(runs - target), axis=1), runs[:, -1])


# ---------------------------------------------------------------- cross QV

def _cross_qv_chunk(g, t_grid, master_seed, reps):
    out = []
    hf = g.fine.steps
    for r in reps:
        rng = SeedSpec(master_seed, r).rng("cross-qv")
        dW = rng.standard_normal(hf.size) * np.sqrt(hf)
        blocks = np.cumsum(dW.reshape(-1, g.m), axis=1)
        # W_{eta_nm(s)} - W_{eta_n(s)} is 0 on the first fine step of each block
        dev = np.concatenate([np.zeros((blocks.shape[0], 1)), blocks[:, :-1]], axis=1).ravel()
        cum = np.concatenate([[0.0], np.cumsum(g.n * dev**2 * hf)])
        out.append(np.interp(t_grid, g.fine.points, cum))
    return out


def check_cross_qv(theta: ThetaSpec, n: int, m: int, T: float, master_seed: int, reps: int,
                   n_eval: int = 16, jobs: int = 1) -> QvStatistic:
    """n int_0^t (W_{eta_nm(s)} - W_{eta_n(s)})^2 ds against (m-1)/(2m) int_0^t 1/theta."""
    g = nested(theta, n, m, T)
    t_grid = eval_times(T, n_eval)
    target = np.array([(m - 1) / (2 * m) * theta_integral(theta, t, 1.0) for t in t_grid])
    parts = run_ordered(partial(_cross_qv_chunk, g, t_grid, master_seed), chunks(0, reps, 16), jobs)
    runs = np.array([row for part in parts for row in part])
    emp = runs.mean(axis=0)
    return QvStatistic(n, t_grid, emp, target, float(np.max(np.abs(emp - target))),
                       np.max(np.abs(runs - target), axis=1), runs[:, -1])


# ---------------------------------------------------------------- drift and Ito integrals

def _lemma3_one(grid, sub, master_seed, r):
    rng = SeedSpec(master_seed, r).rng("lemma3")
    K = grid.size
    h = grid.steps
    dt = (h / sub)[:, None]
    inc = rng.standard_normal((K, sub)) * np.sqrt(dt)
    lag = dt * np.arange(sub)  # s - eta(s) at the left end of each sub-step
    drift_int = np.cumsum((lag * inc).ravel())
    sup_a = math.sqrt(grid.n) * float(np.max(np.abs(drift_int)))
    dWk = inc.sum(axis=1)
    # int_{tau_k}^{tau_k+1} (W_s - W_tau_k) dW_s = ((dW_k)^2 - h_k) / 2
    terminal = math.sqrt(grid.n) * float(np.sum(0.5 * (dWk**2 - h)))
    return sup_a, terminal


def check_lemma3(theta: ThetaSpec, n: int, T: float, master_seed: int, reps: int,
                 sub: int = 32, jobs: int = 1, tol=DEFAULT) -> DistReport:
    grid = build_coarse(theta, n, T)
    res = np.array(run_ordered(partial(_lemma3_one, grid, sub, master_seed), list(range(reps)), jobs))
    sups, term = res[:, 0], res[:, 1]
    target_var = theta_integral(theta, T, 1.0) / 2.0
    bound = 3.0 * theta.inv_bound * T / math.sqrt(n)
    mo = moments(term)
    jb = jarque_bera(term) if reps >= 20 else None
    ks = float(sps.kstest(term, "norm", args=(0.0, math.sqrt(target_var))).statistic)
    return DistReport(
        sizes=[reps],
        moments=[mo],
        ks_statistic=ks,
        jb_statistic=jb,
        flags={
            "drift_integral_small": bool(np.mean(sups) < bound),
            "gaussian": bool(jb is not None and jb < tol.jb_critical),
        },
        extra={
            "mean_sup_drift_integral": float(np.mean(sups)),
            "sup_bound": bound,
            "target_variance": target_var,
            "variance_ratio": mo["var"] / target_var,
            "terminal_samples": term,
        },
    )


# ---------------------------------------------------------------- error vs limit

def compare_samples(a, b, tol=DEFAULT, ratio_band: tuple[float, float] | None = None) -> DistReport:
    """Moment, variance-ratio and two-sample KS comparison of two 1-d samples."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ma, mb = moments(a), moments(b)
    ks = two_sample_ks(a, b)
    ratio = ma["var"] / mb["var"] if mb["var"] > 0 else float("nan")
    crit = ks_critical(a.size, b.size, tol)
    flags = {
        "ks_below_critical": bool(ks < crit),
        "mean_a_centered": bool(abs(ma["mean"]) <= tol.mean_z * stderr_of_mean(a) or ma["var"] == 0),
        "mean_b_centered": bool(abs(mb["mean"]) <= tol.mean_z * stderr_of_mean(b) or mb["var"] == 0),
    }
    if ratio_band is not None:
        flags["variance_ratio_in_band"] = bool(ratio_band[0] <= ratio <= ratio_band[1])
    jb = jarque_bera(a) if a.size >= 20 and ma["var"] > 0 else None
    return DistReport(
        sizes=[int(a.size), int(b.size)],
        moments=[ma, mb],
        ks_statistic=ks,
        jb_statistic=jb,
        flags=flags,
        extra={
            "variance_ratio": ratio,
            "ks_critical": crit,
            "moment_differences": {k: ma[k] - mb[k] for k in ma},
            "stderr_mean": [stderr_of_mean(a), stderr_of_mean(b)],
        },
    )


def match_error_to_limit(model: SdeModel, theta: ThetaSpec, T: float, n: int, m: int, reps: int,
                         steps: int, master_seed: int, functional=None, limit_reps: int | None = None,
                         jobs: int = 1, tol=DEFAULT) -> DistReport:
    """Scaled two-level errors against simulated U_T, projected on ``functional`` (default e_0)."""
    if functional is None:
        functional = np.eye(model.d)[0]
    functional = np.asarray(functional, dtype=float)
    g = nested(theta, n, m, T)
    err = scaled_errors(model, g, reps, master_seed, jobs) @ functional
    # limit draws use the limit-W/limit-B domains, so they are independent of the error paths
    _, _, u, aborted = limit_samples(model, theta, T, steps, limit_reps or reps, master_seed, jobs, tol)
    if aborted.any():
        raise RuntimeError(f"{int(aborted.sum())} limit replications aborted")
    rep = compare_samples(err, u @ functional, tol, (1 - tol.error_var_rel, 1 + tol.error_var_rel))
    rep.extra["error_samples"] = err
    rep.extra["limit_samples"] = u @ functional
    return rep
