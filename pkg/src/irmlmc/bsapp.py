"""Black-Scholes call value as a function of (stock, bank account) and the
two-level hedging-error experiment."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .config import DEFAULT
from .engine import coupled_terminals, error_scale
from .grid import nested
from .limit import limit_samples
from .model import SdeModel, ThetaSpec, make_bs2d
from .stats import DistReport, compare_samples


@dataclass(frozen=True)
class BsParams:
    mu: float
    r: float
    vol: float
    strike: float
    T: float
    x1_0: float = 100.0
    x2_0: float = 1.0

    def __post_init__(self):
        if not self.vol > 0:
            raise ValueError(f"vol must be positive, got {self.vol}")
        if not self.strike > 0:
            raise ValueError(f"strike must be positive, got {self.strike}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")

    def model(self) -> SdeModel:
        return make_bs2d(self.mu, self.r, self.vol, self.x1_0, self.x2_0)


def norm_cdf(x):
    """Standard normal CDF via the Cephes ``ndtr`` (erf/erfc based, ~1e-16 absolute)."""
    out = ndtr(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def norm_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2 * math.pi)


def _d_pm(p: BsParams, t: float, x1):
    if not t < p.T:
        raise ValueError(f"t={t} must be before maturity T={p.T}")
    tau = p.T - t
    sd = p.vol * math.sqrt(tau)
    base = np.log(np.asarray(x1, dtype=float) / p.strike)
    return (base + (p.r + 0.5 * p.vol**2) * tau) / sd, (base + (p.r - 0.5 * p.vol**2) * tau) / sd, sd


def call_value(p: BsParams, t: float, x1, x2):
    """f(x1, x2) = Phi(d+) x1 - K e^{-rT} x2 Phi(d-).

    With x2_t = e^{rt} this is the Black-Scholes price at time t.
    """
    dp, dm, _ = _d_pm(p, t, x1)
    disc = p.strike * math.exp(-p.r * p.T)
    return norm_cdf(dp) * x1 - disc * np.asarray(x2, dtype=float) * norm_cdf(dm)


def call_gradient(p: BsParams, t: float, x1, x2) -> np.ndarray:
    """(df/dx1, df/dx2); the pdf terms cancel only on x2 = e^{rt}, so they are kept."""
    dp, dm, sd = _d_pm(p, t, x1)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    disc = p.strike * math.exp(-p.r * p.T)
    dd = 1.0 / (x1 * sd)
    g1 = norm_cdf(dp) + norm_pdf(dp) * dd * x1 - disc * x2 * norm_pdf(dm) * dd
    g2 = -disc * norm_cdf(dm) * np.ones_like(x2)
    return np.stack([g1, g2], axis=-1)


def hedging_error_experiment(p: BsParams, theta: ThetaSpec, n: int, m: int, t_eval: float, reps: int,
                             steps: int, master_seed: int, jobs: int = 1, tol=DEFAULT) -> DistReport:
    """sqrt(mn/(m-1)) (f(X^{nm}_t) - f(X^n_t)) against <grad f(X_t), U_t>.

    Both schemes and the limit are run on [0, t_eval]; the value function
    keeps maturity ``p.T``.
    """
    if not 0 < t_eval < p.T:
        raise ValueError("t_eval must lie in (0, T)")
    model = p.model()
    g = nested(theta, n, m, t_eval)
    xc, xf, aborted = coupled_terminals(model, g, reps, master_seed, jobs)
    if aborted.any():
        raise RuntimeError(f"{int(aborted.sum())} replications aborted")
    err = error_scale(g.n, g.m) * (call_value(p, t_eval, xf[:, 0], xf[:, 1]) - call_value(p, t_eval, xc[:, 0], xc[:, 1]))
    x, _, u, lab = limit_samples(model, theta, t_eval, steps, reps, master_seed, jobs, tol)
    if lab.any():
        raise RuntimeError(f"{int(lab.sum())} limit replications aborted")
    proj = np.einsum("bd,bd->b", call_gradient(p, t_eval, x[:, 0], x[:, 1]), u)
    rep = compare_samples(err, proj, tol, (tol.hedge_ratio_lo, tol.hedge_ratio_hi))
    rep.extra["error_samples"] = err
    rep.extra["limit_samples"] = proj
    return rep
