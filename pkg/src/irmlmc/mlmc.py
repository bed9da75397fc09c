"""Multilevel Monte Carlo over nested irregular grids.

Level 0 averages f over single paths of the resolution-1 scheme; level
l >= 1 averages f(fine) - f(coarse) over coupled pairs whose coarse grid has
resolution m^(l-1) and whose fine grid is its m-fold refinement.  Every
(replication, level) pair owns one random stream; all paths of that level
are drawn from it, so distinct paths never share increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .engine import aggregate, draw_increments, euler, single_terminals
from .grid import build_coarse, nested
from .model import SdeModel, ThetaSpec
from .seeding import SeedSpec, run_ordered


class MlmcError(ValueError):
    pass


def weights_constant(L: int) -> np.ndarray:
    return np.ones(L + 1)


def weights_harmonic(L: int) -> np.ndarray:
    """a_0 = 1, a_l = 1/l."""
    a = np.ones(L + 1)
    a[1:] = 1.0 / np.arange(1, L + 1)
    return a


WEIGHTS: dict[str, Callable[[int], np.ndarray]] = {
    "constant": weights_constant,
    "harmonic": weights_harmonic,
}

# payoff name -> (f, grad f), both vectorized over (batch, d)
PAYOFFS = {
    "identity": (lambda x: x[..., 0], lambda x: np.broadcast_to(np.eye(x.shape[-1])[0], x.shape).copy()),
    "square": (lambda x: x[..., 0] ** 2, lambda x: np.concatenate([2 * x[..., :1], np.zeros_like(x[..., 1:])], axis=-1)),
}


def weight_ratios(a_name: str, p: float = 3.0, L_max: int = 40) -> tuple[np.ndarray, np.ndarray]:
    """Partial sums S_L = sum_{l=1}^L a_l and ratios S_L^{-p/2} sum a_l^{p/2}, L = 1..L_max."""
    a = WEIGHTS[a_name](L_max)[1:]
    sums = np.cumsum(a)
    return sums, np.cumsum(a ** (p / 2)) / sums ** (p / 2)


def levels_for(n: int, m: int) -> int:
    L = round(math.log(n) / math.log(m))
    if m**L != n:
        raise MlmcError(f"n={n} is not an integer power of m={m}")
    return L


@dataclass(frozen=True)
class MlmcConfig:
    n: int
    m: int
    alpha: float
    T: float
    a_seq: tuple
    payoff: Callable[[np.ndarray], np.ndarray]
    payoff_gradient: Callable[[np.ndarray], np.ndarray] | None = None
    # "uniform": N_0 from the level formula at l = 0 with n^(2 alpha);
    # "n_squared": N_0 = n^2 (m-1) T sum(a) / a_0 regardless of alpha
    level0_rule: str = "uniform"

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise MlmcError(f"m must be an integer >= 2, got {self.m}")
        if int(self.n) != self.n or self.n < 1:
            raise MlmcError(f"n must be a positive integer, got {self.n}")
        L = levels_for(int(self.n), int(self.m))
        if not 0.5 <= self.alpha <= 1.0:
            raise MlmcError(f"alpha must lie in [1/2, 1], got {self.alpha}")
        if not self.T > 0:
            raise MlmcError("T must be positive")
        if len(self.a_seq) != L + 1 or any(not a > 0 for a in self.a_seq):
            raise MlmcError(f"a_seq must hold {L + 1} positive weights")
        if self.level0_rule not in ("uniform", "n_squared"):
            raise MlmcError(f"unknown level0_rule {self.level0_rule!r}")

    @property
    def L(self) -> int:
        return levels_for(int(self.n), int(self.m))

    @classmethod
    def build(cls, n, m, alpha, T, a_name="constant", payoff="identity", level0_rule="uniform"):
        if a_name not in WEIGHTS:
            raise MlmcError(f"a_seq must be one of {sorted(WEIGHTS)}, got {a_name!r}")
        if payoff not in PAYOFFS:
            raise MlmcError(f"payoff must be one of {sorted(PAYOFFS)}, got {payoff!r}")
        L = levels_for(int(n), int(m))
        f, grad = PAYOFFS[payoff]
        return cls(int(n), int(m), float(alpha), float(T), tuple(WEIGHTS[a_name](L)), f, grad, level0_rule)


@dataclass
class LevelStat:
    level: int
    count: int
    mean: float
    variance: float


@dataclass
class MlmcEstimate:
    q_n: float
    per_level: list[LevelStat]
    scaled_error: float | None = None
    abort_count: int = 0
    extra: dict = field(default_factory=dict)


def _ceil(x: float) -> int:
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return int(r)
    return math.ceil(x)


def allocate_levels(cfg: MlmcConfig) -> list[int]:
    """Sample counts N_l = n^(2 alpha) (m-1) T sum_{l'>=1} a_l' / (m^l a_l), rounded up."""
    L = cfg.L
    total = float(sum(cfg.a_seq[1:]))
    base = cfg.n ** (2 * cfg.alpha) * (cfg.m - 1) * cfg.T * total
    counts = [_ceil(base / (cfg.m**l * cfg.a_seq[l])) for l in range(L + 1)]
    if cfg.level0_rule == "n_squared":
        counts[0] = _ceil(cfg.n**2 * (cfg.m - 1) * cfg.T * total / cfg.a_seq[0])
    if any(c < 1 for c in counts):
        raise MlmcError(f"allocation rounds to zero samples: {counts}")
    return counts


def shifted_mean(v: np.ndarray) -> float:
    """Mean computed about the first sample; exact for constant samples."""
    v0 = v[0]
    return float(v0 + np.mean(v - v0))


def _level_values(model, theta, cfg: MlmcConfig, level: int, count: int, rng):
    if level == 0:
        x = single_terminals(model, build_coarse(theta, 1, cfg.T), rng, count)
        return cfg.payoff(x), ~np.all(np.isfinite(x), axis=1)
    g = nested(theta, cfg.m ** (level - 1), cfg.m, cfg.T)
    dW = draw_increments(rng, g.fine.steps, model.q, count)
    xf = euler(model, g.fine.steps, dW)
    xc = euler(model, g.coarse.steps, aggregate(dW, g.m))
    with np.errstate(invalid="ignore", over="ignore"):
        vals = cfg.payoff(xf) - cfg.payoff(xc)
    bad = ~(np.all(np.isfinite(xf), axis=1) & np.all(np.isfinite(xc), axis=1))
    return vals, bad


def mlmc_estimate(model: SdeModel, theta: ThetaSpec, cfg: MlmcConfig, seed: SeedSpec,
                  reference: float | None = None, allow_aborts: bool = False) -> MlmcEstimate:
    counts = allocate_levels(cfg)
    per_level = []
    aborts = 0
    q = 0.0
    for level, count in enumerate(counts):
        vals, bad = _level_values(model, theta, cfg, level, count, seed.rng("mlmc", level))
        aborts += int(bad.sum())
        if bad.any():
            if not allow_aborts:
                raise MlmcError(f"{int(bad.sum())} aborted paths at level {level} (replication {seed})")
            vals = vals[~bad]
        mean = shifted_mean(vals)
        var = float(np.var(vals, ddof=1)) if len(vals) > 1 else 0.0
        per_level.append(LevelStat(level, count, mean, var))
        q = q + mean
    scaled = None if reference is None else cfg.n**cfg.alpha * (q - reference)
    return MlmcEstimate(q, per_level, scaled, aborts)


def _ensemble_one(model, theta, cfg, reference, master_seed, r):
    return mlmc_estimate(model, theta, cfg, SeedSpec(master_seed, r), reference).scaled_error


def clt_ensemble(model: SdeModel, theta: ThetaSpec, cfg: MlmcConfig, reference: float,
                 reps: int, master_seed: int, jobs: int = 1) -> np.ndarray:
    """Scaled errors n^alpha (Q_n - reference) of ``reps`` independent estimators."""
    fn = partial(_ensemble_one, model, theta, cfg, reference, master_seed)
    return np.array(run_ordered(fn, list(range(reps)), jobs))


def level_variances(model: SdeModel, theta: ThetaSpec, cfg: MlmcConfig, count: int,
                    master_seed: int) -> np.ndarray:
    """Empirical Var(f(X^{m^l}) - f(X^{m^{l-1}})) for l = 0..L with ``count`` paths each."""
    seed = SeedSpec(master_seed, 0)
    out = []
    for level in range(cfg.L + 1):
        vals, _ = _level_values(model, theta, cfg, level, count, seed.rng("mlmc", level))
        out.append(np.var(vals, ddof=1))
    return np.array(out)


def single_level(model: SdeModel, theta: ThetaSpec, n: int, T: float, payoff, count: int,
                 master_seed: int) -> tuple[float, float]:
    """Plain Monte Carlo mean of f(X^n_T) and its standard error (reference runs)."""
    vals = payoff(single_terminals(model, build_coarse(theta, n, T), SeedSpec(master_seed, 0).rng("mlmc", 10**6), count))
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(count))


def predicted_variance(cfg: MlmcConfig, level_vars: Sequence[float]) -> float:
    """n^(2 alpha) sum_l Var_l / N_l for the configured allocation."""
    counts = allocate_levels(cfg)
    return float(sum(cfg.n ** (2 * cfg.alpha) * v / c for v, c in zip(level_vars, counts)))
