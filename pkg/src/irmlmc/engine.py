"""Coupled coarse/fine Euler schemes driven by one Brownian path.

Brownian increments live on the fine grid only; the coarse scheme uses the
sums of the m fine increments inside each coarse interval.  The time
coordinate enters through the step length, never as a simulated increment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numpy as np

from .grid import NestedGrid, TimeGrid
from .model import SdeModel
from .seeding import SeedSpec, chunks, run_ordered


class SimulationAborted(RuntimeError):
    """A replication produced a nonfinite state."""


@dataclass(frozen=True)
class BrownianPath:
    grid: NestedGrid
    dW: np.ndarray  # (fine steps, q)

    def coarse_increments(self) -> np.ndarray:
        return aggregate(self.dW, self.grid.m)


@dataclass(frozen=True)
class CoupledPath:
    x_coarse: np.ndarray  # (coarse points, d)
    x_fine: np.ndarray  # (fine points, d)
    brownian: BrownianPath


def aggregate(dW: np.ndarray, m: int) -> np.ndarray:
    """Sum fine increments over each block of m consecutive steps (axis -2)."""
    shape = dW.shape[:-2] + (dW.shape[-2] // m, m, dW.shape[-1])
    return dW.reshape(shape).sum(axis=-2)


def draw_increments(rng: np.random.Generator, steps: np.ndarray, q: int, count: int | None = None):
    """Gaussian increments with variance ``steps[i]``; shape (count?, len(steps), q)."""
    shape = (len(steps), q) if count is None else (count, len(steps), q)
    return rng.standard_normal(shape) * np.sqrt(steps)[:, None]


def sample_brownian(grid: NestedGrid, q: int, seed: SeedSpec) -> BrownianPath:
    dW = draw_increments(seed.rng("W"), grid.fine.steps, q)
    return BrownianPath(grid, dW)


def euler(model: SdeModel, dt: np.ndarray, dW: np.ndarray, keep_path: bool = False):
    """Euler scheme over steps ``dt`` for a batch of increment arrays.

    ``dW`` has shape (batch, steps, q).  Returns the terminal states
    (batch, d), or the full paths (batch, steps + 1, d) when ``keep_path``.
    Rows that leave the finite range stay nonfinite; callers decide what to
    do with them.
    """
    batch = dW.shape[0]
    x = np.broadcast_to(model.x0, (batch, model.d)).copy()
    path = np.empty((batch, len(dt) + 1, model.d)) if keep_path else None
    if keep_path:
        path[:, 0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for i, h in enumerate(dt):
            x = x + model.drift(x) * h + np.einsum("bdq,bq->bd", model.diffusion(x), dW[:, i])
            if keep_path:
                path[:, i + 1] = x
    return path if keep_path else x


def euler_coupled(model: SdeModel, grid: NestedGrid, bp: BrownianPath) -> CoupledPath:
    if bp.dW.shape != (grid.fine.size, model.q):
        raise ValueError(f"increments have shape {bp.dW.shape}, expected ({grid.fine.size}, {model.q})")
    dW = bp.dW[None]
    xf = euler(model, grid.fine.steps, dW, keep_path=True)[0]
    xc = euler(model, grid.coarse.steps, aggregate(dW, grid.m), keep_path=True)[0]
    if not (np.all(np.isfinite(xf)) and np.all(np.isfinite(xc))):
        raise SimulationAborted(
            f"nonfinite state in coupled Euler path (n={grid.n}, m={grid.m}, model={model.name})"
        )
    return CoupledPath(xc, xf, bp)


def error_scale(n: int, m: int) -> float:
    return math.sqrt(m * n / (m - 1))


def error_stat(path: CoupledPath) -> np.ndarray:
    """sqrt(mn/(m-1)) * (fine - coarse) at the final time."""
    g = path.brownian.grid
    return error_scale(g.n, g.m) * (path.x_fine[-1] - path.x_coarse[-1])


def _coupled_chunk(model, grid, master_seed, reps):
    dW = np.stack([sample_brownian(grid, model.q, SeedSpec(master_seed, r)).dW for r in reps])
    xf = euler(model, grid.fine.steps, dW)
    xc = euler(model, grid.coarse.steps, aggregate(dW, grid.m))
    return xc, xf


def coupled_terminals(model: SdeModel, grid: NestedGrid, reps: int, master_seed: int, jobs: int = 1):
    """Terminal coarse/fine states for replications ``0..reps-1``.

    Replication r uses exactly the path ``sample_brownian(grid, q, SeedSpec(master_seed, r))``.
    Returns ``(x_coarse_T, x_fine_T, aborted)`` with ``aborted`` a boolean
    mask of replications that produced nonfinite values.
    """
    parts = run_ordered(partial(_coupled_chunk, model, grid, master_seed), chunks(0, reps), jobs)
    xc = np.concatenate([p[0] for p in parts])
    xf = np.concatenate([p[1] for p in parts])
    aborted = ~(np.all(np.isfinite(xc), axis=1) & np.all(np.isfinite(xf), axis=1))
    return xc, xf, aborted


def scaled_errors(model: SdeModel, grid: NestedGrid, reps: int, master_seed: int, jobs: int = 1,
                  allow_aborts: bool = False) -> np.ndarray:
    """Error statistics for ``reps`` replications, shape (reps, d)."""
    xc, xf, aborted = coupled_terminals(model, grid, reps, master_seed, jobs)
    if aborted.any() and not allow_aborts:
        raise SimulationAborted(f"{int(aborted.sum())} of {reps} replications produced nonfinite states")
    return error_scale(grid.n, grid.m) * (xf - xc)


def single_terminals(model: SdeModel, grid: TimeGrid, rng: np.random.Generator, count: int) -> np.ndarray:
    """Terminal states of ``count`` independent single-grid Euler paths."""
    return euler(model, grid.steps, draw_increments(rng, grid.steps, model.q, count))
