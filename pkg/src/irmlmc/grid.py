"""Irregular coarse grids and their nested m-fold refinements."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT
from .model import ThetaSpec


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    points: np.ndarray
    n: int
    T: float

    def __post_init__(self):
        self.points.setflags(write=False)

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def size(self) -> int:
        """Number of intervals."""
        return len(self.points) - 1


@dataclass(frozen=True)
class NestedGrid:
    coarse: TimeGrid
    fine: TimeGrid
    m: int
    parent_index: np.ndarray

    @property
    def n(self) -> int:
        return self.coarse.n


def _check_step(h: float, t: float) -> float:
    if not (math.isfinite(h) and h > 0):
        raise GridError(f"theta produced a nonpositive or nonfinite step {h!r} at t={t!r}")
    return h


def build_coarse(theta: ThetaSpec, n: int, T: float, tol=DEFAULT) -> TimeGrid:
    """Grid ``tau_{k+1} = tau_k + 1/(n theta(tau_k))`` on [0, T], closed at T.

    The recursion runs until the next point would pass T; T is then appended,
    so the last step may be shorter than the recursion step.  A point that
    lands within ``grid_snap`` relative distance of T is taken to be T.
    """
    if int(n) != n or n < 1:
        raise GridError(f"n must be a positive integer, got {n!r}")
    if not T > 0:
        raise GridError(f"T must be positive, got {T!r}")
    n = int(n)
    T = float(T)
    if theta.constant is not None:
        h = _check_step(float(theta.inverse(0.0)) / n, 0.0)
        full = int(math.floor(T / h + tol.grid_snap))
        k = np.arange(full + 1, dtype=float)
        pts = k * h
        if T - pts[-1] <= tol.grid_snap * h:
            pts[-1] = T
        else:
            pts = np.append(pts, T)
        return TimeGrid(pts, n, T)

    pts = [0.0]
    t = 0.0
    while True:
        h = _check_step(float(theta.inverse(t)) / n, t)
        nxt = t + h
        if nxt >= T - tol.grid_snap * h:
            pts.append(T)
            break
        pts.append(nxt)
        t = nxt
    return TimeGrid(np.array(pts), n, T)


def refine(coarse: TimeGrid, theta: ThetaSpec, m: int) -> NestedGrid:
    """Split every coarse interval into exactly m fine steps.

    Inside ``[tau_k, tau_{k+1}]`` the first m-1 points follow
    ``t_{j+1} = t_j + 1/(n m theta(t_j))`` and the m-th is pinned to the
    coarse right endpoint.  When the recursion reaches the endpoint too early
    the m recursion steps are rescaled to fill the interval exactly.
    """
    if int(m) != m or m < 2:
        raise GridError(f"m must be an integer >= 2, got {m!r}")
    m = int(m)
    nm = coarse.n * m
    cp = coarse.points
    K = coarse.size
    fine = np.empty(K * m + 1)
    fine[::m] = cp

    const_h = None
    if theta.constant is not None:
        const_h = _check_step(float(theta.inverse(0.0)) / nm, 0.0)

    for k in range(K):
        a, b = cp[k], cp[k + 1]
        if const_h is not None:
            raw = np.full(m, const_h)
            inner = (k * m + np.arange(1, m)) * const_h
        else:
            raw = np.empty(m)
            t = a
            for j in range(m):
                raw[j] = _check_step(float(theta.inverse(t)) / nm, t)
                t = t + raw[j]
            inner = a + np.cumsum(raw[:-1])
        if inner[-1] >= b:
            inner = a + np.cumsum(raw[:-1] * ((b - a) / raw.sum()))
            if np.any(np.diff(np.concatenate(([a], inner, [b]))) <= 0):
                raise GridError(f"nonpositive fine step in coarse interval {k} = [{a}, {b}]")
        fine[k * m + 1 : (k + 1) * m] = inner

    if np.any(np.diff(fine) <= 0):
        raise GridError("fine grid is not strictly increasing")
    parent = np.minimum(np.arange(K * m + 1) // m, K - 1)
    parent.setflags(write=False)
    return NestedGrid(coarse, TimeGrid(fine, nm, coarse.T), m, parent)


def eta(grid: TimeGrid, t):
    """Largest grid point <= t (intervals are left-closed; eta(T) = T)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > grid.T) or np.any(np.isnan(t_arr)):
        raise GridError(f"t out of range [0, {grid.T}]")
    idx = np.searchsorted(grid.points, t_arr, side="right") - 1
    out = grid.points[idx]
    return float(out) if np.ndim(out) == 0 else out


def nested(theta: ThetaSpec, n: int, m: int, T: float) -> NestedGrid:
    return refine(build_coarse(theta, n, T), theta, m)
