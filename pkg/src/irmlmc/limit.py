"""Simulation of the asymptotic two-level error process U.

On a regular auxiliary grid the limit state X and its flow derivative Z are
Euler-simulated from the same Brownian path W, and

    U_T = Z_T / sqrt(2) * sum_{i,j} int Z_s^{-1} grad(phi_j)(X_s) phi_i(X_s) theta(s)^{-1/2} dB^{ij}_s

is accumulated as a left-point Ito sum against an independent q*q Brownian
motion B.  B is laid out row-major: component ``i * q + j`` drives the
(i, j) integrand, with i, j counted from 0 over the diffusion columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np

from .config import DEFAULT
from .model import SdeModel, ThetaSpec
from .seeding import SeedSpec, chunks, run_ordered


class SingularZError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class LimitSample:
    x_T: np.ndarray
    z_T: np.ndarray
    u_T: np.ndarray
    seed: SeedSpec


def _singular_mask(z: np.ndarray, tol) -> np.ndarray:
    d = z.shape[-1]
    norm = np.abs(z).sum(axis=-1).max(axis=-1)
    det = np.linalg.det(z)
    with np.errstate(invalid="ignore", over="ignore"):
        return ~(np.abs(det) >= tol.singular_det * norm**d)


def invert_z(z: np.ndarray, tol=DEFAULT) -> np.ndarray:
    """Inverse of a d x d matrix (or a stack of them); refuses near-singular input."""
    z = np.asarray(z, dtype=float)
    bad = _singular_mask(z, tol)
    if np.any(bad):
        raise SingularZError(f"{int(np.sum(bad))} matrix(es) flagged singular")
    return np.linalg.inv(z)


def _limit_batch(model: SdeModel, theta: ThetaSpec, T: float, steps: int,
                 dW: np.ndarray, dB: np.ndarray, tol=DEFAULT):
    """Vectorized limit dynamics for increments dW (batch, steps, q), dB (batch, steps, q*q)."""
    batch = dW.shape[0]
    d, q = model.d, model.q
    h = T / steps
    eye = np.eye(d)
    x = np.broadcast_to(model.x0, (batch, d)).copy()
    z = np.broadcast_to(eye, (batch, d, d)).copy()
    acc = np.zeros((batch, d))
    aborted = np.zeros(batch, dtype=bool)
    inv_sqrt_theta = 1.0 / np.sqrt(np.asarray(theta.theta(np.arange(steps) * h), dtype=float))

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            bad = _singular_mask(z, tol)
            if bad.any():
                aborted |= bad
                z[bad] = eye
            zinv = np.linalg.inv(z)
            sig = model.diffusion(x)  # (batch, d, q)
            jac = [model.jacobian_col(j, x) for j in range(q + 1)]
            incr = np.zeros((batch, d))
            for j in range(1, q + 1):
                dphi_j = jac[j]
                for i in range(1, q + 1):
                    hij = np.einsum("bkl,blm,bm->bk", zinv, dphi_j, sig[..., i - 1])
                    incr += hij * dB[:, k, (i - 1) * q + (j - 1), None]
            acc += incr * inv_sqrt_theta[k]

            gen = jac[0] * h + np.einsum("jbkl,bj->bkl", np.stack(jac[1:]), dW[:, k])
            z = z + gen @ z
            x = x + model.drift(x) * h + np.einsum("bdq,bq->bd", sig, dW[:, k])

    u = np.einsum("bkl,bl->bk", z, acc) / math.sqrt(2.0)
    aborted |= ~(np.all(np.isfinite(x), axis=1) & np.all(np.isfinite(u), axis=1))
    return x, z, u, aborted


def _increments(model: SdeModel, steps: int, h: float, seed: SeedSpec, b_seed: SeedSpec):
    sq = math.sqrt(h)
    dW = seed.rng("limit-W").standard_normal((steps, model.q)) * sq
    dB = b_seed.rng("limit-B").standard_normal((steps, model.q * model.q)) * sq
    return dW, dB


def simulate_limit(model: SdeModel, theta: ThetaSpec, T: float, steps: int, seed: SeedSpec,
                   b_seed: SeedSpec | None = None, tol=DEFAULT) -> LimitSample:
    """One draw of (X_T, Z_T, U_T).  ``b_seed`` defaults to ``seed``; the two
    streams come from disjoint key domains either way."""
    if steps < 2:
        raise ValueError("steps must be >= 2")
    dW, dB = _increments(model, steps, T / steps, seed, b_seed or seed)
    x, z, u, aborted = _limit_batch(model, theta, T, steps, dW[None], dB[None], tol)
    if aborted[0]:
        raise SingularZError(f"limit replication {seed} hit a singular or nonfinite Z")
    return LimitSample(x[0], z[0], u[0], seed)


def _limit_chunk(model, theta, T, steps, master_seed, tol, reps):
    h = T / steps
    inc = [_increments(model, steps, h, SeedSpec(master_seed, r), SeedSpec(master_seed, r)) for r in reps]
    dW = np.stack([a for a, _ in inc])
    dB = np.stack([b for _, b in inc])
    return _limit_batch(model, theta, T, steps, dW, dB, tol)


def limit_samples(model: SdeModel, theta: ThetaSpec, T: float, steps: int, reps: int,
                  master_seed: int, jobs: int = 1, tol=DEFAULT):
    """(x_T, z_T, u_T, aborted) for replications 0..reps-1, identical to
    calling ``simulate_limit`` with ``SeedSpec(master_seed, r)``."""
    if steps < 2:
        raise ValueError("steps must be >= 2")
    parts = run_ordered(partial(_limit_chunk, model, theta, T, steps, master_seed, tol), chunks(0, reps), jobs)
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(4))


def variance_with_stderr(x: np.ndarray) -> tuple[float, float]:
    """Unbiased sample variance and its delta-method standard error."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 2:
        raise ValueError("need at least 2 samples")
    c = x - x.mean()
    var = float(c @ c / (n - 1))
    m4 = float(np.mean(c**4))
    m2 = float(np.mean(c**2))
    return var, math.sqrt(max(m4 - m2 * m2, 0.0) / n)


def limit_variance(model: SdeModel, theta: ThetaSpec, T: float,
                   payoff_gradient: Callable[[np.ndarray], np.ndarray],
                   reps: int, steps: int, master_seed: int, jobs: int = 1,
                   tol=DEFAULT) -> tuple[float, float]:
    """Variance of grad f(X_T) . U_T over ``reps`` limit draws, with its standard error."""
    if reps < 2:
        raise ValueError("reps must be >= 2")
    x, _, u, aborted = limit_samples(model, theta, T, steps, reps, master_seed, jobs, tol)
    if aborted.any():
        raise SingularZError(f"{int(aborted.sum())} limit replications aborted")
    proj = np.einsum("bd,bd->b", payoff_gradient(x), u)
    return variance_with_stderr(proj)


def gbm_error_variance(mu: float, sigma: float, x0: float, T: float, inv_theta_integral: float | None = None):
    """Closed-form Var(U_T) for geometric Brownian motion.

    Z_T = X_T / x0 and the integrand is the constant sigma^2 x0, so
    U_T = sigma^2 x0 Z_T (int theta^{-1/2} dB) / sqrt 2 and
    Var U_T = sigma^4 x0^2 / 2 * int_0^T 1/theta * exp((2 mu + sigma^2) T).
    ``inv_theta_integral`` defaults to T (theta = 1).
    """
    if inv_theta_integral is None:
        inv_theta_integral = T
    return sigma**4 * x0**2 / 2.0 * inv_theta_integral * math.exp((2 * mu + sigma**2) * T)
