"""SDE models ``dX = b(X) dt + sigma(X) dW`` and step-intensity functions.

All coefficient callables are vectorized over leading axes: a state array of
shape ``(..., d)`` maps to drift ``(..., d)``, diffusion ``(..., d, q)`` and
column Jacobians ``(..., d, d)``.  Column ``j = 0`` is the drift and columns
``1..q`` are the diffusion columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class SdeModel:
    d: int
    q: int
    x0: np.ndarray
    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    jacobian_col: Callable[[int, np.ndarray], np.ndarray]
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        if self.d < 1 or self.q < 1:
            raise ModelError("d and q must be positive")
        if x0.shape != (self.d,):
            raise ModelError(f"x0 has shape {x0.shape}, expected ({self.d},)")

    def column(self, j: int, x: np.ndarray) -> np.ndarray:
        """phi_j(x): the drift for j = 0, else the j-th diffusion column."""
        if j == 0:
            return self.drift(x)
        return self.diffusion(x)[..., j - 1]


def _const_matrix(x: np.ndarray, mat: np.ndarray) -> np.ndarray:
    return np.broadcast_to(mat, x.shape[:-1] + mat.shape).copy()


def make_gbm(mu: float, sigma: float, x0: float) -> SdeModel:
    """Geometric Brownian motion ``dX = mu X dt + sigma X dW`` (d = q = 1)."""
    mu, sigma, x0 = float(mu), float(sigma), float(x0)
    if not (math.isfinite(mu) and math.isfinite(sigma)):
        raise ModelError("mu and sigma must be finite")
    if sigma < 0:
        raise ModelError(f"sigma must be nonnegative, got {sigma}")
    if not x0 > 0:
        raise ModelError(f"x0 must be positive, got {x0}")
    jac = {0: np.array([[mu]]), 1: np.array([[sigma]])}
    return SdeModel(
        d=1,
        q=1,
        x0=np.array([x0]),
        drift=lambda x: mu * x,
        diffusion=lambda x: (sigma * x)[..., None],
        jacobian_col=lambda j, x: _const_matrix(x, jac[j]),
        name="gbm",
        params={"mu": mu, "sigma": sigma, "x0": x0},
    )


def make_bs2d(mu: float, r: float, sigma: float, x1_0: float, x2_0: float) -> SdeModel:
    """Stock plus bank account: ``dX1 = mu X1 dt + sigma X1 dB``, ``dX2 = r X2 dt``."""
    mu, r, sigma = float(mu), float(r), float(sigma)
    if not all(math.isfinite(v) for v in (mu, r, sigma)):
        raise ModelError("rates must be finite")
    if not (x1_0 > 0 and x2_0 > 0):
        raise ModelError(f"initial state must be positive, got ({x1_0}, {x2_0})")
    rates = np.array([mu, r])
    vols = np.array([sigma, 0.0])
    jac = {0: np.diag(rates), 1: np.diag(vols)}
    return SdeModel(
        d=2,
        q=1,
        x0=np.array([x1_0, x2_0], dtype=float),
        drift=lambda x: rates * x,
        diffusion=lambda x: (vols * x)[..., None],
        jacobian_col=lambda j, x: _const_matrix(x, jac[j]),
        name="bs2d",
        params={"mu": mu, "r": r, "sigma": sigma, "x1_0": float(x1_0), "x2_0": float(x2_0)},
    )


@dataclass(frozen=True)
class ThetaSpec:
    """Step intensity: coarse steps are ``1 / (n * theta(t))``.

    ``inverse`` returns ``1/theta`` directly; constant intensities use it to
    produce steps bit-identical to ``T/n``.  ``constant`` is set when theta
    does not vary, which lets grids use the closed form of the recursion.
    """

    theta: Callable[[np.ndarray], np.ndarray]
    inv_bound: float
    inverse: Callable[[np.ndarray], np.ndarray]
    constant: float | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def check(self, T: float, samples: int = 1001) -> None:
        t = np.linspace(0.0, T, samples)
        th = np.asarray(self.theta(t), dtype=float)
        if not np.all(np.isfinite(th)) or np.any(th <= 0):
            raise ModelError("theta must be positive and finite on [0, T]")
        if np.any(1.0 / th > self.inv_bound * (1 + 1e-12)):
            raise ModelError(f"1/theta exceeds the declared bound K={self.inv_bound}")


def _theta_const(inv: float, name: str, params: dict) -> ThetaSpec:
    th = 1.0 / inv
    return ThetaSpec(
        theta=lambda t: np.full(np.shape(t), th),
        inv_bound=inv,
        inverse=lambda t: np.full(np.shape(t), inv),
        constant=th,
        name=name,
        params=params,
    )


def theta_constant(T: float) -> ThetaSpec:
    """theta = 1/T: the regular Euler scheme with step T/n."""
    if not T > 0:
        raise ModelError("T must be positive")
    return _theta_const(float(T), "constant", {"T": float(T)})


def theta_rate(c: float) -> ThetaSpec:
    """theta identically equal to ``c`` (step 1/(n c))."""
    if not c > 0:
        raise ModelError("theta rate must be positive")
    return _theta_const(1.0 / float(c), "rate", {"c": float(c)})


def theta_affine(a: float, b: float) -> ThetaSpec:
    """theta(t) = a + b t with a > 0, b >= 0, so 1/theta <= 1/a."""
    a, b = float(a), float(b)
    if not a > 0 or b < 0:
        raise ModelError("theta_affine needs a > 0 and b >= 0")
    if b == 0:
        return _theta_const(1.0 / a, "affine", {"a": a, "b": b})
    return ThetaSpec(
        theta=lambda t: a + b * np.asarray(t, dtype=float),
        inv_bound=1.0 / a,
        inverse=lambda t: 1.0 / (a + b * np.asarray(t, dtype=float)),
        name="affine",
        params={"a": a, "b": b},
    )


MODELS = {"gbm": make_gbm, "bs2d": make_bs2d}
THETAS = {"constant": theta_constant, "rate": theta_rate, "affine": theta_affine}


def model_from_spec(spec: dict) -> SdeModel:
    spec = dict(spec)
    name = spec.pop("name", None)
    if name not in MODELS:
        raise ModelError(f"model.name must be one of {sorted(MODELS)}, got {name!r}")
    try:
        return MODELS[name](**spec)
    except TypeError as exc:
        raise ModelError(f"model {name!r}: {exc}") from None


def theta_from_spec(spec: dict) -> ThetaSpec:
    spec = dict(spec)
    name = spec.pop("name", None)
    if name not in THETAS:
        raise ModelError(f"theta.name must be one of {sorted(THETAS)}, got {name!r}")
    try:
        return THETAS[name](**spec)
    except TypeError as exc:
        raise ModelError(f"theta {name!r}: {exc}") from None
