import numpy as np
import pytest

from irmlmc.grid import build_coarse
from irmlmc.model import (ModelError, make_bs2d, make_gbm, model_from_spec, theta_affine,
                          theta_constant, theta_from_spec, theta_rate)


def fd_jacobian(model, j, x, h=1e-6):
    """Central differences of phi_j, column k = d/dx_k."""
    cols = []
    for k in range(model.d):
        e = np.zeros(model.d)
        e[k] = h * max(1.0, abs(x[k]))
        cols.append((model.column(j, x + e) - model.column(j, x - e)) / (2 * e[k]))
    return np.stack(cols, axis=-1)


def test_gbm_degenerate():
    m = make_gbm(0.0, 0.0, 1.0)
    x = np.array([[3.0], [-2.0]])
    assert np.all(m.drift(x) == 0)
    assert np.all(m.diffusion(x) == 0)


def test_gbm_jacobian_constant():
    m = make_gbm(0.05, 0.2, 1.0)
    for x in (0.1, 2.0, 50.0):
        assert m.jacobian_col(1, np.array([x]))[0, 0] == 0.2
    assert fd_jacobian(m, 1, np.array([2.0]))[0, 0] == pytest.approx(0.2, abs=1e-8)


def test_gbm_rejects_bad_x0():
    with pytest.raises(ModelError):
        make_gbm(0.05, 0.2, 0.0)
    with pytest.raises(ModelError):
        make_gbm(0.05, -0.1, 1.0)


def test_bs2d_coefficients():
    m = make_bs2d(0.05, 0.03, 0.2, 100.0, 1.0)
    x = np.array([80.0, 1.5])
    assert np.allclose(m.diffusion(x)[:, 0], [16.0, 0.0])
    assert np.allclose(fd_jacobian(m, 0, x), np.diag([0.05, 0.03]), atol=1e-8)
    with pytest.raises(ModelError):
        make_bs2d(0.05, 0.03, 0.2, 100.0, 0.0)


def test_bs2d_zero_rates_constant():
    m = make_bs2d(0.0, 0.0, 0.0, 100.0, 1.0)
    x = m.x0
    assert np.all(m.drift(x) == 0) and np.all(m.diffusion(x) == 0)


@pytest.mark.parametrize("model", [make_gbm(0.05, 0.2, 1.0), make_gbm(-0.3, 0.7, 2.0),
                                   make_bs2d(0.05, 0.03, 0.2, 100.0, 1.0)])
def test_jacobians_match_finite_differences(model):
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = rng.uniform(0.1, 200.0, model.d)
        for j in range(model.q + 1):
            exact = model.jacobian_col(j, x)
            fd = fd_jacobian(model, j, x)
            assert np.allclose(fd, exact, rtol=1e-5, atol=1e-9)


def test_jacobian_batched_shape():
    m = make_bs2d(0.05, 0.03, 0.2, 100.0, 1.0)
    assert m.jacobian_col(1, np.ones((7, 2))).shape == (7, 2, 2)
    assert m.diffusion(np.ones((7, 2))).shape == (7, 2, 1)


def test_theta_constant():
    th = theta_constant(1.0)
    assert th.theta(0.5) == 1.0 and th.inv_bound == 1.0
    th2 = theta_constant(2.0)
    assert np.all(1.0 / th2.theta(np.linspace(0, 2, 11)) == 2.0)
    g = build_coarse(theta_constant(1.0), 4, 1.0)
    assert np.all(g.steps == 0.25)


def test_theta_checks():
    theta_affine(1.0, 1.0).check(1.0)
    theta_rate(2.0).check(1.0)
    with pytest.raises(ModelError):
        theta_affine(0.0, 1.0)
    bad = theta_affine(1.0, 1.0)
    object.__setattr__(bad, "inv_bound", 0.5)
    with pytest.raises(ModelError):
        bad.check(1.0)


def test_registry():
    m = model_from_spec({"name": "gbm", "mu": 0.1, "sigma": 0.3, "x0": 2.0})
    assert m.params == {"mu": 0.1, "sigma": 0.3, "x0": 2.0}
    assert theta_from_spec({"name": "affine", "a": 1.0, "b": 1.0}).inv_bound == 1.0
    with pytest.raises(ModelError):
        model_from_spec({"name": "heston"})
    with pytest.raises(ModelError):
        model_from_spec({"name": "gbm", "mu": 0.1})
