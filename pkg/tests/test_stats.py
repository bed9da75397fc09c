import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from irmlmc.model import theta_affine, theta_rate
from irmlmc.stats import (check_cross_qv, check_lemma3, check_psi_limit, compare_samples, eval_times,
                          jarque_bera, ks_critical, moments, theta_integral, two_sample_ks)


def test_ks_edge_cases():
    x = np.arange(10.0)
    assert two_sample_ks(x, x) == 0.0
    assert two_sample_ks([0.0], [1.0]) == 1.0
    with pytest.raises(ValueError):
        two_sample_ks([], [1.0])


def test_ks_critical_value():
    assert ks_critical(10_000, 10_000) == pytest.approx(1.628 * math.sqrt(2e-4))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-40, 40), min_size=1, max_size=40), st.lists(st.integers(-40, 40), min_size=1, max_size=40))
def test_ks_against_scipy_and_monotone_invariance(a, b):
    # integer support keeps exp strictly increasing in floating point
    a, b = np.array(a, float) / 8, np.array(b, float) / 8
    d = two_sample_ks(a, b)
    assert d == pytest.approx(sps.ks_2samp(a, b).statistic, abs=1e-12)
    assert two_sample_ks(np.exp(a), np.exp(b)) == d


def test_jb_two_point_sample():
    # +-1 with k each: skew 0, kurtosis 1, JB = n/6 * 4/4 = 2k/6
    x = np.array([1.0, -1.0] * 30)
    assert jarque_bera(x) == pytest.approx(10.0, rel=1e-12)


def test_jb_against_scipy_and_affine_invariance():
    x = np.random.default_rng(1).gamma(2.0, size=500)
    assert jarque_bera(x) == pytest.approx(sps.jarque_bera(x).statistic, rel=1e-10)
    assert jarque_bera(3 * x - 7) == pytest.approx(jarque_bera(x), rel=1e-9)
    with pytest.raises(ValueError):
        jarque_bera(np.ones(10))


def test_jb_size_and_power():
    rng = np.random.default_rng(2)
    accept = np.mean([jarque_bera(rng.standard_normal(200)) < 9.21 for _ in range(400)])
    assert accept >= 0.95
    assert jarque_bera(rng.exponential(size=200)) > 9.21


def test_moments_constant_sample():
    mo = moments(np.full(5, 2.0))
    assert mo["var"] == 0 and mo["skew"] == 0 and math.isnan(mo["kurtosis"])


def test_theta_integrals():
    assert theta_integral(theta_rate(1.0), 0.7, 1.0) == pytest.approx(0.7, rel=1e-12)
    assert theta_integral(theta_affine(1.0, 1.0), 1.0, 1.0) / 2 == pytest.approx(0.34657359027997264, rel=1e-12)
    assert theta_integral(theta_affine(1.0, 1.0), 1.0, 0.5) == pytest.approx(2 * (math.sqrt(2) - 1), rel=1e-12)
    assert eval_times(1.0, 4).tolist() == [0.25, 0.5, 0.75, 1.0]


def test_psi_targets():
    r1 = check_psi_limit(theta_rate(1.0), 64, 1.0, 1, 3, 4)
    assert np.all(r1.target == 0)
    r2 = check_psi_limit(theta_rate(1.0), 64, 1.0, 2, 3, 4)
    assert np.allclose(r2.target, r2.t_grid / 2, rtol=1e-12)
    r3 = check_psi_limit(theta_affine(1.0, 1.0), 64, 1.0, 2, 3, 4)
    assert r3.target[-1] == pytest.approx(0.34657359027997264, rel=1e-12)


def test_psi_p1_small():
    r = check_psi_limit(theta_rate(1.0), 1024, 1.0, 1, 5, 100)
    assert r.mean_sup_error < 0.05


def test_psi_p2_converges_affine():
    r = check_psi_limit(theta_affine(1.0, 1.0), 1024, 1.0, 2, 6, 100)
    assert abs(r.empirical[-1] - r.target[-1]) < 0.05


def test_cross_qv_targets_and_mean():
    for m, target in ((2, 0.25), (4, 0.375)):
        r = check_cross_qv(theta_rate(1.0), 256, m, 1.0, 7, 50)
        assert r.target[-1] == pytest.approx(target, rel=1e-12)
        assert abs(r.empirical[-1] / target - 1) < 0.1
    r = check_cross_qv(theta_affine(1.0, 1.0), 256, 2, 1.0, 7, 50)
    assert r.target[-1] == pytest.approx(0.25 * math.log(2), rel=1e-12)


def test_cross_qv_jobs_invariant():
    a = check_cross_qv(theta_rate(1.0), 64, 2, 1.0, 8, 40, jobs=1)
    b = check_cross_qv(theta_rate(1.0), 64, 2, 1.0, 8, 40, jobs=3)
    assert np.array_equal(a.per_rep_sup, b.per_rep_sup)


def test_lemma3_constant_theta():
    rep = check_lemma3(theta_rate(1.0), 256, 1.0, 9, 2000)
    assert rep.extra["target_variance"] == pytest.approx(0.5)
    assert rep.extra["sup_bound"] == pytest.approx(3 / 16)
    assert rep.flags["drift_integral_small"]
    assert abs(rep.extra["variance_ratio"] - 1) < 0.1
    assert rep.ks_statistic < 1.628 / math.sqrt(2000)


def test_lemma3_affine_theta():
    rep = check_lemma3(theta_affine(1.0, 1.0), 256, 1.0, 10, 2000)
    assert rep.extra["target_variance"] == pytest.approx(0.5 * math.log(2), rel=1e-12)
    assert abs(rep.extra["variance_ratio"] - 1) < 0.1


def test_compare_samples_flags():
    rng = np.random.default_rng(3)
    rep = compare_samples(rng.standard_normal(4000), rng.standard_normal(4000), ratio_band=(0.9, 1.1))
    assert all(rep.flags.values())
    rep = compare_samples(rng.standard_normal(4000), 2 * rng.standard_normal(4000), ratio_band=(0.9, 1.1))
    assert not rep.flags["variance_ratio_in_band"] and not rep.flags["ks_below_critical"]
    assert set(rep.to_dict()) == {"sizes", "moments", "ks_statistic", "jb_statistic", "flags", "extra"}
