import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from hplab.errors import InsufficientHorizon, InsufficientSample
from hplab.rng import RngStream
from hplab.stats import (
    EmpiricalSample,
    TestReport,
    covariation_matrix,
    ks_one_sample,
    ks_two_sample,
    lyapunov_slope,
    slope_loglog,
)


def test_ks_one_sample_matches_scipy_asymptotic(rng):
    x = rng.normal(size=500)
    rep = ks_one_sample(x, stats.norm.cdf)
    ref = stats.kstest(x, "norm", method="asymp")
    assert rep.statistic == pytest.approx(ref.statistic, abs=1e-14)
    assert rep.p_value == pytest.approx(ref.pvalue, rel=1e-6)


def test_ks_self_calibration():
    # samples from the reference law itself: p-values are uniform
    p = np.array([ks_one_sample(RngStream(17, i).normals(500), stats.norm.cdf).p_value for i in range(200)])
    assert abs(np.mean(p < 0.05) - 0.05) <= 0.04


def test_ks_one_sample_power(rng):
    x = stats.cauchy.rvs(size=10_000, random_state=rng)
    assert ks_one_sample(x, stats.norm.cdf).p_value < 1e-6


def test_ks_constant_sample():
    rep = ks_one_sample(np.zeros(200), stats.norm.cdf)
    assert rep.statistic >= 0.5
    assert not rep.passed


def test_ks_two_sample_examples(rng):
    a = rng.normal(size=300)
    rep = ks_two_sample(a, a)
    assert rep.statistic == 0 and rep.p_value == 1
    x = stats.cauchy.rvs(size=10_000, random_state=rng)
    y = stats.cauchy.rvs(size=10_000, random_state=rng) + 1
    assert ks_two_sample(x, y).p_value < 1e-4


def test_ks_two_sample_split_halves():
    ok = 0
    for i in range(100):
        z = RngStream(23, i).normals(2000)
        ok += ks_two_sample(z[:1000], z[1000:]).p_value > 0.001
    assert ok >= 99


def test_ks_two_sample_matches_scipy(rng):
    a, b = rng.normal(size=400), rng.normal(0.1, 1, size=700)
    rep = ks_two_sample(a, b)
    assert rep.statistic == pytest.approx(stats.ks_2samp(a, b).statistic, abs=1e-14)
    assert rep.n == (400, 700)


def test_minimum_sample_size():
    with pytest.raises(InsufficientSample):
        ks_one_sample(np.zeros(99), stats.norm.cdf)
    with pytest.raises(InsufficientSample):
        ks_two_sample(np.zeros(200), np.zeros(50))


def test_empirical_sample_flags():
    s = EmpiricalSample.from_raw([1.0, np.nan, 3.0, 4.0], "x", flags=[False, False, True, False])
    assert s.n == 2 and s.n_flagged == 2
    with pytest.raises(ValueError):
        EmpiricalSample(np.array([1.0, np.inf]))


def test_report_serialisation():
    rep = TestReport("ks_1samp", 0.01, 0.5, (100,), seed=7, params_fingerprint="N=1")
    d = json.loads(rep.to_json())
    for key in ("statistic", "p_value", "n", "verdict", "seed", "params_fingerprint"):
        assert key in d
    assert d["verdict"] == "pass"
    rule = TestReport("slope", 0.3, None, (10,), metadata={"rule_passed": False})
    assert rule.verdict == "fail"


def test_lyapunov_slope_deterministic():
    t = np.linspace(0, 20, 2001)
    m, (lo, hi) = lyapunov_slope(t, -3 * t)
    assert m == pytest.approx(-3, abs=1e-12)
    assert hi - lo < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.floats(-1e3, 1e3), st.integers(0, 10_000))
def test_lyapunov_slope_shift_invariant(c, seed):
    t = np.linspace(0, 20, 401)
    r = np.random.default_rng(seed)
    y = np.cumsum(r.normal(0, 0.1, size=(25, t.size)), axis=1) - t
    a, _ = lyapunov_slope(t, y)
    b, _ = lyapunov_slope(t, y + c)
    assert a == pytest.approx(b, abs=1e-9)


def test_lyapunov_slope_gaussian_case():
    # delta = sqrt(2) b - 2 t: slope -2 within the interval
    t = np.linspace(0, 20, 4001)
    dt = t[1]
    paths = np.stack([np.concatenate([[0], np.cumsum(np.sqrt(2 * dt) * RngStream(3, i).normals(4000))]) for i in range(50)]) - 2 * t
    m, (lo, hi) = lyapunov_slope(t, paths)
    assert lo <= -2 <= hi
    m1, (lo1, hi1) = lyapunov_slope(t, paths[:3])  # batch-means branch
    assert lo1 < m1 < hi1


def test_lyapunov_horizon_checked():
    t = np.linspace(0, 8, 100)
    with pytest.raises(InsufficientHorizon):
        lyapunov_slope(t, t)
    with pytest.raises(ValueError):
        lyapunov_slope(t, t, burn_in=1.0)


def test_covariation_raw_increments():
    dt, n = 0.01, 40_000
    z = np.sqrt(dt) * RngStream(5, 2).complex_normals((n, 2, 2))
    cov = covariation_matrix(z, dt)
    zc, zp = cov.max_z()
    assert zc <= 4.5 and zp <= 4.5
    assert cov.conj[0, 1, 0, 1].real == pytest.approx(2.0, abs=5 * cov.conj_se[0, 1, 0, 1])


def test_covariation_deterministic_zero():
    cov = covariation_matrix(np.zeros((2000, 2, 2), complex), 0.1)
    assert np.all(cov.conj == 0) and np.all(cov.plain == 0)
    with pytest.raises(InsufficientSample):
        covariation_matrix(np.zeros((10, 2, 2)), 0.1)


def test_slope_loglog():
    h = 2.0 ** -np.arange(6, 12)
    assert slope_loglog(h, 3 * h**0.5) == pytest.approx(0.5)
