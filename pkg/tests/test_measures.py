import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from hplab.errors import NormalizationFailure
from hplab.measures import (
    Density1D,
    gamma_log_norm_exact,
    hp_eigen_1d_density,
    hp_eigen_logdensity,
    hp_matrix_logdensity,
    pearson4_pdf,
    reversible_m_pdf,
)
from hplab.rng import RngStream

from conftest import random_hermitian, random_unitary


def test_matrix_logdensity_examples(rng):
    assert hp_matrix_logdensity(np.zeros((3, 3)), 0.3 + 0.2j) == pytest.approx(0.0)
    for x in (-2.0, 0.0, 3.5):
        assert hp_matrix_logdensity(np.array([[x]]), 0) == pytest.approx(-np.log1p(x * x))
    X = random_hermitian(rng, 3)
    U = random_unitary(rng, 3)
    a = hp_matrix_logdensity(X, 0.4 - 0.7j)
    b = hp_matrix_logdensity(U.conj().T @ X @ U, 0.4 - 0.7j)
    assert abs(a - b) < 1e-10


def test_matrix_logdensity_against_complex_powers(rng):
    X = random_hermitian(rng, 2)
    s, N = 0.3 + 0.6j, 2
    direct = np.linalg.det(np.eye(2) + 1j * X) ** (-s - N) * np.linalg.det(np.eye(2) - 1j * X) ** (-np.conj(s) - N)
    # principal-branch powers agree with the eigenvalue form when |arg| stays small
    lam = np.linalg.eigvalsh(X)
    if np.sum(np.abs(np.arctan(lam))) < np.pi / 2:
        assert np.log(direct.real) == pytest.approx(hp_matrix_logdensity(X, s), abs=1e-9)


def test_eigen_logdensity_examples():
    x = np.array([0.7])
    assert hp_eigen_logdensity(x, 0.2 + 0.1j) == pytest.approx(hp_matrix_logdensity(np.diag(x), 0.2 + 0.1j))
    assert hp_eigen_logdensity(np.array([-1.0, 1.0]), 0) == pytest.approx(-2 * np.log(2))
    assert hp_eigen_logdensity(np.array([1.0, -1.0]), 0) == -np.inf
    assert hp_eigen_logdensity(np.array([1.0, 1.0]), 0) == -np.inf


def test_pearson4_cauchy_case():
    assert pearson4_pdf(0.0, 0.5, 0.0) == pytest.approx(1 / np.pi, rel=1e-12)
    x = np.linspace(-20, 20, 41)
    assert np.allclose(pearson4_pdf(x, 0.5, 0.0), stats.cauchy.pdf(x), rtol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.0, 2.0), st.floats(0.1, 30.0))
def test_pearson4_symmetry(nu, mu, x):
    assert pearson4_pdf(x, nu, 0.0) == pytest.approx(pearson4_pdf(-x, nu, 0.0), rel=1e-12)
    # mu flips the skew
    assert pearson4_pdf(x, nu, mu) == pytest.approx(pearson4_pdf(-x, nu, -mu), rel=1e-12)


@pytest.mark.parametrize(
    "kind,params",
    [
        ("pearson4", (1.0, 0.0)),
        ("pearson4", (1.0, 1.0)),
        ("pearson4", (0.2, 0.3)),
        ("hp_eigen_1d", (0.0, 0.0)),
        ("hp_eigen_1d", (0.5, 0.5)),
        ("hp_eigen_1d", (-0.4, 1.2)),
        ("reversible_m", (0.0, 0.0, 2.0)),
        ("reversible_m", (0.5, -0.5, 3.0)),
    ],
)
def test_normalisation(kind, params):
    d = Density1D(kind, params)
    total, _ = integrate.quad(lambda t: float(d.pdf(t)), -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12, limit=500)
    assert total == pytest.approx(1.0, abs=1e-8)
    assert d.cdf(-np.inf) == 0.0 and d.cdf(np.inf) == 1.0
    u = np.array([0.01, 0.3, 0.5, 0.9, 0.999])
    assert np.allclose(d.cdf(d.ppf(u)), u, atol=1e-4)


def test_cdf_examples():
    c = hp_eigen_1d_density(0)
    assert c.cdf(0.0) == pytest.approx(0.5, abs=1e-13)
    x = np.array([-50.0, -3.0, 0.2, 7.0])
    assert np.allclose(c.cdf(x), stats.cauchy.cdf(x), atol=1e-12)
    g = Density1D("gamma", (1.0,))
    assert g.cdf(1.0) == pytest.approx(1 - np.exp(-1), abs=1e-12)
    assert g.cdf(-1.0) == 0.0
    assert np.exp(Density1D("gamma", (2.5,)).log_norm) == pytest.approx(np.exp(gamma_log_norm_exact(2.5)), rel=1e-10)
    assert Density1D("gamma", (3.0,)).cdf(4.0) == pytest.approx(stats.gamma(3.0).cdf(4.0), abs=1e-12)


def test_reversible_m_examples():
    x = np.linspace(-5, 5, 11)
    assert np.allclose(reversible_m_pdf(x, 0, 1), stats.cauchy.pdf(x), rtol=1e-10)
    assert np.allclose(reversible_m_pdf(x, 0.3 + 0.4j, 1), hp_eigen_1d_density(0.3 + 0.4j).pdf(x), rtol=1e-12)
    # N = 2, s = 0: (1 + w^2)^(-2) is a scaled Student t with 3 degrees of freedom
    t3 = stats.t(3, scale=1 / np.sqrt(3))
    assert np.allclose(reversible_m_pdf(x, 0, 2), t3.pdf(x), rtol=1e-10)
    with pytest.raises(ValueError):
        reversible_m_pdf(0.0, -0.6, 1)


def test_sampling(rng):
    d = Density1D("reversible_m", (0.0, 0.0, 2.0))
    x = d.sample(20_000, RngStream(3, 1))
    assert stats.kstest(x, stats.t(3, scale=1 / np.sqrt(3)).cdf).pvalue > 0.001


def test_invalid_parameters():
    with pytest.raises(ValueError):
        Density1D("hp_eigen_1d", (-0.6, 0.0))
    with pytest.raises(ValueError):
        Density1D("pearson4", (0.0, 0.0))
    with pytest.raises(ValueError):
        Density1D("gamma", (0.0,))
    with pytest.raises(ValueError):
        Density1D("wishart", (1.0,))


def test_normalisation_failure_surface(monkeypatch):
    from scipy import integrate as integ

    monkeypatch.setattr(integ, "quad", lambda *a, **k: (np.nan, 1.0))
    with pytest.raises(NormalizationFailure):
        Density1D("pearson4", (1.0, 0.0)).log_norm
