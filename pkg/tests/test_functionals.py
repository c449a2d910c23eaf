import numpy as np
import pytest
from scipy import stats

from hplab.errors import TailNotConverged
from hplab.functionals import (
    TailPolicy,
    bougerol_integral,
    bougerol_integral_infinite,
    dufresne_integral,
    explicit_solution_path,
    reconstruct_gamma,
    scalar_bougerol_functional,
)
from hplab.linalg import hermitian_part, is_hermitian
from hplab.measures import Density1D
from hplab.rng import Role
from hplab.sde import ModelParams, PathGrid
from hplab.stats import covariation_matrix, ks_one_sample, ks_two_sample


def test_tail_policy_defaults_and_validation():
    p = ModelParams.from_drifts(2, 1.0)  # growth rate 1
    assert TailPolicy.for_params(p).max_T == 40.0
    assert TailPolicy.for_params(ModelParams.from_drifts(1, 20.0)).max_T == 10.0
    assert TailPolicy.for_scalar(0.1).max_T == 200.0
    with pytest.raises(ValueError):
        TailPolicy(eps=0.0)
    with pytest.raises(ValueError):
        TailPolicy(block=2.0, max_T=1.0)


@pytest.mark.parametrize("T", [0.5, 2.0])
def test_bougerol_integral_noise_free(T):
    p = ModelParams.from_drifts(2, 1.0, 0.8)
    exact = np.sqrt(2) * 0.8 * (1 - np.exp(-2 * T)) / 2
    errs = []
    for steps in (500, 1000):
        Y = bougerol_integral(p, PathGrid(T, steps))
        assert np.allclose(Y - np.diag(np.diag(Y)), 0)
        errs.append(np.abs(np.diag(Y) - exact).max())
    assert errs[1] < errs[0] < 5 * T / 500


def test_bougerol_integral_hermitian(streams):
    Y = bougerol_integral(ModelParams(3, 0.5, 0.5), PathGrid(1.0, 64), streams(10), streams(10, Role.B))
    assert Y.shape == (10, 3, 3)
    assert all(is_hermitian(y) for y in Y)


def test_infinite_noise_free_limit():
    p = ModelParams.from_drifts(2, 1.0, 0.6)
    res = bougerol_integral_infinite(p, None, 1e-3)
    assert res.converged
    assert np.allclose(res.value, np.sqrt(2) * 0.6 / 2 * np.eye(2), atol=2e-3)


def test_infinite_n1_cauchy(streams):
    p = ModelParams(1, 0.0, 0.0)
    res = bougerol_integral_infinite(p, None, 2.0**-7, streams(3000), streams(3000, Role.B))
    x = res.value[:, 0, 0].real
    assert res.flagged_rate < 0.01
    rep = ks_one_sample(x[res.converged], stats.cauchy.cdf)
    assert rep.passed


def test_infinite_flag_rate_and_tail_decay(streams):
    p = ModelParams.from_drifts(1, 2.0)
    policy = TailPolicy(eps=1e-6, block=1.0, max_T=60.0)
    res = bougerol_integral_infinite(p, policy, 2.0**-6, streams(1000), streams(1000, Role.B))
    assert res.flagged_rate < 0.01
    first = np.array([n[0] for n in res.block_norms])
    second = np.array([n[1] for n in res.block_norms if len(n) > 1])
    assert second.mean() < first.mean()


def test_require_converged_raises(streams):
    p = ModelParams.from_drifts(1, 0.5)
    policy = TailPolicy(eps=1e-12, block=1.0, max_T=2.0)
    res = bougerol_integral_infinite(p, policy, 2.0**-5, streams(5), streams(5, Role.B))
    assert not res.converged.any()
    with pytest.raises(TailNotConverged):
        res.require_converged()


def test_dufresne_noise_free():
    p = ModelParams.from_drifts(1, 1.0)
    res = dufresne_integral(p, TailPolicy(eps=1e-9, max_T=40.0), h=1e-3)
    assert res.value[0, 0].real == pytest.approx(0.5, abs=1e-3)
    Y = dufresne_integral(p, PathGrid(1.0, 1000))
    assert Y[0, 0].real == pytest.approx((1 - np.exp(-2)) / 2, abs=1e-3)


def test_dufresne_psd(streams):
    Y = dufresne_integral(ModelParams(3, 0.5), PathGrid(2.0, 128), streams(50))
    assert np.linalg.eigvalsh(Y).min() >= 0


def test_dufresne_gamma_law(streams):
    # complex-noise time scale: 1 / a_matrix(nu_m) is Gamma(2 nu_m)
    p = ModelParams.from_drifts(1, 0.5)
    res = dufresne_integral(p, TailPolicy.for_params(p), streams(3000), h=2.0**-7)
    a = res.value[res.converged, 0, 0].real
    assert ks_one_sample(1 / a, Density1D("gamma", (1.0,)).cdf).passed


def test_explicit_solution_noise_free_zero():
    path = explicit_solution_path(ModelParams(2, 0.7, 0.0), np.zeros((2, 2)), PathGrid(1.0, 50))
    assert np.allclose(path.states, 0)


def test_explicit_solution_covariation(streams):
    p = ModelParams(2, 0.5, 0.5)
    path = explicit_solution_path(p, np.zeros((2, 2)), PathGrid(1.0, 256), streams(40), streams(40, Role.B))
    assert path.extras["dW"].shape == (40, 256, 2, 2)
    dG = reconstruct_gamma(path)
    zc, zp = covariation_matrix(dG, 1.0 / 256).max_z()
    assert zc <= 4 and zp <= 4


def test_reconstruct_gamma_needs_full_path(streams):
    path = explicit_solution_path(ModelParams(2), np.zeros((2, 2)), PathGrid(1.0, 8), streams(2), streams(2, Role.B), save_every=4)
    with pytest.raises(ValueError):
        reconstruct_gamma(path)


@pytest.mark.parametrize("nu,mu,T", [(1.0, 0.5, 1.0), (0.5, -1.0, 3.0)])
def test_scalar_functional_noise_free(nu, mu, T):
    val = scalar_bougerol_functional(nu, mu, PathGrid(T, 5000))
    assert val == pytest.approx(-mu * (1 - np.exp(-nu * T)) / nu, abs=2e-3)


def test_scalar_functional_chunk_consistency(streams):
    grid = PathGrid(1.0, 5000)
    a = scalar_bougerol_functional(0.0, 0.0, grid, streams(4, Role.BETA), streams(4, Role.GAMMA))
    b = [scalar_bougerol_functional(0.0, 0.0, grid, s, g) for s, g in zip(streams(4, Role.BETA), streams(4, Role.GAMMA))]
    assert np.allclose(a, b, rtol=0, atol=1e-13)


def test_scalar_infinite_noise_free():
    res = scalar_bougerol_functional(1.0, 1.0, TailPolicy.for_scalar(1.0), h=1e-3)
    assert res.converged and res.value == pytest.approx(-1.0, abs=2e-3)
    with pytest.raises(ValueError):
        scalar_bougerol_functional(0.0, 1.0, TailPolicy(), h=1e-3)


def _cayley_cue(n, N, seed):
    """Cauchy ensemble: Cayley transform i(I - U)(I + U)^{-1} of Haar unitaries."""
    r = np.random.default_rng(seed)
    A = r.normal(size=(n, N, N)) + 1j * r.normal(size=(n, N, N))
    Q, R = np.linalg.qr(A)
    d = np.diagonal(R, axis1=1, axis2=2)
    U = Q * (d / np.abs(d))[:, None, :]
    I = np.eye(N)
    return np.linalg.eigvalsh(hermitian_part(1j * (I - U) @ np.linalg.inv(I + U)))


def test_infinite_n2_matches_cauchy_ensemble(streams):
    p = ModelParams(2, 0.0, 0.0)
    res = bougerol_integral_infinite(p, None, 2.0**-7, streams(3000), streams(3000, Role.B))
    lam = np.linalg.eigvalsh(res.value[res.converged])
    ref = _cayley_cue(100_000, 2, 0)
    assert ks_two_sample(lam[:, -1], ref[:, -1]).passed
    assert ks_two_sample(lam[:, 0], ref[:, 0]).passed
    assert ks_two_sample(lam.sum(axis=1), ref.sum(axis=1)).passed
