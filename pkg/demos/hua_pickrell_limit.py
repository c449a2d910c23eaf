"""The infinite matrix integral and its Hua-Pickrell law.

For N = 1 the integral is compared to the normalised one-dimensional density.
For N = 2 and s = 0 the law is the Cauchy ensemble, which can be sampled
exactly as the Cayley transform ``i (I - U)(I + U)^{-1}`` of a Haar unitary
``U``; spectral statistics are compared with such an exact sample, and the
top-eigenvalue bins with the marginal of the eigenvalue density.
"""

import argparse

import numpy as np
from scipy import integrate

from hplab import ModelParams, TailPolicy, bougerol_integral_infinite, hp_eigen_logdensity, ks_one_sample, ks_two_sample
from hplab.linalg import hermitian_part
from hplab.measures import hp_eigen_1d_density
from hplab.rng import Role, replicate_streams

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--replicates", type=int, default=3000)
parser.add_argument("--seed", type=int, default=2)
args = parser.parse_args()
ids = range(args.replicates)


def sample(params, h=2.0**-7):
    res = bougerol_integral_infinite(
        params, TailPolicy.for_params(params), h, replicate_streams(args.seed, ids, Role.W), replicate_streams(args.seed, ids, Role.B)
    )
    print(f"  N={params.N} s={params.s}: truncated at T in [{res.T.min():.0f}, {res.T.max():.0f}], flagged {res.flagged_rate:.2%}")
    return res.value[res.converged]


s = 0.5 + 0.5j
x = sample(ModelParams(1, s.real, s.imag))[:, 0, 0].real
print("N=1 vs density:", ks_one_sample(x, hp_eigen_1d_density(s).cdf).verdict)

X = sample(ModelParams(2, 0.0, 0.0))
lam = np.linalg.eigvalsh(X)
top = lam[:, -1]

r = np.random.default_rng(args.seed)
A = r.normal(size=(50_000, 2, 2)) + 1j * r.normal(size=(50_000, 2, 2))
Q, R = np.linalg.qr(A)
d = np.diagonal(R, axis1=1, axis2=2)
U = Q * (d / np.abs(d))[:, None, :]
ref = np.linalg.eigvalsh(hermitian_part(1j * (np.eye(2) - U) @ np.linalg.inv(np.eye(2) + U)))
for name, a, b in [("lambda_min", lam[:, 0], ref[:, 0]), ("lambda_max", top, ref[:, -1]), ("trace", lam.sum(1), ref.sum(1))]:
    print(f"N=2 {name:10s} vs Cayley-transformed Haar unitaries: p={ks_two_sample(a, b).p_value:.3f}")
edges = np.array([-2.0, -0.5, 0.0, 0.5, 1.0, 2.0, 5.0])


def marginal_top(y):
    f = lambda x1: np.exp(hp_eigen_logdensity(np.array([x1, y]), 0)) if x1 < y else 0.0  # noqa: E731
    return integrate.quad(f, -np.inf, y, limit=200)[0]


Z = integrate.quad(marginal_top, -np.inf, np.inf, limit=200)[0]
print("N=2 largest eigenvalue, bin probabilities (simulated / exact):")
for lo, hi in zip(edges[:-1], edges[1:]):
    exact = integrate.quad(marginal_top, lo, hi)[0] / Z
    print(f"  [{lo:5.1f}, {hi:4.1f})  {np.mean((top >= lo) & (top < hi)):.3f} / {exact:.3f}")
