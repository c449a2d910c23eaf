"""Scalar warm-up: sinh of a Brownian motion, the Pearson IV functional, Dufresne.

Three one-dimensional facts that the matrix results generalise, each checked
by a Kolmogorov-Smirnov test on a few thousand simulated replicates.
"""

import argparse

import numpy as np
from scipy.special import ndtr

from hplab import Density1D, TailPolicy, dufresne_integral, ks_one_sample, ks_two_sample, scalar_bougerol_functional
from hplab.rng import Role, replicate_streams
from hplab.sde import ModelParams, PathGrid

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--replicates", type=int, default=4000)
parser.add_argument("--seed", type=int, default=1)
args = parser.parse_args()
ids = range(args.replicates)

# 1. int_0^1 e^{beta} d gamma against sinh(beta_1)
ito = scalar_bougerol_functional(
    0.0, 0.0, PathGrid(1.0, 1024), replicate_streams(args.seed, ids, Role.BETA), replicate_streams(args.seed, ids, Role.GAMMA)
)
sinh_beta = np.sinh(np.array([s.normals() for s in replicate_streams(args.seed, ids, Role.INDEPENDENT)]))
print("Ito sum vs sinh(beta_1):        ", ks_two_sample(ito, sinh_beta).verdict)
print("Ito sum vs law of sinh(beta_1): ", ks_one_sample(ito, lambda x: ndtr(np.arcsinh(x))).verdict)

# 2. the infinite-horizon functional with drifts has a Pearson IV law
nu, mu = 1.0, 0.5
res = scalar_bougerol_functional(
    nu, mu, TailPolicy.for_scalar(nu), replicate_streams(args.seed, ids, Role.BETA), replicate_streams(args.seed, ids, Role.GAMMA), h=2.0**-7
)
pearson = Density1D("pearson4", (nu, mu))
print(f"Pearson IV (nu={nu}, mu={mu}):     ", ks_one_sample(res.value[res.converged], pearson.cdf).verdict,
      f"(median {np.median(res.value):.3f} vs {pearson.ppf(0.5):.3f})")

# 3. Dufresne: the N = 1 matrix process runs on half the time scale of a real BM,
#    so 1 / a_matrix(nu/2) is Gamma(nu)
nu = 1.5
params = ModelParams.from_drifts(1, nu / 2)
a = dufresne_integral(params, TailPolicy.for_params(params), replicate_streams(args.seed, ids, Role.W), h=2.0**-7)
xi = 1.0 / a.value[a.converged, 0, 0].real
print(f"Dufresne, Gamma({nu}) law:         ", ks_one_sample(xi, Density1D("gamma", (nu,)).cdf).verdict,
      f"(mean {xi.mean():.3f} vs {nu})")
