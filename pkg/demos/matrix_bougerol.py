"""Matrix Bougerol identity at a finite time.

The Hua-Pickrell diffusion started at the zero matrix and the finite-time
conjugated integral are simulated independently; spectral statistics of the
two batches are compared by two-sample KS tests.
"""

import argparse

import numpy as np

from hplab import ModelParams, PathGrid, bougerol_integral, ks_two_sample, simulate_hp_diffusion
from hplab.rng import Role, replicate_streams

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--replicates", type=int, default=2000)
parser.add_argument("--steps", type=int, default=512)
parser.add_argument("--seed", type=int, default=3)
args = parser.parse_args()

params = ModelParams(2, 0.5, 0.5)
grid = PathGrid(1.0, args.steps)
ids = range(args.replicates)
X = simulate_hp_diffusion(params, np.zeros((2, 2)), grid, replicate_streams(args.seed, ids, Role.GAMMA_MATRIX), save_every=args.steps).terminal
Y = bougerol_integral(params, grid, replicate_streams(args.seed, ids, Role.W), replicate_streams(args.seed, ids, Role.B))

for name, f in [
    ("lambda_min", lambda A: np.linalg.eigvalsh(A)[:, 0]),
    ("lambda_max", lambda A: np.linalg.eigvalsh(A)[:, -1]),
    ("trace", lambda A: np.trace(A, axis1=1, axis2=2).real),
    ("det", lambda A: np.linalg.det(A).real),
]:
    rep = ks_two_sample(f(X), f(Y))
    print(f"{name:10s}  D={rep.statistic:.4f}  p={rep.p_value:.3f}  {rep.verdict}")
