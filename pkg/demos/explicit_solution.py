"""Closed-form solution of the Hua-Pickrell diffusion.

The conjugated integral is built from two complex Brownian matrices; the
diffusion's own noise is then rebuilt from that path, its covariation is
checked, and Euler-Maruyama driven by the rebuilt noise is compared with the
closed form under step halving.
"""

import argparse

import numpy as np

from hplab import ModelParams
from hplab.convergence import det_identity_study, explicit_solution_study
from hplab.rng import Role, replicate_streams

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--replicates", type=int, default=100)
parser.add_argument("--seed", type=int, default=5)
args = parser.parse_args()
ids = range(args.replicates)

params = ModelParams(2, 0.5, 0.5)
study, cov = explicit_solution_study(
    params, np.zeros((2, 2)), 1.0, 32, 5, replicate_streams(args.seed, ids, Role.W), replicate_streams(args.seed, ids, Role.B)
)
print("h        mean terminal gap")
for h, e in zip(study.h, study.errors):
    print(f"{h:.5f}  {e:.5f}")
print(f"log-log slope {study.slope:.3f}")
zc, zp = cov.max_z()
print(f"rebuilt noise: E[dG conj(dG)]/dt diagonal {np.real(cov.conj[0, 0, 0, 0]):.3f} (expect 2); max |z| {zc:.2f}, {zp:.2f}")

det = det_identity_study(ModelParams.from_drifts(3, 1.0), 1.0, 32, 5, replicate_streams(args.seed, ids, Role.INDEPENDENT))
print(f"det M_T vs exp(tr W_T / sqrt 2 + nu N T): slope {det.slope:.3f}")
