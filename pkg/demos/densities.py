"""Normalised densities: Pearson IV, the N = 1 Hua-Pickrell law, and the
reversible measure of the one-dimensional spectral diffusion.

Also runs that diffusion from its reversible law and checks the law is kept.
"""

import numpy as np

from hplab import Density1D, ModelParams, PathGrid, ks_two_sample, simulate_scalar
from hplab.rng import Role, RngStream, replicate_streams

for kind, params in [("pearson4", (1.0, 1.0)), ("hp_eigen_1d", (0.5, 0.5)), ("reversible_m", (0.0, 0.0, 2.0))]:
    d = Density1D(kind, params)
    q = d.ppf(np.array([0.05, 0.5, 0.95]))
    print(f"{kind:13s} {params}: log Z = {d.log_norm:.6f}, quantiles 5/50/95% = {np.round(q, 4)}")

params = ModelParams(2, 0.0, 0.5)
m = Density1D("reversible_m", (params.s_re, params.s_im, params.N))
w0 = m.sample(3000, RngStream(6, 0))
w = simulate_scalar("pearson_1d", params, w0, PathGrid(1.0, 1024), replicate_streams(6, range(3000), Role.BETA), save_every=1024)
print("reversible law kept after t=1:", ks_two_sample(w0, w.terminal).verdict)
