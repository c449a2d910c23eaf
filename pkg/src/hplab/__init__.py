"""Monte Carlo laboratory for matrix exponential functionals and Hua-Pickrell laws."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .functionals import (  # noqa: E402
    InfiniteResult,
    TailPolicy,
    bougerol_integral,
    bougerol_integral_infinite,
    dufresne_integral,
    explicit_solution_path,
    gamma_driven_hp,
    reconstruct_gamma,
    scalar_bougerol_functional,
)
from .measures import Density1D, hp_eigen_logdensity, hp_matrix_logdensity  # noqa: E402
from .rng import NoiseFeed, RngStream, Role, substream  # noqa: E402
from .sde import (  # noqa: E402
    ModelParams,
    PathGrid,
    Trajectory,
    simulate_eigen_system,
    simulate_exp_bm,
    simulate_hp_diffusion,
    simulate_inverse_pair,
    simulate_scalar,
    simulate_singular_log,
)
from .stats import EmpiricalSample, TestReport, ks_one_sample, ks_two_sample, lyapunov_slope  # noqa: E402
