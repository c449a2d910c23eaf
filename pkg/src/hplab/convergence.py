"""Coupled step-halving studies.

Each study draws Brownian increments once on the finest grid and drives every
coarser grid with sums of those increments, so all levels see one Brownian
path per replicate and differences measure discretisation error only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functionals import explicit_solution_path, gamma_driven_hp, reconstruct_gamma
from .linalg import det_and_trace
from .rng import NoiseFeed, coarsen
from .sde import ModelParams, PathGrid, simulate_exp_bm
from .stats import CovariationSummary, covariation_matrix, slope_loglog

__all__ = ["LevelStudy", "fine_increments", "det_identity_study", "explicit_solution_study"]


@dataclass
class LevelStudy:
    """Mean error per grid level and the fitted log-log slope."""

    h: np.ndarray
    errors: np.ndarray
    per_replicate: np.ndarray  # shape (levels, R)

    @property
    def slope(self) -> float:
        return slope_loglog(self.h, self.errors)

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.errors) < 0))


def fine_increments(streams, N: int, T: float, steps: int) -> np.ndarray:
    """Complex Brownian increments ``(R, steps, N, N)`` on the finest grid."""
    return NoiseFeed(list(streams), (N, N), T / steps, complex_=True).take(steps)


def _levels(T: float, coarse_steps: int, levels: int) -> list[PathGrid]:
    return [PathGrid(T, coarse_steps * 2**j) for j in range(levels)]


def det_identity_study(params: ModelParams, T: float, coarse_steps: int, levels: int, streams) -> LevelStudy:
    """``|det M_T - exp(tr(W_T)/sqrt(2) + nu N T)|`` for ``M = M^(+nu)`` on each level."""
    grids = _levels(T, coarse_steps, levels)
    fine = fine_increments(streams, params.N, T, grids[-1].steps)
    W_T = fine.sum(axis=1)
    _, trW = det_and_trace(W_T)
    exact = np.exp(trW / np.sqrt(2) + params.nu * params.N * T)
    per = []
    for g in grids:
        dW = coarsen(fine, grids[-1].steps // g.steps, axis=1)
        M_T = simulate_exp_bm(params, 1, g, dW, save_every=g.steps).terminal
        det, _ = det_and_trace(M_T)
        per.append(np.abs(det - exact))
    per = np.array(per)
    return LevelStudy(np.array([g.h for g in grids]), per.mean(axis=1), per)


def explicit_solution_study(
    params: ModelParams,
    X0: np.ndarray,
    T: float,
    coarse_steps: int,
    levels: int,
    streams_W,
    streams_B,
) -> tuple[LevelStudy, CovariationSummary]:
    """Gap between the closed-form path and the diffusion EM driven by the rebuilt noise.

    For each level the closed-form solution is assembled from ``(W, B)``, the
    diffusion's Brownian increments are reconstructed from it, and the
    diffusion is integrated by EM with those increments.  Returns the
    terminal max-norm gap per level and the covariation of the rebuilt
    increments on the finest level.
    """
    grids = _levels(T, coarse_steps, levels)
    n_fine = grids[-1].steps
    dW_f = fine_increments(streams_W, params.N, T, n_fine)
    dB_f = fine_increments(streams_B, params.N, T, n_fine)
    per = []
    cov = None
    for g in grids:
        f = n_fine // g.steps
        path = explicit_solution_path(params, X0, g, coarsen(dW_f, f, axis=1), coarsen(dB_f, f, axis=1))
        em = gamma_driven_hp(params, X0, path, save_every=g.steps)
        per.append(np.abs(path.terminal - em.terminal).max(axis=(-1, -2)))
        if g is grids[-1]:
            cov = covariation_matrix(reconstruct_gamma(path), g.h)
    per = np.array(per)
    return LevelStudy(np.array([g.h for g in grids]), per.mean(axis=1), per), cov
