import numpy as np

from hplab.convergence import _levels, det_identity_study, explicit_solution_study, fine_increments
from hplab.rng import Role, coarsen
from hplab.sde import ModelParams, PathGrid, simulate_exp_bm


def test_levels_share_one_brownian_path(streams):
    fine = fine_increments(streams(3), 2, 1.0, 64)
    coarse = coarsen(fine, 8, axis=1)
    assert coarse.shape == (3, 8, 2, 2)
    assert np.allclose(coarse.sum(axis=1), fine.sum(axis=1))
    # the finest level reproduces a direct simulation on the same streams
    direct = simulate_exp_bm(ModelParams(2), 1, PathGrid(1.0, 64), streams(3), save_every=64).terminal
    via = simulate_exp_bm(ModelParams(2), 1, PathGrid(1.0, 64), fine, save_every=64).terminal
    assert np.array_equal(direct, via)
    assert [g.steps for g in _levels(1.0, 4, 3)] == [4, 8, 16]


def test_det_identity_errors_shrink(streams):
    study = det_identity_study(ModelParams.from_drifts(2, 0.5), 1.0, 16, 4, streams(60))
    assert study.per_replicate.shape == (4, 60)
    assert study.errors[-1] < study.errors[0]
    assert study.slope > 0.3


def test_explicit_solution_gap_shrinks(streams):
    study, cov = explicit_solution_study(
        ModelParams(2, 0.5, 0.5), np.zeros((2, 2)), 1.0, 16, 4, streams(40), streams(40, Role.B)
    )
    assert study.monotone
    assert study.slope > 0.3
    assert cov.n == 40 * 128
