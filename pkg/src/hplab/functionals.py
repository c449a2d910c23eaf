"""Ito-sum accumulators for the matrix and scalar stochastic integrals.

All sums use left endpoints.  The drift of ``B^(mu) = B + mu I t`` is added
analytically (``mu h I`` per step) so that runs with different ``mu`` can
share the Brownian increments of ``B``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidStep, TailNotConverged
from .linalg import dagger, hermitian_part, hp_coefficient
from .rng import NoiseFeed
from .sde import ModelParams, PathGrid, Trajectory, _guard, _run, simulate_hp_diffusion

__all__ = [
    "TailPolicy",
    "InfiniteResult",
    "bougerol_integral",
    "bougerol_integral_infinite",
    "dufresne_integral",
    "explicit_solution_path",
    "reconstruct_gamma",
    "gamma_driven_hp",
    "scalar_bougerol_functional",
]

_R2 = 1 / np.sqrt(2)


@dataclass(frozen=True)
class TailPolicy:
    """Truncation rule for integrals over ``[0, inf)``.

    Integration proceeds in blocks of length ``block``; it stops after the
    first block whose contribution envelope falls below ``eps``, or at
    ``max_T``.  The envelope of a block is ``block * max_k ||M_k M_k^dagger||_max``
    for matrix integrands and ``block * max_k e^{beta_k - nu t_k}`` for the
    scalar one.  (The realised block integral is a poor stopping signal:
    it can be small by cancellation while the integrand is still large.)
    """

    eps: float = 1e-6
    block: float = 1.0
    max_T: float = 40.0

    def __post_init__(self):
        if not (self.eps > 0 and self.block > 0 and self.max_T >= self.block):
            raise ValueError(f"invalid tail policy {self}")

    @classmethod
    def for_params(cls, params: ModelParams, eps: float = 1e-6, block: float = 1.0) -> "TailPolicy":
        rate = params.growth_rate
        max_T = 200.0 if rate <= 0 else float(np.clip(40.0 / rate, 10.0, 200.0))
        return cls(eps, block, max_T)

    @classmethod
    def for_scalar(cls, nu: float, eps: float = 1e-6, block: float = 1.0) -> "TailPolicy":
        return cls(eps, block, float(np.clip(40.0 / nu, 10.0, 200.0)))


@dataclass
class InfiniteResult:
    """Outcome of an infinite-horizon integral for a batch (or one replicate).

    ``converged`` is False for replicates that reached ``max_T`` with a block
    envelope still above ``eps``; such samples are flagged, not dropped.
    ``block_norms`` lists the envelope of every block, replicate by replicate.
    """

    value: np.ndarray
    T: np.ndarray
    converged: np.ndarray
    block_norms: list
    batched: bool = True

    def require_converged(self) -> np.ndarray:
        if not np.all(self.converged):
            n = int(np.size(self.converged) - np.count_nonzero(self.converged))
            raise TailNotConverged(f"{n} replicate(s) hit max_T without meeting the tail tolerance")
        return self.value

    @property
    def flagged_rate(self) -> float:
        return 1.0 - float(np.mean(self.converged))


def _feeds(noise_a, noise_b, shape, h, complex_):
    fa = NoiseFeed(noise_a, shape, h, complex_)
    fb = NoiseFeed(noise_b, shape, h, complex_)
    if fa.deterministic and not fb.deterministic:
        fa = NoiseFeed(None, shape, h, complex_, batch=fb.size if fb.batched else None)
    elif fb.deterministic and not fa.deterministic:
        fb = NoiseFeed(None, shape, h, complex_, batch=fa.size if fa.batched else None)
    if fa.size != fb.size:
        raise ValueError(f"noise sources disagree on batch size: {fa.size} vs {fb.size}")
    return fa, fb


def _hermitian_increment(dB: np.ndarray, mu: float, h: float) -> np.ndarray:
    """``(dB + dB^dagger + 2 mu h I) / sqrt(2)``."""
    H = dB + dagger(dB)
    n = H.shape[-1]
    H[..., np.arange(n), np.arange(n)] += 2 * mu * h
    return _R2 * H


def bougerol_integral(
    params: ModelParams,
    grid: PathGrid,
    noise_M=None,
    noise_B=None,
    drift_sign: int = -1,
) -> np.ndarray:
    """``int_0^T M_u ((dB^(mu) + dB^(mu)^dagger) / sqrt(2)) M_u^dagger`` with ``M = M^(drift_sign nu)``.

    Returns a Hermitian matrix, or a stack of them for batched noise.
    """
    N, h = params.N, grid.h
    fW, fB = _feeds(noise_M, noise_B, (N, N), h, True)
    a = 1.0 + drift_sign * params.nu * h
    eye = np.eye(N)
    mu = params.mu

    def step(state, k, dW, dB):
        M, acc = state[:, 0], state[:, 1]
        acc = acc + M @ _hermitian_increment(dB, mu, h) @ dagger(M)
        return np.stack([M @ (a * eye + _R2 * dW), acc], axis=1)

    R = fW.size
    state = np.zeros((R, 2, N, N), dtype=np.complex128)
    state[:, 0] = eye
    _, states, _ = _run(grid, state, [fW, fB], step, grid.steps, "bougerol_integral")
    out = hermitian_part(states[:, -1, 1])
    return out if fW.batched else out[0]


def _infinite(params, policy, h, fW, fB, integrand):
    """Shared block loop for matrix integrals of ``M^(-nu)`` over ``[0, inf)``.

    ``integrand(M, dB)`` gives the contribution of one step; ``fB`` may be None.
    """
    if not h > 0:
        raise InvalidStep(f"step must be positive, got {h}")
    N = params.N
    per_block = max(1, int(round(policy.block / h)))
    n_blocks = int(np.ceil(policy.max_T / (per_block * h) - 1e-9))
    R = fW.size
    a = 1.0 - params.nu * h
    eye = np.eye(N)
    M = np.broadcast_to(eye.astype(np.complex128), (R, N, N)).copy()
    acc = np.zeros((R, N, N), dtype=np.complex128)
    active = np.ones(R, bool)
    converged = np.zeros(R, bool)
    T = np.zeros(R)
    norms = [[] for _ in range(R)]
    for _ in range(n_blocks):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        dW = fW.select(active, per_block)[idx]
        dB = fB.select(active, per_block)[idx] if fB is not None else None
        Mi = M[idx]
        part = np.zeros_like(Mi)
        env = np.zeros(idx.size)
        for j in range(per_block):
            env = np.maximum(env, np.abs(Mi @ dagger(Mi)).max(axis=(-1, -2)))
            part += integrand(Mi, None if dB is None else dB[:, j])
            Mi = Mi @ (a * eye + _R2 * dW[:, j])
        _guard(Mi, "infinite-horizon integral")
        M[idx] = Mi
        acc[idx] += part
        T[idx] += per_block * h
        env *= per_block * h
        for i, e in zip(idx, env):
            norms[i].append(float(e))
        done = env < policy.eps
        converged[idx[done]] = True
        active[idx[done]] = False
    return hermitian_part(acc), T, converged, norms


def bougerol_integral_infinite(
    params: ModelParams,
    policy: TailPolicy | None,
    h: float,
    noise_M=None,
    noise_B=None,
) -> InfiniteResult:
    """``int_0^inf M^(-nu) ((dB^(mu) + dB^(mu)^dagger)/sqrt(2)) M^(-nu)^dagger`` truncated by ``policy``."""
    params.require_integrable()
    policy = policy or TailPolicy.for_params(params)
    N, mu = params.N, params.mu
    fW, fB = _feeds(noise_M, noise_B, (N, N), h, True)

    def integrand(M, dB):
        return M @ _hermitian_increment(dB, mu, h) @ dagger(M)

    value, T, conv, norms = _infinite(params, policy, h, fW, fB, integrand)
    return _pack(value, T, conv, norms, fW.batched)


def _pack(value, T, conv, norms, batched):
    if batched:
        return InfiniteResult(value, T, conv, norms, True)
    return InfiniteResult(value[0], T[0], conv[0], norms[0], False)


def dufresne_integral(params: ModelParams, horizon, noise_M=None, h: float | None = None):
    """``int M^(-nu) M^(-nu)^dagger dt`` as a left Riemann sum.

    ``horizon`` is a ``PathGrid`` (finite time, returns the matrix) or a
    ``TailPolicy`` (infinite time, needs ``h``, returns ``InfiniteResult``).
    """
    if not params.nu > 0:
        raise ValueError("nu must be positive")
    N = params.N
    if isinstance(horizon, PathGrid):
        grid = horizon
        fW = NoiseFeed(noise_M, (N, N), grid.h, True)
        a = 1.0 - params.nu * grid.h
        eye = np.eye(N)

        def step(state, k, dW):
            M, acc = state[:, 0], state[:, 1]
            acc = acc + grid.h * (M @ dagger(M))
            return np.stack([M @ (a * eye + _R2 * dW), acc], axis=1)

        state = np.zeros((fW.size, 2, N, N), dtype=np.complex128)
        state[:, 0] = eye
        _, states, _ = _run(grid, state, [fW], step, grid.steps, "dufresne_integral")
        out = hermitian_part(states[:, -1, 1])
        return out if fW.batched else out[0]
    if h is None:
        raise ValueError("an infinite horizon needs a step h")
    fW = NoiseFeed(noise_M, (N, N), h, True)
    value, T, conv, norms = _infinite(params, horizon, h, fW, None, lambda M, _: h * (M @ dagger(M)))
    return _pack(value, T, conv, norms, fW.batched)


def explicit_solution_path(
    params: ModelParams,
    X0: np.ndarray,
    grid: PathGrid,
    noise_M=None,
    noise_B=None,
    save_every: int = 1,
) -> Trajectory:
    """Closed-form solution of the Hua-Pickrell diffusion built from ``(W, B)``.

    ``X_t = M_t^{-1} [X0 + int_0^t M_u ((dB^(mu) + dB^(mu)^dagger)/sqrt(2)) M_u^dagger] M_t^{-dagger}``
    with ``M = M^(+nu)`` and ``M^{-1}`` from its own EM recursion on the same
    ``dW``.  The driving increments are kept in ``extras["dW"]`` and
    ``extras["dB"]`` (full grid) so ``reconstruct_gamma`` can use them.
    """
    N, h = params.N, grid.h
    fW, fB = _feeds(noise_M, noise_B, (N, N), h, True)
    c = params.nu * h
    eye = np.eye(N)
    mu = params.mu
    X0 = hermitian_part(np.asarray(X0, dtype=np.complex128))
    R = fW.size
    kept_W, kept_B = [], []

    class _Tee:
        """Records what a feed hands out."""

        def __init__(self, feed, store):
            self.feed, self.store = feed, store

        def take(self, k):
            out = self.feed.take(k)
            self.store.append(out)
            return out

    def step(state, k, dW, dB):
        M, Minv, Y = state[:, 0], state[:, 1], state[:, 2]
        Y = Y + M @ _hermitian_increment(dB, mu, h) @ dagger(M)
        M = M @ ((1 + c) * eye + _R2 * dW)
        Minv = ((1 - c) * eye - _R2 * dW) @ Minv
        X = hermitian_part(Minv @ Y @ dagger(Minv))
        return np.stack([M, Minv, Y, X], axis=1)

    state = np.zeros((R, 4, N, N), dtype=np.complex128)
    state[:, 0] = eye
    state[:, 1] = eye
    state[:, 2] = X0
    state[:, 3] = X0
    times, states, _ = _run(grid, state, [_Tee(fW, kept_W), _Tee(fB, kept_B)], step, save_every, "explicit_solution")
    X = states[:, :, 3]
    dW = np.concatenate(kept_W, axis=1)
    dB = np.concatenate(kept_B, axis=1)
    if not fW.batched:
        X, dW, dB = X[0], dW[0], dB[0]
    return Trajectory(grid, times, X, fW.batched, None, {"dW": dW, "dB": dB})


def reconstruct_gamma(path: Trajectory) -> np.ndarray:
    """Brownian increments of the diffusion form, rebuilt from ``(W, B)``.

    ``dG_k = [-dW_k X_k / sqrt(2) + dB_k / sqrt(2)] ((I + X_k^2)/2)^{-1/2}``,
    evaluated at the left point of each step.  ``path`` must come from
    :func:`explicit_solution_path` with ``save_every=1``.
    """
    X = path.states if path.batched else path.states[None]
    dW = path.extras["dW"] if path.batched else path.extras["dW"][None]
    dB = path.extras["dB"] if path.batched else path.extras["dB"][None]
    if X.shape[1] != dW.shape[1] + 1:
        raise ValueError("reconstruct_gamma needs every state of the path (save_every=1)")
    Xl = X[:, :-1]
    dG = (_R2 * (dB - dW @ Xl)) @ hp_coefficient(Xl, inverse=True)
    return dG if path.batched else dG[0]


def gamma_driven_hp(params: ModelParams, X0: np.ndarray, path: Trajectory, save_every: int = 1) -> Trajectory:
    """Euler-Maruyama of the Hua-Pickrell diffusion driven by the reconstructed increments of ``path``."""
    return simulate_hp_diffusion(params, X0, path.grid, reconstruct_gamma(path), save_every=save_every)


def scalar_bougerol_functional(
    nu: float,
    mu: float,
    horizon,
    noise_beta=None,
    noise_gamma=None,
    h: float | None = None,
):
    """``int e^{beta_t - nu t} (d gamma_t - mu dt)`` as a left-point Ito sum.

    ``beta`` is accumulated exactly from its increments, so only the time
    discretisation of the integral itself carries error.  ``horizon`` is a
    ``PathGrid`` (returns the value) or a ``TailPolicy`` (needs ``h``, returns
    ``InfiniteResult``).
    """
    if isinstance(horizon, PathGrid):
        grid = horizon
        fb, fg = _feeds(noise_beta, noise_gamma, (), grid.h, False)
        total = np.zeros(fb.size)
        beta = np.zeros(fb.size)
        t = grid.t0
        k = 0
        while k < grid.steps:
            m = min(4096, grid.steps - k)
            db, dg = fb.take(m), fg.take(m)
            path = beta[:, None] + np.concatenate([np.zeros((fb.size, 1)), np.cumsum(db[:, :-1], axis=1)], axis=1)
            tk = t + grid.h * np.arange(m)
            total += np.sum(np.exp(path - nu * tk) * (dg - mu * grid.h), axis=1)
            beta = path[:, -1] + db[:, -1]
            t += m * grid.h
            k += m
        return total if fb.batched else float(total[0])

    if not nu > 0:
        raise ValueError("an infinite horizon needs nu > 0")
    if h is None:
        raise ValueError("an infinite horizon needs a step h")
    policy = horizon
    fb, fg = _feeds(noise_beta, noise_gamma, (), h, False)
    per_block = max(1, int(round(policy.block / h)))
    n_blocks = int(np.ceil(policy.max_T / (per_block * h) - 1e-9))
    R = fb.size
    total, beta = np.zeros(R), np.zeros(R)
    T = np.zeros(R)
    active = np.ones(R, bool)
    converged = np.zeros(R, bool)
    norms = [[] for _ in range(R)]
    for _ in range(n_blocks):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        db = fb.select(active, per_block)[idx]
        dg = fg.select(active, per_block)[idx]
        path = beta[idx, None] + np.concatenate([np.zeros((idx.size, 1)), np.cumsum(db[:, :-1], axis=1)], axis=1)
        tk = T[idx, None] + h * np.arange(per_block)
        w = np.exp(path - nu * tk)
        total[idx] += np.sum(w * (dg - mu * h), axis=1)
        beta[idx] = path[:, -1] + db[:, -1]
        T[idx] += per_block * h
        env = w.max(axis=1) * per_block * h
        for i, e in zip(idx, env):
            norms[i].append(float(e))
        done = env < policy.eps
        converged[idx[done]] = True
        active[idx[done]] = False
    if not fb.batched:
        return InfiniteResult(total[0], T[0], converged[0], norms[0], False)
    return InfiniteResult(total, T, converged, norms, True)
