"""Euler-Maruyama integrators for the matrix and spectral processes.

Processes
---------
``simulate_exp_bm``
    ``dM = M dW / sqrt(2) + (+/-nu) M dt`` from ``M_0 = I``.
``simulate_inverse_pair``
    ``M`` together with ``d(M^-1) = -dW M^-1 / sqrt(2) - nu M^-1 dt`` on the same noise.
``simulate_hp_diffusion``
    ``dX = dG S + S dG^dagger + [(-N - 2 Re s) X + (2 Im s + Tr X) I] dt`` with
    ``S = sqrt((I + X^2) / 2)``.
``simulate_eigen_system``
    The ordered spectrum of the previous diffusion, simulated directly.
``simulate_singular_log``
    Logarithms of the squared singular values of ``M`` with drift ``-nu``.
``simulate_scalar``
    ``sinh`` of a Brownian motion, and the one-dimensional diffusion whose
    generator is ``(w^2 + 1) d^2/dw^2 + [(2 - 2N - 2 Re s) w + 2 Im s] d/dw``.

Every simulator takes a ``noise`` argument understood by
:class:`hplab.rng.NoiseFeed`: ``None`` (noise-free ODE limit), one stream, a
list of streams (batch of replicates, leading axis on output) or an array of
precomputed increments (for coupling several schemes to one Brownian path).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import CollisionAbort, InvalidStep, SimulationOverflow
from .linalg import dagger, eigh, hermitian_part, hp_coefficient
from .rng import NoiseFeed

__all__ = [
    "ModelParams",
    "PathGrid",
    "Trajectory",
    "OVERFLOW_LIMIT",
    "hp_drift",
    "eigen_drift",
    "singular_log_drift",
    "spectral_drift_from_matrix",
    "simulate_exp_bm",
    "simulate_inverse_pair",
    "simulate_hp_diffusion",
    "simulate_eigen_system",
    "simulate_singular_log",
    "simulate_scalar",
    "time_reversed",
]

OVERFLOW_LIMIT = 1e150
MAX_HALVINGS = 20
_BLOCK = 256


@dataclass(frozen=True)
class ModelParams:
    """Matrix size ``N`` and the complex parameter ``s = s_re + i s_im``.

    ``nu = s_re + N/2`` and ``mu = sqrt(2) s_im`` are always derived, never stored.
    """

    N: int
    s_re: float = 0.0
    s_im: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")

    @classmethod
    def from_drifts(cls, N: int, nu: float, mu: float = 0.0) -> "ModelParams":
        return cls(N, nu - N / 2, mu / np.sqrt(2))

    @property
    def nu(self) -> float:
        return self.s_re + self.N / 2

    @property
    def mu(self) -> float:
        return np.sqrt(2) * self.s_im

    @property
    def s(self) -> complex:
        return complex(self.s_re, self.s_im)

    @property
    def growth_rate(self) -> float:
        """Upper bound on the exponential decay rate of ``M^(-nu)``: ``2 nu - N + 1``."""
        return 2 * self.nu - self.N + 1

    def require_integrable(self) -> None:
        if not self.s_re > -0.5:
            raise ValueError(f"Re(s) must exceed -1/2 for infinite-horizon quantities, got {self.s_re}")

    def fingerprint(self) -> str:
        return f"N={self.N},s={self.s_re!r}{self.s_im:+}j"


@dataclass(frozen=True)
class PathGrid:
    """Uniform time grid ``t0, t0 + h, ..., T``."""

    T: float
    steps: int
    t0: float = 0.0

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise InvalidStep(f"steps must be a positive integer, got {self.steps}")
        if not self.T > self.t0:
            raise InvalidStep(f"horizon T={self.T} must exceed t0={self.t0}")

    @classmethod
    def from_step(cls, T: float, h: float, t0: float = 0.0) -> "PathGrid":
        if not h > 0:
            raise InvalidStep(f"step must be positive, got {h}")
        steps = int(round((T - t0) / h))
        return cls(t0 + steps * h, steps, t0)

    @property
    def h(self) -> float:
        return (self.T - self.t0) / self.steps

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.steps + 1)

    def refine(self, factor: int = 2) -> "PathGrid":
        return PathGrid(self.T, self.steps * factor, self.t0)


@dataclass
class Trajectory:
    """Saved states of a simulated process.

    ``states`` has the time axis first, or second when ``batched`` (replicates
    first).  ``increments`` holds the driving Brownian increments when they
    were retained, with the same batching convention.
    """

    grid: PathGrid
    times: np.ndarray
    states: np.ndarray
    batched: bool = False
    increments: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @property
    def terminal(self) -> np.ndarray:
        return self.states[:, -1] if self.batched else self.states[-1]

    @property
    def initial(self) -> np.ndarray:
        return self.states[:, 0] if self.batched else self.states[0]


def _guard(state: np.ndarray, what: str, limit: float = OVERFLOW_LIMIT) -> None:
    mag = np.abs(state)
    if not np.all(np.isfinite(mag)) or mag.max() > limit:
        axes = tuple(range(1, state.ndim))
        worst = np.nanargmax(np.where(np.isfinite(mag), mag, np.inf).max(axis=axes))
        raise SimulationOverflow(f"{what}: |entry| exceeded {limit:g} in replicate {worst}")


def _run(
    grid: PathGrid,
    state: np.ndarray,
    feeds: Sequence[NoiseFeed],
    step: Callable[..., np.ndarray],
    save_every: int,
    what: str,
    retain_noise: bool = False,
    guard: bool = True,
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Drive ``state = step(state, k, *increments_k)`` over the grid.

    Returns saved times, saved states stacked on axis 1 and, if requested, the
    increments of the first feed stacked on axis 1.
    """
    if save_every < 1:
        raise ValueError("save_every must be >= 1")
    steps = grid.steps
    saved = [state.copy()]
    saved_idx = [0]
    kept = []
    k = 0
    while k < steps:
        m = min(_BLOCK, steps - k)
        blocks = [f.take(m) for f in feeds]
        if retain_noise:
            kept.append(blocks[0])
        for j in range(m):
            state = step(state, k, *[b[:, j] for b in blocks])
            k += 1
            if k % save_every == 0 or k == steps:
                saved.append(state.copy())
                saved_idx.append(k)
        if guard:
            _guard(state, what)
    times = grid.t0 + grid.h * np.asarray(saved_idx, dtype=float)
    noise = np.concatenate(kept, axis=1) if retain_noise else None
    return times, np.stack(saved, axis=1), noise


def _finish(grid, times, states, batched, noise=None, **extras) -> Trajectory:
    if not batched:
        states = states[0]
        noise = None if noise is None else noise[0]
    return Trajectory(grid, times, states, batched, noise, extras)


def _identity_batch(R: int, N: int) -> np.ndarray:
    return np.broadcast_to(np.eye(N, dtype=np.complex128), (R, N, N)).copy()


def simulate_exp_bm(
    params: ModelParams,
    drift_sign: int,
    grid: PathGrid,
    noise=None,
    retain_noise: bool = False,
    save_every: int = 1,
) -> Trajectory:
    """Matrix exponential of complex Brownian motion with drift ``drift_sign * nu``.

    EM step: ``M_{k+1} = M_k (I (1 + drift_sign nu h) + dW_k / sqrt(2))``.
    """
    if drift_sign not in (1, -1):
        raise ValueError("drift_sign must be +1 or -1")
    N, h = params.N, grid.h
    feed = NoiseFeed(noise, (N, N), h, complex_=True)
    a = 1.0 + drift_sign * params.nu * h
    eye = np.eye(N)
    r2 = 1 / np.sqrt(2)

    def step(M, k, dW):
        return M @ (a * eye + r2 * dW)

    M0 = _identity_batch(feed.size, N)
    times, states, kept = _run(grid, M0, [feed], step, save_every, "exp_bm", retain_noise)
    return _finish(grid, times, states, feed.batched, kept)


def simulate_inverse_pair(
    params: ModelParams,
    grid: PathGrid,
    noise=None,
    drift_sign: int = 1,
    retain_noise: bool = False,
    save_every: int = 1,
) -> tuple[Trajectory, Trajectory]:
    """Simulate ``M`` and its inverse dynamics driven by one and the same ``dW``."""
    N, h = params.N, grid.h
    feed = NoiseFeed(noise, (N, N), h, complex_=True)
    c = drift_sign * params.nu * h
    eye = np.eye(N)
    r2 = 1 / np.sqrt(2)

    def step(pair, k, dW):
        M, Minv = pair[:, 0], pair[:, 1]
        return np.stack([M @ ((1 + c) * eye + r2 * dW), ((1 - c) * eye - r2 * dW) @ Minv], axis=1)

    R = feed.size
    pair0 = np.stack([_identity_batch(R, N), _identity_batch(R, N)], axis=1)
    times, states, kept = _run(grid, pair0, [feed], step, save_every, "inverse_pair", retain_noise)
    return (
        _finish(grid, times, states[:, :, 0], feed.batched, kept),
        _finish(grid, times, states[:, :, 1], feed.batched, kept),
    )


def time_reversed(path: Trajectory) -> Trajectory:
    """``N_t = M_T^{-1} M_{T-t}`` on the saved times of a full (save_every=1) path."""
    states = path.states if path.batched else path.states[None]
    MT_inv = np.linalg.inv(states[:, -1])
    rev = np.einsum("rij,rtjk->rtik", MT_inv, states[:, ::-1])
    times = path.times[-1] - path.times[::-1]
    return _finish(path.grid, times, rev, path.batched)


def hp_drift(X: np.ndarray, params: ModelParams) -> np.ndarray:
    """``(-N - 2 Re s) X + (2 Im s + Tr X) I`` for Hermitian ``X`` (batched)."""
    N = params.N
    tr = np.trace(X, axis1=-2, axis2=-1).real
    out = (-N - 2 * params.s_re) * X
    diag = np.einsum("...ii->...i", out)
    diag += (2 * params.s_im + tr)[..., None]
    return out


def _hp_step(X: np.ndarray, dG: np.ndarray, params: ModelParams, h: float) -> np.ndarray:
    S = hp_coefficient(X)
    G = dG @ S
    return hermitian_part(X + G + dagger(G) + h * hp_drift(X, params))


def simulate_hp_diffusion(
    params: ModelParams,
    X0: np.ndarray,
    grid: PathGrid,
    noise=None,
    retain_noise: bool = False,
    save_every: int = 1,
) -> Trajectory:
    """Euler-Maruyama for the Hua-Pickrell matrix diffusion.

    ``X0`` may be one Hermitian matrix (broadcast over replicates) or a stack
    with one matrix per replicate.  ``noise`` drives the complex Brownian
    matrix in the diffusion term.
    """
    N, h = params.N, grid.h
    feed = NoiseFeed(noise, (N, N), h, complex_=True)
    X0 = hermitian_part(np.asarray(X0, dtype=np.complex128))
    if X0.shape[-2:] != (N, N):
        raise ValueError(f"X0 has shape {X0.shape}, expected ({N}, {N})")
    X = np.broadcast_to(X0, (feed.size, N, N)).copy()

    def step(X, k, dG):
        return _hp_step(X, dG, params, h)

    times, states, kept = _run(grid, X, [feed], step, save_every, "hp_diffusion", retain_noise)
    return _finish(grid, times, states, feed.batched, kept)


def _pair_matrix(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise differences ``x_i - x_j`` and a mask of the pairs that interact.

    Exactly tied pairs are excluded: their interaction is taken as zero, the
    symmetric value, which is only reached from a degenerate noise-free start.
    """
    d = x[..., :, None] - x[..., None, :]
    return d, d != 0


def eigen_drift(x: np.ndarray, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Base drift and pair interaction of the ordered-spectrum system."""
    N = params.N
    base = 2 * params.s_im + (2 - 2 * N - 2 * params.s_re) * x
    d, live = _pair_matrix(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        inter = np.where(live, 2 * (1 + x[..., :, None] ** 2) / d, 0.0).sum(axis=-1)
    return base, inter


def spectral_drift_from_matrix(x: np.ndarray, params: ModelParams) -> np.ndarray:
    """Eigenvalue drift rebuilt from the matrix SDE at ``X = diag(x)``.

    Diagonal of the matrix drift plus the second-order perturbation term
    ``sum_j E|dX_ij|^2 / dt / (x_i - x_j)`` with ``E|dX_ij|^2 = (2 + x_i^2 + x_j^2) dt``.
    Agrees with the sum of :func:`eigen_drift`'s two parts for distinct ``x``.
    """
    x = np.asarray(x, dtype=float)
    X = np.zeros(x.shape + (x.shape[-1],))
    X[..., np.arange(x.shape[-1]), np.arange(x.shape[-1])] = x
    diag = np.einsum("...ii->...i", hp_drift(X, params))
    d, live = _pair_matrix(x)
    q = 2 + x[..., :, None] ** 2 + x[..., None, :] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        ito = np.where(live, q / d, 0.0).sum(axis=-1)
    return diag + ito


def singular_log_drift(delta: np.ndarray, nu: float) -> tuple[np.ndarray, np.ndarray]:
    """Base drift ``-2 nu`` and the ``coth((d_i - d_k)/2)`` interaction."""
    d, live = _pair_matrix(delta)
    with np.errstate(divide="ignore", invalid="ignore"):
        inter = np.where(live, 1.0 / np.tanh(0.5 * d), 0.0).sum(axis=-1)
    return np.full_like(delta, -2.0 * nu), inter


def _gaps(x: np.ndarray) -> np.ndarray:
    """For each coordinate, the distance to its nearest neighbour (inf if N == 1)."""
    g = np.diff(x, axis=-1)
    inf = np.full(x.shape[:-1] + (1,), np.inf)
    return np.minimum(np.concatenate([inf, g], axis=-1), np.concatenate([g, inf], axis=-1))


def _acceptable(x_old, x_new, inter, h) -> np.ndarray:
    """Strict ordering kept, and no interaction push larger than half the local gap."""
    old_d, new_d = np.diff(x_old, axis=-1), np.diff(x_new, axis=-1)
    # tied pairs (noise-free degenerate start) may stay tied
    ordered = np.all((new_d > 0) | ((old_d == 0) & (new_d >= 0)), axis=-1)
    gaps = _gaps(x_old)
    tame = np.all((gaps == 0) | (np.abs(inter) * h <= 0.5 * gaps), axis=-1)
    return ordered & tame


def _ordered_step(x, dB, h, drift_fn, sigma_fn, what, depth=0):
    """EM step for an ordered particle system with local step halving.

    A rejected step is split into two halves, each driven by half of the
    Brownian increment, and retried recursively up to ``MAX_HALVINGS`` times.
    """
    base, inter = drift_fn(x)
    x_new = x + (base + inter) * h + sigma_fn(x) * dB
    ok = _acceptable(x, x_new, inter, h)
    if np.all(ok):
        return x_new
    if depth >= MAX_HALVINGS:
        raise CollisionAbort(f"{what}: ordering could not be kept after {MAX_HALVINGS} halvings")
    bad = np.flatnonzero(~ok)
    xb, db = x[bad], 0.5 * dB[bad]
    xb = _ordered_step(xb, db, 0.5 * h, drift_fn, sigma_fn, what, depth + 1)
    xb = _ordered_step(xb, db, 0.5 * h, drift_fn, sigma_fn, what, depth + 1)
    x_new[bad] = xb
    return x_new


def _degenerate(x: np.ndarray) -> bool:
    return x.shape[-1] > 1 and bool(np.any(np.diff(x, axis=-1) == 0))


def simulate_eigen_system(
    params: ModelParams,
    x0: np.ndarray,
    grid: PathGrid,
    noise=None,
    save_every: int = 1,
) -> Trajectory:
    """EM for ``dx_i = sqrt(2(1+x_i^2)) db_i + (2 Im s + (2-2N-2 Re s) x_i + sum_j 2(1+x_i^2)/(x_i-x_j)) dt``.

    A start with tied coordinates (the degenerate point) is left through one
    EM step of the matrix diffusion from ``diag(x0)``, which draws one complex
    ``N x N`` increment from each stream before the real increments begin.
    """
    N, h = params.N, grid.h
    x0 = np.asarray(x0, dtype=float)
    if x0.shape[-1] != N:
        raise ValueError(f"x0 must have {N} coordinates")
    if np.any(np.diff(x0, axis=-1) < 0):
        raise ValueError("x0 must be ascending")
    feed = NoiseFeed(noise, (N,), h, complex_=False)
    x = np.broadcast_to(x0, (feed.size, N)).copy()
    grid_rest = grid
    first = None
    if _degenerate(x) and not feed.deterministic:
        if isinstance(noise, np.ndarray):
            raise ValueError("a degenerate start needs stream noise, not precomputed increments")
        mfeed = NoiseFeed(noise, (N, N), h, complex_=True)
        X = np.zeros((feed.size, N, N), dtype=np.complex128)
        X[:, np.arange(N), np.arange(N)] = x
        first = x.copy()
        x = np.linalg.eigvalsh(_hp_step(X, mfeed.take(1)[:, 0], params, h))
        feed = NoiseFeed(noise, (N,), h, complex_=False)
        grid_rest = PathGrid(grid.T, grid.steps - 1, grid.t0 + h) if grid.steps > 1 else None

    drift_fn = lambda y: eigen_drift(y, params)  # noqa: E731
    sigma_fn = lambda y: np.sqrt(2 * (1 + y * y))  # noqa: E731

    def step(x, k, dB):
        return _ordered_step(x, dB, h, drift_fn, sigma_fn, "eigen_system")

    return _spliced(grid, grid_rest, first, x, feed, step, save_every, "eigen_system")


def _spliced(grid, grid_rest, first, x, feed, step, save_every, what) -> Trajectory:
    """Run the remainder of a path whose first step was taken separately."""
    if first is None:
        times, states, _ = _run(grid, x, [feed], step, save_every, what)
        return _finish(grid, times, states, feed.batched)
    if grid_rest is None:
        states = np.stack([first, x], axis=1)
        return _finish(grid, grid.times, states, feed.batched)
    # save indices are counted on the full grid: shift by the one step taken
    times, states, _ = _run(grid_rest, x, [feed], step, 1, what)
    full_times = np.concatenate([[grid.t0], times])
    full_states = np.concatenate([first[:, None], states], axis=1)
    keep = np.zeros(len(full_times), bool)
    keep[::save_every] = True
    keep[-1] = True
    return _finish(grid, full_times[keep], full_states[:, keep], feed.batched)


def simulate_singular_log(
    params: ModelParams,
    grid: PathGrid,
    noise=None,
    save_every: int = 1,
) -> Trajectory:
    """Log squared singular values ``delta_1 <= ... <= delta_N`` of ``M^(-nu)``.

    EM for ``d delta_i = sqrt(2) db_i + [-2 nu + sum_k coth((delta_i - delta_k)/2)] dt``
    from ``delta = 0``.  Since ``M_0 = I`` is a degenerate start, the first step
    is taken on the matrix itself (one complex ``N x N`` increment per stream)
    and the log-spectrum of ``M_h M_h^dagger`` seeds the EM recursion.
    """
    N, h, nu = params.N, grid.h, params.nu
    feed = NoiseFeed(noise, (N,), h, complex_=False)
    delta = np.zeros((feed.size, N))
    grid_rest = grid
    first = None
    if N > 1 and not feed.deterministic:
        if isinstance(noise, np.ndarray):
            raise ValueError("the degenerate start needs stream noise, not precomputed increments")
        mfeed = NoiseFeed(noise, (N, N), h, complex_=True)
        M = (1 - nu * h) * np.eye(N) + mfeed.take(1)[:, 0] / np.sqrt(2)
        first = delta.copy()
        delta = np.log(np.linalg.eigvalsh(M @ dagger(M)))
        feed = NoiseFeed(noise, (N,), h, complex_=False)
        grid_rest = PathGrid(grid.T, grid.steps - 1, grid.t0 + h) if grid.steps > 1 else None

    drift_fn = lambda y: singular_log_drift(y, nu)  # noqa: E731
    sigma_fn = lambda y: np.sqrt(2.0)  # noqa: E731

    def step(d, k, dB):
        return _ordered_step(d, dB, h, drift_fn, sigma_fn, "singular_log")

    return _spliced(grid, grid_rest, first, delta, feed, step, save_every, "singular_log")


def simulate_scalar(
    kind: str,
    params: ModelParams | None,
    x0: float,
    grid: PathGrid,
    noise=None,
    retain_noise: bool = False,
    save_every: int = 1,
) -> Trajectory:
    """Scalar diffusions.

    ``kind="sinh_bougerol"``: ``dx = sqrt(1 + x^2) db + x/2 dt`` (the law of
    ``sinh`` of a Brownian motion started at ``asinh(x0)``).

    ``kind="pearson_1d"``: ``dw = sqrt(2 (w^2 + 1)) db + [(2 - 2N - 2 Re s) w + 2 Im s] dt``.
    """
    h = grid.h
    if kind == "sinh_bougerol":

        def step(x, k, db):
            return x + np.sqrt(1 + x * x) * db + 0.5 * x * h

    elif kind == "pearson_1d":
        if params is None:
            raise ValueError("pearson_1d needs ModelParams")
        a = 2 - 2 * params.N - 2 * params.s_re
        b = 2 * params.s_im

        def step(x, k, db):
            return x + np.sqrt(2 * (1 + x * x)) * db + (a * x + b) * h

    else:
        raise ValueError(f"unknown scalar process {kind!r}")
    feed = NoiseFeed(noise, (), h, complex_=False)
    x = np.full(feed.size, x0, dtype=float) if np.ndim(x0) == 0 else np.asarray(x0, float).copy()
    if x.shape != (feed.size,):
        raise ValueError(f"x0 must be a scalar or have {feed.size} entries")
    times, states, kept = _run(grid, x, [feed], step, save_every, kind, retain_noise)
    return _finish(grid, times, states, feed.batched, kept)
