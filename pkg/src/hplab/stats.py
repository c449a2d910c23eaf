"""Goodness-of-fit tests and estimators for simulated batches."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import stats as sps
from scipy.special import kolmogorov

from .errors import InsufficientHorizon, InsufficientSample

__all__ = [
    "ALPHA",
    "EmpiricalSample",
    "TestReport",
    "ks_one_sample",
    "ks_two_sample",
    "lyapunov_slope",
    "CovariationSummary",
    "covariation_matrix",
    "slope_loglog",
]

ALPHA = 0.001
MIN_KS = 100


@dataclass
class EmpiricalSample:
    """Batch of scalar observations of one statistic.

    Non-finite values and values whose ``flags`` entry is true (e.g. an
    infinite-horizon integral that did not meet its tail tolerance) are
    dropped from ``values`` and counted in ``n_flagged``.
    """

    values: np.ndarray
    label: str = ""
    params_fingerprint: str = ""
    seed: int | None = None
    n_flagged: int = 0

    @classmethod
    def from_raw(cls, raw, label="", params_fingerprint="", seed=None, flags=None) -> "EmpiricalSample":
        raw = np.asarray(raw, dtype=float).ravel()
        keep = np.isfinite(raw)
        if flags is not None:
            keep &= ~np.asarray(flags, bool).ravel()
        return cls(raw[keep], label, params_fingerprint, seed, int(raw.size - keep.sum()))

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(self.values)):
            raise ValueError("EmpiricalSample values must be finite; use from_raw to filter")

    @property
    def n(self) -> int:
        return self.values.size


@dataclass
class TestReport:
    test: str
    statistic: float
    p_value: float | None
    n: tuple[int, ...]
    alpha: float = ALPHA
    seed: int | None = None
    params_fingerprint: str = ""
    label: str = ""
    metadata: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    @property
    def passed(self) -> bool:
        # threshold checks carry no p-value and store their verdict in metadata
        if self.p_value is None:
            return bool(self.metadata.get("rule_passed", False))
        return bool(self.p_value > self.alpha)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n"] = list(self.n)
        d["verdict"] = self.verdict
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _as_sample(x) -> EmpiricalSample:
    return x if isinstance(x, EmpiricalSample) else EmpiricalSample(np.asarray(x, float))


def ks_one_sample(sample, cdf: Callable[[np.ndarray], np.ndarray], alpha: float = ALPHA) -> TestReport:
    """One-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov p-value."""
    s = _as_sample(sample)
    n = s.n
    if n < MIN_KS:
        raise InsufficientSample(f"KS needs at least {MIN_KS} values, got {n}")
    x = np.sort(s.values)
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    D = max(np.max(i / n - F), np.max(F - (i - 1) / n))
    p = float(kolmogorov(np.sqrt(n) * D))
    return TestReport("ks_1samp", float(D), p, (n,), alpha, s.seed, s.params_fingerprint, s.label)


def ks_two_sample(a, b, alpha: float = ALPHA) -> TestReport:
    """Two-sample Kolmogorov-Smirnov test; p-value at effective size ``n m / (n + m)``."""
    a, b = _as_sample(a), _as_sample(b)
    n, m = a.n, b.n
    if min(n, m) < MIN_KS:
        raise InsufficientSample(f"KS needs at least {MIN_KS} values per sample, got {n} and {m}")
    xa, xb = np.sort(a.values), np.sort(b.values)
    grid = np.concatenate([xa, xb])
    Fa = np.searchsorted(xa, grid, side="right") / n
    Fb = np.searchsorted(xb, grid, side="right") / m
    D = float(np.max(np.abs(Fa - Fb)))
    en = n * m / (n + m)
    p = float(kolmogorov(np.sqrt(en) * D))
    label = f"{a.label} vs {b.label}" if (a.label or b.label) else ""
    return TestReport("ks_2samp", D, p, (n, m), alpha, a.seed, a.params_fingerprint, label)


def _ols_slope(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares slopes of ``y[..., :]`` against ``t``."""
    tc = t - t.mean()
    return (y - y.mean(axis=-1, keepdims=True)) @ tc / (tc @ tc)


def lyapunov_slope(
    times: np.ndarray,
    paths: np.ndarray,
    burn_in: float = 0.25,
    level: float = 0.95,
    min_batches: int = 20,
) -> tuple[float, tuple[float, float]]:
    """Growth rate of a log-coordinate path and a confidence interval.

    Parameters
    ----------
    times : (T,) array
    paths : (T,) or (R, T) array
        Typically ``delta_N(t)``, the largest log squared singular value.
    burn_in : float
        Fraction of the horizon discarded before fitting.

    With ``R >= min_batches`` replicates the slope is the mean of per-replicate
    OLS slopes and the interval a Student-t interval over replicates.  With
    fewer replicates the post-burn-in window is cut into ``min_batches``
    contiguous batches and the interval comes from their slopes.
    """
    if not 0 <= burn_in < 1:
        raise ValueError("burn_in is a fraction in [0, 1)")
    times = np.asarray(times, float)
    paths = np.atleast_2d(np.asarray(paths, float))
    t0 = times[0] + burn_in * (times[-1] - times[0])
    keep = times >= t0 - 1e-12
    t, y = times[keep], paths[:, keep]
    if t[-1] - t[0] < 10:
        raise InsufficientHorizon(f"post burn-in horizon {t[-1] - t[0]:.3g} < 10")
    if y.shape[0] >= min_batches:
        slopes = _ols_slope(t, y)
    else:
        edges = np.linspace(0, t.size, min_batches + 1).astype(int)
        if np.min(np.diff(edges)) < 3:
            raise InsufficientHorizon("too few saved times to form batch means")
        slopes = np.concatenate([_ols_slope(t[lo:hi], y[:, lo:hi]) for lo, hi in zip(edges[:-1], edges[1:])])
    m = float(np.mean(slopes))
    half = float(sps.t.ppf(0.5 + level / 2, slopes.size - 1) * np.std(slopes, ddof=1) / np.sqrt(slopes.size))
    return m, (m - half, m + half)


@dataclass
class CovariationSummary:
    """Per-step averages of increment products, scaled by ``1/dt``.

    ``conj[i, j, k, l]`` estimates ``E[dG_ij conj(dG_kl)] / dt`` and ``plain``
    estimates ``E[dG_ij dG_kl] / dt``; ``*_se`` are their standard errors.
    """

    conj: np.ndarray
    conj_se: np.ndarray
    plain: np.ndarray
    plain_se: np.ndarray
    n: int

    def expected_conj(self) -> np.ndarray:
        N = self.conj.shape[0]
        eye = np.eye(N)
        return 2.0 * np.einsum("ik,jl->ijkl", eye, eye)

    def max_z(self) -> tuple[float, float]:
        """Largest deviation from ``2 delta delta`` and from ``0``, in standard errors."""
        with np.errstate(divide="ignore", invalid="ignore"):
            dc = np.abs(self.conj - self.expected_conj())
            zc = np.where(dc == 0, 0.0, dc / self.conj_se)
            dp = np.abs(self.plain)
            zp = np.where(dp == 0, 0.0, dp / self.plain_se)
        return float(np.max(zc)), float(np.max(zp))


def covariation_matrix(increments: np.ndarray, dt: float, min_count: int = 1000) -> CovariationSummary:
    """Estimate the four-index covariation of complex matrix increments.

    ``increments`` has shape ``(..., N, N)``; all leading axes are pooled.
    Standard errors treat the pooled products as independent draws, which
    holds for martingale increments on disjoint steps.
    """
    inc = np.asarray(increments)
    N = inc.shape[-1]
    flat = inc.reshape(-1, N, N)
    n = flat.shape[0]
    if n < min_count:
        raise InsufficientSample(f"need at least {min_count} increments, got {n}")
    conj = np.einsum("sij,skl->sijkl", flat, np.conj(flat)) / dt
    plain = np.einsum("sij,skl->sijkl", flat, flat) / dt

    def mean_se(z):
        mean = z.mean(axis=0)
        # complex standard error: spread of real and imaginary parts combined
        se = np.sqrt((np.var(z.real, axis=0, ddof=1) + np.var(z.imag, axis=0, ddof=1)) / n)
        return mean, se

    c, cse = mean_se(conj)
    p, pse = mean_se(plain)
    return CovariationSummary(c, cse, p, pse, n)


def slope_loglog(h: np.ndarray, err: np.ndarray) -> float:
    """Least-squares slope of ``log err`` against ``log h``."""
    return float(np.polyfit(np.log(np.asarray(h, float)), np.log(np.asarray(err, float)), 1)[0])
