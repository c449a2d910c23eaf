"""Densities of the target laws, normalised by quadrature.

One-dimensional laws on the real line all belong to the family

    p(x) ∝ (1 + x^2)^(-a) * exp(c * atan(x)),    a > 1/2,

which covers the Pearson type IV law of the scalar functional, the ``N = 1``
Hua-Pickrell eigenvalue law and the reversible measure of the one-dimensional
spectral diffusion.  Substituting ``x = tan(theta)`` maps it to

    exp(c * theta) * cos(theta)^(2a - 2)    on (-pi/2, pi/2),

a bounded integrand when ``a >= 1`` and an integrable algebraic endpoint
singularity otherwise; QUADPACK's algebraic weight handles both.

Spectral densities for ``N >= 2`` are evaluated unnormalised only.
"""

from __future__ import annotations

from functools import cached_property, lru_cache

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .errors import NormalizationFailure
from .linalg import eigh
from .rng import RngStream

__all__ = [
    "Density1D",
    "hp_matrix_logdensity",
    "hp_eigen_logdensity",
    "pearson4_pdf",
    "reversible_m_pdf",
    "hp_eigen_1d_density",
    "cdf_1d",
]

_HALF_PI = 0.5 * np.pi
_QUAD = dict(epsabs=1e-14, epsrel=1e-12, limit=200)
_TABLE_CELLS = 1 << 14


def _unit_log_weight(x, s_re, s_im, N):
    return -(s_re + N) * np.log1p(np.square(x)) + 2 * s_im * np.arctan2(x, 1.0)


def hp_matrix_logdensity(X: np.ndarray, s: complex) -> float | np.ndarray:
    """Unnormalised log-density of the Hua-Pickrell law on Hermitian matrices.

    ``log det(I+iX)^(-s-N) det(I-iX)^(-conj(s)-N)`` is evaluated in its real
    eigenvalue form, ``sum_i [-(Re s + N) log(1 + l_i^2) + 2 Im s * arg(1 + i l_i)]``,
    which never takes a complex power.
    """
    s = complex(s)
    lam, _ = eigh(np.asarray(X))
    N = lam.shape[-1]
    return _unit_log_weight(lam, s.real, s.imag, N).sum(axis=-1)


def hp_eigen_logdensity(x: np.ndarray, s: complex) -> float:
    """Unnormalised log-density of the ordered Hua-Pickrell spectrum.

    Returns ``-inf`` when ``x`` is not strictly ascending.
    """
    s = complex(s)
    x = np.asarray(x, dtype=float)
    N = x.shape[-1]
    gaps = x[None, :] - x[:, None]
    upper = gaps[np.triu_indices(N, 1)]
    if np.any(upper <= 0):
        return -np.inf
    return 2 * np.log(upper).sum() + _unit_log_weight(x, s.real, s.imag, N).sum()


def _alg_factor(theta: np.ndarray) -> np.ndarray:
    """``cos(theta) / ((pi/2 + theta)(pi/2 - theta))``: smooth and positive on the closed interval."""
    theta = np.asarray(theta, dtype=float)
    left = np.sinc((_HALF_PI + theta) / np.pi) / (_HALF_PI - theta)
    right = np.sinc((_HALF_PI - theta) / np.pi) / (_HALF_PI + theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(theta < 0, left, right)


class Density1D:
    """A normalised one-dimensional density.

    Parameters
    ----------
    kind : {"pearson4", "hp_eigen_1d", "reversible_m", "gamma"}
        ``pearson4``: params ``(nu, mu)``, ``∝ exp(-2 mu atan x) (1+x^2)^(-nu-1/2)``.
        ``hp_eigen_1d``: params ``(s_re, s_im)``, the ``N = 1`` eigenvalue law.
        ``reversible_m``: params ``(s_re, s_im, N)``,
        ``∝ (1+w^2)^(-Re s - N) exp(2 Im s arg(1 + i w))``.
        ``gamma``: params ``(k,)``, ``∝ x^(k-1) e^(-x)`` on ``(0, inf)``.
    """

    KINDS = ("pearson4", "hp_eigen_1d", "reversible_m", "gamma")

    def __init__(self, kind: str, params: tuple):
        if kind not in self.KINDS:
            raise ValueError(f"unknown density kind {kind!r}")
        self.kind = kind
        self.params = tuple(float(p) for p in params)
        if kind == "gamma":
            (k,) = self.params
            if not k > 0:
                raise ValueError("gamma shape must be positive")
            self.support = (0.0, np.inf)
            return
        if kind == "pearson4":
            nu, mu = self.params
            if not nu > 0:
                raise ValueError("pearson4 needs nu > 0")
            self.a, self.c = nu + 0.5, -2 * mu
        elif kind == "hp_eigen_1d":
            s_re, s_im = self.params
            self.a, self.c = s_re + 1, 2 * s_im
        else:
            s_re, s_im, N = self.params
            self.a, self.c = s_re + N, 2 * s_im
        if not self.a > 0.5:
            raise ValueError(f"{kind}{self.params} is not integrable on the real line")
        self.support = (-np.inf, np.inf)

    def __repr__(self) -> str:
        return f"Density1D({self.kind!r}, {self.params})"

    # -- unnormalised pieces -------------------------------------------------

    def log_unnormalized(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "gamma":
            (k,) = self.params
            with np.errstate(divide="ignore", invalid="ignore"):
                out = (k - 1) * np.log(x) - x
            return np.where(x > 0, out, -np.inf)
        return -self.a * np.log1p(x * x) + self.c * np.arctan(x)

    @property
    def _alpha(self) -> float:
        return 2 * self.a - 2

    def _theta_smooth(self, theta):
        """Integrand in theta with the endpoint factors ``(pi/2 -/+ theta)^alpha`` removed."""
        return np.exp(self.c * theta) * _alg_factor(theta) ** self._alpha

    def _theta_integral(self, lo: float, hi: float) -> float:
        """Integral of ``exp(c t) cos(t)^alpha`` over ``[lo, hi]`` within ``[-pi/2, pi/2]``."""
        alpha = self._alpha
        at_lo = lo <= -_HALF_PI
        at_hi = hi >= _HALF_PI
        lo, hi = max(lo, -_HALF_PI), min(hi, _HALF_PI)
        if hi <= lo:
            return 0.0

        def f(t):
            v = self._theta_smooth(t)
            if not at_lo:
                v = v * (_HALF_PI + t) ** alpha
            if not at_hi:
                v = v * (_HALF_PI - t) ** alpha
            return v

        wvar = (alpha if at_lo else 0.0, alpha if at_hi else 0.0)
        with np.errstate(all="ignore"):
            if wvar == (0.0, 0.0):
                val, err = integrate.quad(f, lo, hi, **_QUAD)
            else:
                val, err = integrate.quad(f, lo, hi, weight="alg", wvar=wvar, **_QUAD)
        if not np.isfinite(val) or err > 1e-9 * max(abs(val), 1e-300) + 1e-13:
            raise NormalizationFailure(f"{self!r}: quadrature error {err:.2e} on [{lo}, {hi}]")
        return val

    # -- normalisation --------------------------------------------------------

    @cached_property
    def log_norm(self) -> float:
        """Log of the integral of the unnormalised density, by quadrature."""
        if self.kind == "gamma":
            (k,) = self.params
            val, err = integrate.quad(lambda x: np.exp(self.log_unnormalized(x)), 0, np.inf, **_QUAD)
            if not np.isfinite(val) or err > 1e-9 * val:
                raise NormalizationFailure(f"{self!r}: quadrature error {err:.2e}")
            return float(np.log(val))
        return float(np.log(self._theta_integral(-_HALF_PI, _HALF_PI)))

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.log_unnormalized(x) - self.log_norm)

    def logpdf(self, x) -> np.ndarray:
        return self.log_unnormalized(x) - self.log_norm

    def _cdf_scalar(self, x: float) -> float:
        if np.isnan(x):
            return np.nan
        if self.kind == "gamma":
            if x <= 0:
                return 0.0
            if np.isinf(x):
                return 1.0
            f = lambda t: np.exp(self.log_unnormalized(t) - self.log_norm)  # noqa: E731
            (k,) = self.params
            if x <= max(k - 1, 0) + 1:
                val, _ = integrate.quad(f, 0, x, **_QUAD)
                return float(np.clip(val, 0, 1))
            val, _ = integrate.quad(f, x, np.inf, **_QUAD)
            return float(np.clip(1 - val, 0, 1))
        theta = np.arctan(x)
        Z = np.exp(self.log_norm)
        if theta <= 0:
            return float(np.clip(self._theta_integral(-_HALF_PI, theta) / Z, 0, 1))
        return float(np.clip(1 - self._theta_integral(theta, _HALF_PI) / Z, 0, 1))

    def cdf(self, x) -> np.ndarray | float:
        """Cumulative distribution function, one quadrature per point."""
        if np.ndim(x) == 0:
            return self._cdf_scalar(float(x))
        x = np.asarray(x, dtype=float)
        return np.vectorize(self._cdf_scalar, otypes=[float])(x)

    # -- sampling --------------------------------------------------------------

    @cached_property
    def _table(self) -> tuple[np.ndarray, np.ndarray]:
        """CDF tabulated in theta; interior cells by 10-point Gauss-Legendre."""
        if self.kind == "gamma":
            raise NotImplementedError("tabulated sampling is for real-line densities")
        edges = np.linspace(-_HALF_PI, _HALF_PI, _TABLE_CELLS + 1)
        nodes, weights = np.polynomial.legendre.leggauss(10)
        lo, hi = edges[:-1, None], edges[1:, None]
        t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes
        with np.errstate(all="ignore"):
            vals = np.exp(self.c * t) * np.cos(t) ** self._alpha
        cells = 0.5 * (hi[:, 0] - lo[:, 0]) * (vals @ weights)
        cells[0] = self._theta_integral(edges[0], edges[1])
        cells[-1] = self._theta_integral(edges[-2], edges[-1])
        F = np.concatenate([[0.0], np.cumsum(cells)])
        return edges, F / F[-1]

    def _to_z(self, theta, right):
        """Cell coordinate ``-/+ (pi/2 -/+ theta)^(alpha+1)``, increasing in ``theta``.

        The density behaves like ``(pi/2 - |theta|)^alpha`` at the ends, so
        the CDF is close to linear in this coordinate even in the end cells.
        """
        p = self._alpha + 1
        return np.where(right, -np.abs(_HALF_PI - theta) ** p, np.abs(_HALF_PI + theta) ** p)

    def _from_z(self, z, right):
        p = self._alpha + 1
        return np.where(right, _HALF_PI - np.abs(z) ** (1 / p), -_HALF_PI + np.abs(z) ** (1 / p))

    def ppf(self, u) -> np.ndarray:
        """Quantile function by inversion of the tabulated CDF."""
        if self.kind == "gamma":
            from scipy.optimize import brentq

            def one(v):
                hi = 1.0
                while self._cdf_scalar(hi) < v:
                    hi *= 2
                return brentq(lambda x: self._cdf_scalar(x) - v, 0.0, hi, xtol=1e-13)

            return np.vectorize(one, otypes=[float])(np.asarray(u, float))
        edges, F = self._table
        u = np.asarray(u, float)
        k = np.clip(np.searchsorted(F, u, side="right") - 1, 0, len(edges) - 2)
        lo, hi = edges[k], edges[k + 1]
        right = lo + hi >= 0  # cells never straddle theta = 0
        with np.errstate(invalid="ignore", divide="ignore"):
            q = np.clip((u - F[k]) / (F[k + 1] - F[k]), 0.0, 1.0)
        q = np.where(np.isfinite(q), q, 0.0)
        zl, zh = self._to_z(lo, right), self._to_z(hi, right)
        theta = np.clip(self._from_z(zl + q * (zh - zl), right), lo, hi)
        return np.tan(theta)

    def sample(self, n: int, stream: RngStream) -> np.ndarray:
        return self.ppf(stream.uniforms(n))


@lru_cache(maxsize=64)
def _cached(kind: str, params: tuple) -> Density1D:
    return Density1D(kind, params)


def pearson4_pdf(x, nu: float, mu: float):
    """Density of the scalar exponential functional: ``c e^{-2 mu atan x} / (1+x^2)^{nu+1/2}``."""
    return _cached("pearson4", (float(nu), float(mu))).pdf(x)


def hp_eigen_1d_density(s: complex) -> Density1D:
    s = complex(s)
    return _cached("hp_eigen_1d", (s.real, s.imag))


def reversible_m_pdf(w, s: complex, N: int):
    s = complex(s)
    if not s.real + N > 0.5:
        raise ValueError("need Re(s) + N > 1/2 for integrability")
    return _cached("reversible_m", (s.real, s.imag, float(N))).pdf(w)


def cdf_1d(d: Density1D, x):
    return d.cdf(x)


def gamma_log_norm_exact(k: float) -> float:
    """Closed-form ``log Gamma(k)``; used only to cross-check quadrature."""
    return float(gammaln(k))
