"""Reproducible random streams and Brownian increments.

Every Monte Carlo replicate gets its own stream, keyed by ``(seed, stream_id)``
on a counter-based Philox-4x64 generator.  Because the output of a stream is a
pure function of its key, replicates can be simulated in any order, in any
chunking, on any number of threads, and still see the same numbers.

Gaussians are produced by the inverse normal CDF applied to 53-bit uniforms on
the open interval (0, 1), so each normal is a monotone function of exactly one
uniform draw.

Complex Brownian convention: real and imaginary parts are independent with
variance ``dt`` each, so ``E[dW conj(dW)] = 2 dt`` and ``E[dW dW] = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtri

from .errors import InvalidStep

__all__ = [
    "MASK64",
    "ROLE_SHIFT",
    "Role",
    "RngStream",
    "substream",
    "replicate_streams",
    "BrownianIncrement",
    "complex_bm_increment",
    "real_bm_increment",
    "NoiseFeed",
    "coarsen",
]

MASK64 = (1 << 64) - 1
ROLE_SHIFT = 40
_HALF_ULP = 2.0**-54


class Role:
    """Stream roles; combined with the replicate index into a stream id."""

    W = 0  # matrix driving noise of M
    B = 1  # independent Hermitian Brownian motion in the functionals
    BETA = 2
    GAMMA = 3
    INIT = 4  # initial-condition draws
    GAMMA_MATRIX = 5  # direct noise for the Hua-Pickrell diffusion
    INDEPENDENT = 6  # second, independent batch for two-sample comparisons
    W2 = 7  # matrix noise of a second, independent integral
    B2 = 8


class RngStream:
    """Counter-based random stream keyed by ``(seed, stream_id)``."""

    __slots__ = ("seed", "stream_id", "_gen")

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & MASK64
        self.stream_id = int(stream_id) & MASK64
        self._gen = np.random.Generator(np.random.Philox(key=[self.seed, self.stream_id]))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id:#x})"

    def uniforms(self, size=None) -> np.ndarray:
        """Uniforms on the open interval (0, 1)."""
        return self._gen.random(size) + _HALF_ULP

    def normals(self, size=None) -> np.ndarray:
        return ndtri(self.uniforms(size))

    def complex_normals(self, size) -> np.ndarray:
        """Complex normals with independent unit-variance real and imaginary parts."""
        size = (size,) if np.isscalar(size) else tuple(size)
        z = self.normals(size + (2,))
        return z[..., 0] + 1j * z[..., 1]


def substream(seed: int, replicate_id: int, role: int = Role.W) -> RngStream:
    """Stream for one replicate; ``role`` separates independent noises of a replicate."""
    if not 0 <= replicate_id < (1 << ROLE_SHIFT):
        raise ValueError(f"replicate_id out of range: {replicate_id}")
    return RngStream(seed, (int(role) << ROLE_SHIFT) | int(replicate_id))


def replicate_streams(seed: int, ids: Sequence[int] | range, role: int) -> list[RngStream]:
    return [substream(seed, i, role) for i in ids]


@dataclass(frozen=True)
class BrownianIncrement:
    dt: float
    dW: np.ndarray


def _check_dt(dt: float) -> None:
    if not dt > 0:
        raise InvalidStep(f"time step must be positive, got {dt}")


def complex_bm_increment(stream: RngStream, dim: int, dt: float) -> BrownianIncrement:
    """One increment of an ``dim x dim`` complex Brownian matrix over ``dt``."""
    _check_dt(dt)
    return BrownianIncrement(dt, np.sqrt(dt) * stream.complex_normals((dim, dim)))


def real_bm_increment(stream: RngStream, dt: float) -> float:
    _check_dt(dt)
    return float(np.sqrt(dt) * stream.normals())


NoiseSource = Union[None, RngStream, Sequence[RngStream], np.ndarray]


class NoiseFeed:
    """Block-wise supplier of Brownian increments for a batch of replicates.

    Parameters
    ----------
    source
        ``None`` for the noise-free (ODE) limit, one ``RngStream``, a sequence
        of streams (one per replicate), or an array of precomputed increments
        of shape ``(steps, *shape)`` or ``(R, steps, *shape)``.
    shape
        Shape of a single increment, e.g. ``(N, N)`` or ``(N,)`` or ``()``.
    dt
        Step size used to scale freshly drawn normals.
    complex_
        Draw complex increments (``2 * prod(shape)`` normals per step).
    batch
        Replicate count for ``source=None``; ignored otherwise.

    ``take(k)`` always returns an array of shape ``(R, k, *shape)``;
    ``batched`` tells callers whether to drop the replicate axis on output.
    """

    def __init__(
        self,
        source: NoiseSource,
        shape: tuple[int, ...],
        dt: float,
        complex_: bool,
        batch: int | None = None,
    ):
        _check_dt(dt)
        self.shape = tuple(shape)
        self.dt = float(dt)
        self.complex_ = complex_
        self.dtype = np.complex128 if complex_ else np.float64
        self._streams: list[RngStream] | None = None
        self._array: np.ndarray | None = None
        self._pos = 0
        if source is None:
            self.batched = batch is not None
            self.size = 1 if batch is None else int(batch)
        elif isinstance(source, RngStream):
            self.batched = False
            self.size = 1
            self._streams = [source]
        elif isinstance(source, np.ndarray):
            arr = np.asarray(source)
            nd = len(self.shape)
            if arr.ndim == nd + 1:
                self.batched = False
                arr = arr[None]
            elif arr.ndim == nd + 2:
                self.batched = True
            else:
                raise ValueError(f"increment array of shape {arr.shape} does not fit {self.shape}")
            if arr.shape[2:] != self.shape:
                raise ValueError(f"increment array of shape {arr.shape} does not fit {self.shape}")
            self._array = arr.astype(self.dtype, copy=False)
            self.size = arr.shape[0]
        else:
            self._streams = list(source)
            if not self._streams:
                raise ValueError("empty stream sequence")
            self.batched = True
            self.size = len(self._streams)

    @property
    def deterministic(self) -> bool:
        return self._streams is None and self._array is None

    def take(self, k: int) -> np.ndarray:
        if self._array is not None:
            out = self._array[:, self._pos : self._pos + k]
            if out.shape[1] != k:
                raise ValueError("precomputed increments exhausted")
            self._pos += k
            return out
        if self._streams is None:
            return np.zeros((self.size, k) + self.shape, dtype=self.dtype)
        scale = np.sqrt(self.dt)
        block = (k,) + self.shape
        if self.complex_:
            return scale * np.stack([s.complex_normals(block) for s in self._streams])
        return scale * np.stack([s.normals(block) for s in self._streams])

    def select(self, mask: np.ndarray, k: int) -> np.ndarray:
        """Like ``take`` but only advances the replicates where ``mask`` is true."""
        idx = np.flatnonzero(mask)
        out = np.zeros((self.size, k) + self.shape, dtype=self.dtype)
        if self._array is not None:
            out[idx] = self._array[idx, self._pos : self._pos + k]
            self._pos += k
            return out
        if self._streams is None:
            return out
        scale = np.sqrt(self.dt)
        block = (k,) + self.shape
        for i in idx:
            s = self._streams[i]
            out[i] = scale * (s.complex_normals(block) if self.complex_ else s.normals(block))
        return out


def coarsen(increments: np.ndarray, factor: int, axis: int = 0) -> np.ndarray:
    """Sum consecutive groups of ``factor`` increments along ``axis``.

    Used to drive a coarse grid with the same Brownian path as a fine one.
    """
    increments = np.moveaxis(increments, axis, 0)
    n = increments.shape[0]
    if n % factor:
        raise ValueError(f"{n} increments cannot be grouped by {factor}")
    out = increments.reshape((n // factor, factor) + increments.shape[1:]).sum(axis=1)
    return np.moveaxis(out, 0, axis)
