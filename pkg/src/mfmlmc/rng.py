"""Counter-based random number streams.

Every variate is a pure function of ``(seed, stream_id, counter)``: the stream
key is a SplitMix64 hash of the seed and stream id, and draw ``n`` is the
SplitMix64 finaliser applied to ``key + (n + 1) * GAMMA``.  Any sample of any
sampler can therefore be regenerated in isolation, and results never depend on
the order in which samples are produced.

The scalar kernels (``uniform``, ``exponential``, ``poisson`` ...) are numba
functions that thread an explicit counter; they are called from the simulation
kernels.  :class:`RngStream` is the Python-facing handle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1
_GAMMA_INT = 0x9E3779B97F4A7C15
_M1_INT = 0xBF58476D1CE4E5B9
_M2_INT = 0x94D049BB133111EB

GAMMA = np.uint64(_GAMMA_INT)
_M1 = np.uint64(_M1_INT)
_M2 = np.uint64(_M2_INT)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO_M53 = 2.0**-53


def mix64_py(z: int) -> int:
    """SplitMix64 finaliser on Python ints (mod 2**64)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1_INT) & MASK64
    z = ((z ^ (z >> 27)) * _M2_INT) & MASK64
    return z ^ (z >> 31)


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, inline="always")
def uniform(key, ctr):
    """Uniform variate in the open interval (0, 1); returns ``(u, ctr + 1)``."""
    x = mix64(key + (ctr + _ONE) * GAMMA)
    return ((x >> _S11) + 0.5) * _TWO_M53, ctr + _ONE


@njit(cache=True, inline="always")
def exponential(key, ctr):
    u, ctr = uniform(key, ctr)
    return -math.log(u), ctr


@njit(cache=True, inline="always")
def normal(key, ctr):
    # Box-Muller, cosine branch only: two uniforms per normal.
    u1, ctr = uniform(key, ctr)
    u2, ctr = uniform(key, ctr)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2), ctr


@njit(cache=True)
def poisson(lam, key, ctr):
    """Poisson variate; inversion below mean 10, PTRS (Hormann 1993) above."""
    if lam <= 0.0:
        return 0, ctr
    if lam < 10.0:
        u, ctr = uniform(key, ctr)
        p = math.exp(-lam)
        cdf = p
        k = 0
        while u > cdf and k < 10000:
            k += 1
            p *= lam / k
            cdf += p
        return k, ctr
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u, ctr = uniform(key, ctr)
        u -= 0.5
        v, ctr = uniform(key, ctr)
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return int(k), ctr
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)
                <= -lam + k * loglam - math.lgamma(k + 1.0)):
            return int(k), ctr


@njit(cache=True)
def _uniform_block(key, start, n):
    out = np.empty(n)
    ctr = start
    for i in range(n):
        out[i], ctr = uniform(key, ctr)
    return out


@njit(cache=True)
def _normal_block(key, start, n):
    out = np.empty(n)
    ctr = start
    for i in range(n):
        out[i], ctr = normal(key, ctr)
    return out


@njit(cache=True)
def _poisson_block(lam, key, start, n):
    out = np.empty(n, dtype=np.int64)
    ctr = start
    for i in range(n):
        out[i], ctr = poisson(lam, key, ctr)
    return out


@dataclass(frozen=True)
class RngStream:
    """Handle on one counter-based stream.

    Parameters
    ----------
    seed : int
        Root seed (64-bit).
    stream_id : int
        Stream identifier (64-bit).  Use :meth:`child` to derive independent
        sub-streams from structured keys such as ``(level, index, purpose)``.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & MASK64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & MASK64)

    @property
    def key(self) -> np.uint64:
        return np.uint64(mix64_py(mix64_py(self.seed) ^ self.stream_id))

    def child(self, *path: int) -> "RngStream":
        sid = self.stream_id
        for p in path:
            sid = mix64_py(sid ^ mix64_py((int(p) + 1) * _GAMMA_INT))
        return RngStream(self.seed, sid)

    def uniform(self, n: int, start: int = 0) -> np.ndarray:
        return _uniform_block(self.key, np.uint64(start), int(n))

    def normal(self, n: int, start: int = 0) -> np.ndarray:
        return _normal_block(self.key, np.uint64(start), int(n))

    def poisson(self, lam: float, n: int, start: int = 0) -> np.ndarray:
        return _poisson_block(float(lam), self.key, np.uint64(start), int(n))


def as_stream(rng) -> RngStream:
    """Accept an :class:`RngStream`, an int seed, or ``None`` (seed 0)."""
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream(0)
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError(f"cannot build an RngStream from {type(rng).__name__}")


# -- vectorised key derivation -----------------------------------------------

_GAMMA_U = np.uint64(_GAMMA_INT)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def child_keys(stream: RngStream, *path) -> np.ndarray:
    """Keys of ``stream.child(*path)`` where path entries may be int arrays.

    Equivalent to ``[stream.child(*p).key for p in broadcast(path)]`` but
    vectorised; used to derive per-sample sub-streams.
    """
    sid = np.uint64(stream.stream_id)
    parts = np.broadcast_arrays(*[np.asarray(p, dtype=np.int64) for p in path])
    sid = np.full(parts[0].shape, sid, dtype=np.uint64)
    with np.errstate(over="ignore"):
        for p in parts:
            sid = _mix64_np(sid ^ _mix64_np((p.astype(np.uint64) + _ONE) * _GAMMA_U))
    return _mix64_np(np.uint64(mix64_py(stream.seed)) ^ sid)


def uniforms_from_keys(keys: np.ndarray, n: int) -> np.ndarray:
    """First ``n`` uniforms of each keyed stream, shape ``keys.shape + (n,)``."""
    keys = np.asarray(keys, dtype=np.uint64)[..., None]
    ctr = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = _mix64_np(keys + ctr * _GAMMA_U)
    return ((x >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53
