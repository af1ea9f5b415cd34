"""Counter-based 64-bit random streams.

Every draw is a pure function of ``(master, replica, counter)``::

    key     = mix(master ^ mix((replica * STREAM_MULT + STREAM_INC) mod 2^64))
    word(c) = mix((key + (c + 1) * GOLDEN) mod 2^64)
    u(c)    = (word(c) >> 11) * 2^-53           # uniform on [0, 1)

where ``mix`` is the splitmix64 finalizer::

    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    z =  z ^ (z >> 31)

So ``word(c)`` for ``c = 0, 1, ...`` is exactly the splitmix64 sequence seeded
with ``key``. Replica streams need no coordination and any position of any
stream can be computed directly, which is what the vectorised samplers use.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
STREAM_MULT = 0xD1B54A32D192ED03
STREAM_INC = 0x8CB92BA72F3D8DD7
INV_2_53 = 1.0 / (1 << 53)

_BLOCK = 4096


def mix64(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * MIX1) & MASK
    z = ((z ^ (z >> 27)) * MIX2) & MASK
    return z ^ (z >> 31)


def _mix64_vec(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


def stream_key(master: int, replica: int) -> int:
    return mix64(master ^ mix64(replica * STREAM_MULT + STREAM_INC))


@dataclass(frozen=True)
class RngSeed:
    """Identifies one random stream: a master seed plus a replica index."""

    master: int = 0
    replica: int = 0

    def __post_init__(self):
        if not (0 <= self.master <= MASK and 0 <= self.replica <= MASK):
            raise ValueError("master and replica must be 64-bit unsigned integers")

    def with_replica(self, replica: int) -> "RngSeed":
        return RngSeed(self.master, replica)

    def child(self, tag: int) -> "RngSeed":
        """Seed for an independent family of replicas labelled ``tag``."""
        return RngSeed(mix64(self.master ^ mix64(tag * GOLDEN + STREAM_INC)), self.replica)

    @property
    def key(self) -> int:
        return stream_key(self.master, self.replica)


def as_seed(seed) -> RngSeed:
    if isinstance(seed, RngSeed):
        return seed
    if seed is None:
        return RngSeed()
    if isinstance(seed, tuple):
        return RngSeed(*seed)
    return RngSeed(int(seed))


def uniforms_at(key: int, start: int, count: int) -> np.ndarray:
    """Uniform draws ``u(start) .. u(start + count - 1)`` of the stream ``key``."""
    c = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(key) + c * np.uint64(GOLDEN)
        w = _mix64_vec(z)
    return (w >> np.uint64(11)).astype(np.float64) * INV_2_53


class CounterRNG:
    """Sequential reader over one stream; ``uniform()`` advances the counter."""

    def __init__(self, seed=None):
        self.seed = as_seed(seed)
        self.key = self.seed.key
        self.counter = 0
        self._buf: list[float] = []
        self._pos = 0

    def _refill(self):
        self._buf = uniforms_at(self.key, self.counter, _BLOCK).tolist()
        self._pos = 0

    def uniform(self) -> float:
        if self._pos >= len(self._buf):
            self._refill()
        u = self._buf[self._pos]
        self._pos += 1
        self.counter += 1
        return u

    def uniforms(self, n: int) -> np.ndarray:
        head = self._buf[self._pos:self._pos + n]
        self._pos += len(head)
        self.counter += len(head)
        rest = uniforms_at(self.key, self.counter, n - len(head))
        self.counter += n - len(head)
        return np.concatenate([np.asarray(head, dtype=float), rest])


def replica_uniforms(seed: RngSeed, replicas: int, counter: int) -> np.ndarray:
    """Draw number ``counter`` from each of the streams ``(seed.master, 0..replicas-1)``."""
    r = np.arange(replicas, dtype=np.uint64)
    m = np.uint64(seed.master)
    with np.errstate(over="ignore"):
        inner = _mix64_vec(r * np.uint64(STREAM_MULT) + np.uint64(STREAM_INC))
        keys = _mix64_vec(m ^ inner)
        w = _mix64_vec(keys + np.uint64(counter + 1) * np.uint64(GOLDEN))
    return (w >> np.uint64(11)).astype(np.float64) * INV_2_53


def scalar_uniform(key: int, counter: int) -> float:
    """Reference (pure integer) evaluation of ``u(counter)``; used by tests."""
    return (mix64(key + (counter + 1) * GOLDEN) >> 11) * INV_2_53
