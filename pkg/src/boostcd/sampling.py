"""tau-nice and tau-independent coordinate samplings.

Every draw is a pure function of ``(seed, stream, draw_index)``: random bits
come from a splitmix64 hash of that triple, so workers can draw without
sharing a generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

NICE = 0
INDEPENDENT = 1
_KINDS = {"nice": NICE, "independent": INDEPENDENT}

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_M53 = 1.0 / 9007199254740992.0


@njit(inline="always")
def splitmix64(x):
    z = x + _GOLDEN
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(inline="always")
def draw_key(seed, stream, draw_index):
    k = splitmix64(np.uint64(seed))
    k = splitmix64(k ^ np.uint64(stream))
    return splitmix64(k ^ np.uint64(draw_index))


@njit(inline="always")
def rand_below(key, k, bound):
    """k-th uniform integer in [0, bound) under ``key``."""
    z = splitmix64(key + np.uint64(k) * _GOLDEN)
    u = np.float64(z >> _S11) * _TWO_M53
    r = np.int64(u * bound)
    if r >= bound:  # u*bound can round up to bound
        r = bound - 1
    return r


@njit(nogil=True)
def nice_draw(domain, perm, tau, seed, stream, draw_index, out):
    """Write a uniform tau-subset of ``domain`` (sorted) into out[:tau].

    ``perm`` is scratch holding 0..d-1 and is restored before returning, so
    the draw does not depend on earlier draws. O(tau log tau).
    """
    d = domain.shape[0]
    key = draw_key(seed, stream, draw_index)
    swaps = np.empty(tau, dtype=np.int64)
    for k in range(tau):
        j = k + rand_below(key, k, d - k)
        swaps[k] = j
        t = perm[k]
        perm[k] = perm[j]
        perm[j] = t
    for k in range(tau):
        out[k] = domain[perm[k]]
    for k in range(tau - 1, -1, -1):
        j = swaps[k]
        t = perm[k]
        perm[k] = perm[j]
        perm[j] = t
    out[:tau].sort()
    return tau


@njit(nogil=True)
def independent_draw(domain, tau, seed, stream, draw_index, allow_collisions, out):
    """tau i.i.d. uniform picks from ``domain``, sorted; duplicates removed
    unless ``allow_collisions``. Returns the number of entries written."""
    d = domain.shape[0]
    key = draw_key(seed, stream, draw_index)
    for k in range(tau):
        out[k] = domain[rand_below(key, k, d)]
    out[:tau].sort()
    if allow_collisions:
        return tau
    w = 1
    for k in range(1, tau):
        if out[k] != out[w - 1]:
            out[w] = out[k]
            w += 1
    return w


@njit(nogil=True)
def draw(kind, domain, perm, tau, seed, stream, draw_index, allow_collisions, out):
    if kind == NICE:
        return nice_draw(domain, perm, tau, seed, stream, draw_index, out)
    return independent_draw(domain, tau, seed, stream, draw_index, allow_collisions, out)


@njit(nogil=True)
def _draw_many(kind, domain, tau, seed, stream, start, count, allow_collisions, out, sizes):
    perm = np.arange(domain.shape[0])
    buf = np.empty(tau, dtype=np.int64)
    for t in range(count):
        s = draw(kind, domain, perm, tau, seed, stream, start + t, allow_collisions, buf)
        sizes[t] = s
        out[t, :s] = buf[:s]
        out[t, s:] = -1


@dataclass(frozen=True)
class SamplingLaw:
    kind: str
    tau: int
    seed: int
    domain: np.ndarray
    allow_collisions: bool = False
    stream: int = 0
    _perm: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown sampling kind {self.kind!r}")
        domain = np.ascontiguousarray(self.domain, dtype=np.int64)
        object.__setattr__(self, "domain", domain)
        if domain.size == 0:
            raise ValueError("empty sampling domain")
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.kind == "nice" and self.tau > domain.size:
            raise ValueError(f"tau={self.tau} exceeds domain size {domain.size}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        object.__setattr__(self, "_perm", np.arange(domain.size, dtype=np.int64))

    @property
    def kind_code(self) -> int:
        return _KINDS[self.kind]

    @property
    def n(self) -> int:
        return int(self.domain.size)

    def for_stream(self, stream: int) -> "SamplingLaw":
        """Same law, independent bits (one per async worker)."""
        return SamplingLaw(self.kind, self.tau, self.seed, self.domain, self.allow_collisions, stream)

    def expected_size(self) -> float:
        if self.kind == "nice" or self.allow_collisions:
            return float(self.tau)
        n = self.n
        return n * (1.0 - (1.0 - 1.0 / n) ** self.tau)

    def sample(self, draw_index: int) -> np.ndarray:
        out = np.empty(self.tau, dtype=np.int64)
        s = draw(self.kind_code, self.domain, self._perm, self.tau, np.uint64(self.seed),
                 self.stream, draw_index, self.allow_collisions, out)
        return out[:s]

    def sample_many(self, start: int, count: int) -> tuple[np.ndarray, np.ndarray]:
        """Draws ``start .. start+count-1`` as a (count, tau) array padded with -1, plus sizes."""
        out = np.empty((count, self.tau), dtype=np.int64)
        sizes = np.empty(count, dtype=np.int64)
        _draw_many(self.kind_code, self.domain, self.tau, np.uint64(self.seed), self.stream,
                   start, count, self.allow_collisions, out, sizes)
        return out, sizes


def sample_nice(law: SamplingLaw, draw_index: int) -> np.ndarray:
    if law.kind != "nice":
        raise ValueError("law is not tau-nice")
    return law.sample(draw_index)


def sample_independent(law: SamplingLaw, draw_index: int) -> np.ndarray:
    if law.kind != "independent":
        raise ValueError("law is not tau-independent")
    return law.sample(draw_index)
