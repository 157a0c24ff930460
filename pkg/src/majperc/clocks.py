"""Reproducible Poisson clocks and uniform fields.

All randomness comes from a counter-based generator: a value is a SplitMix64
style hash of ``(master_seed, replica_id, purpose, x, y, index)``. Any site's
``k``-th draw can therefore be produced without touching any other site,
which is what the lazy backward evaluator relies on.

Ring times of a site are partial sums of unit exponentials ``-log1p(-u)``.
Every code path (forward engine, lazy evaluator, single-site queries) goes
through one compiled routine, so the floating point operations are identical
no matter how many sites are generated together.
"""

from __future__ import annotations

import bisect
import hashlib
import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np
from numba import njit
from scipy.special import gammaincinv

from .grid import Rect, Site

MASK64 = (1 << 64) - 1
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S1, _S11, _S27, _S30, _S31, _S63 = (np.uint64(s) for s in (1, 11, 27, 30, 31, 63))
_TWO_M53 = 2.0 ** -53

PIECE_SHAPE = 0.25


@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, inline="always")
def _absorb(h, v):
    return _mix((h ^ v) + _GAMMA)


@njit(cache=True, inline="always")
def _zigzag(v):
    u = np.uint64(v)
    return (u << _S1) ^ np.uint64(np.int64(v) >> 63)


@njit(cache=True, inline="always")
def _unit(h):
    # open interval (0, 1): 0 and 1 are never produced
    return (np.float64(h >> _S11) + 0.5) * _TWO_M53


@njit(cache=True, nogil=True)
def _site_keys(master, purpose, reps, xs, ys):
    n = xs.shape[0]
    out = np.empty(n, dtype=np.uint64)
    h0 = _mix(master ^ _GAMMA)
    for i in range(n):
        h = _absorb(h0, _zigzag(reps[i]))
        h = _absorb(h, purpose)
        h = _absorb(h, _zigzag(xs[i]))
        out[i] = _absorb(h, _zigzag(ys[i]))
    return out


@njit(cache=True, nogil=True)
def _draw_uniforms(keys, indices):
    out = np.empty((keys.shape[0], indices.shape[0]))
    for i in range(keys.shape[0]):
        for j in range(indices.shape[0]):
            out[i, j] = _unit(_absorb(keys[i], indices[j]))
    return out


@njit(cache=True)
def _exp_draw(key, k):
    return -np.log1p(-_unit(_absorb(key, np.uint64(k))))


@njit(cache=True, nogil=True)
def _ring_table(keys, t, first):
    n = keys.shape[0]
    cap = int(n * (t + 4.0 * np.sqrt(t) + 4.0)) + 16
    times = np.empty(cap)
    owner = np.empty(cap, dtype=np.int64)
    m = 0
    for i in range(n):
        k = 0
        e = first[i]
        if np.isnan(e):
            e = _exp_draw(keys[i], 0)
        r = 0.0 + e
        while r <= t:
            if m == cap:
                cap *= 2
                times2 = np.empty(cap)
                owner2 = np.empty(cap, dtype=np.int64)
                times2[:m] = times[:m]
                owner2[:m] = owner[:m]
                times = times2
                owner = owner2
            times[m] = r
            owner[m] = i
            m += 1
            k += 1
            r = r + _exp_draw(keys[i], k)
    return times[:m], owner[:m]


@njit(cache=True, nogil=True)
def _first_rings(keys, first):
    out = np.empty(keys.shape[0])
    for i in range(keys.shape[0]):
        e = first[i]
        if np.isnan(e):
            e = _exp_draw(keys[i], 0)
        out[i] = 0.0 + e
    return out


def purpose_key(tag: str) -> int:
    """Platform independent 64-bit key of a purpose tag."""
    return int.from_bytes(hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest(), "little")


@dataclass(frozen=True)
class SeedSpec:
    """Identifies one independent random stream family."""

    master_seed: int
    replica_id: int = 0
    purpose: str = "clock"

    def __post_init__(self):
        if not isinstance(self.master_seed, (int, np.integer)):
            raise TypeError("master_seed must be an integer")

    def with_purpose(self, purpose: str) -> "SeedSpec":
        return replace(self, purpose=purpose)

    def with_replica(self, replica_id: int) -> "SeedSpec":
        return replace(self, replica_id=int(replica_id))

    def __str__(self) -> str:
        return f"master_seed={self.master_seed} replica_id={self.replica_id} purpose={self.purpose}"


def site_keys(seed: SeedSpec, xs, ys, replicas=None) -> np.ndarray:
    """Per-site stream keys; ``replicas`` (array) overrides ``seed.replica_id``."""
    xs = np.ascontiguousarray(np.atleast_1d(xs), dtype=np.int64)
    ys = np.ascontiguousarray(np.atleast_1d(ys), dtype=np.int64)
    if replicas is None:
        reps = np.full(xs.shape, seed.replica_id, dtype=np.int64)
    else:
        reps = np.ascontiguousarray(np.broadcast_to(replicas, xs.shape), dtype=np.int64)
    return _site_keys(np.uint64(seed.master_seed & MASK64), np.uint64(purpose_key(seed.purpose)),
                      reps, xs, ys)


def draw_uniforms(keys: np.ndarray, indices) -> np.ndarray:
    """Uniforms for ``keys[:, None]`` at draw ``indices[None, :]``; shape (N, K)."""
    return _draw_uniforms(keys, np.ascontiguousarray(np.atleast_1d(indices), dtype=np.uint64))


def uniform_at(seed: SeedSpec, xs, ys, replicas=None, index: int = 0) -> np.ndarray:
    return draw_uniforms(site_keys(seed, xs, ys, replicas), [index])[:, 0]


def uniform_field(seed: SeedSpec, region: Rect) -> np.ndarray:
    """Uniform values on ``region`` as a ``(height, width)`` array."""
    xs, ys = region.coords()
    return uniform_at(seed, xs, ys).reshape(region.shape)


def gamma_pieces(seed: SeedSpec, xs, ys, replicas=None) -> np.ndarray:
    """Four i.i.d. Gamma(1/4, 1) pieces per site, shape ``(N, 4)``.

    Column ``d`` is the piece attributed to the neighbour in direction
    ``grid.OFFSETS[d]``. The stream purpose is always ``"enh"``.
    """
    keys = site_keys(seed.with_purpose("enh"), xs, ys, replicas)
    return gammaincinv(PIECE_SHAPE, draw_uniforms(keys, np.arange(4)))


def piece_sum(pieces: np.ndarray) -> np.ndarray:
    return ((pieces[:, 0] + pieces[:, 1]) + pieces[:, 2]) + pieces[:, 3]


def ring_table(keys: np.ndarray, t: float, first=None) -> tuple[np.ndarray, np.ndarray]:
    """Ring times in ``[0, t]`` for every key.

    ``first`` optionally replaces the first interarrival time per key (NaN
    keeps the drawn one). Returns ``(times, owner)`` with owner indices into
    ``keys``, grouped by owner in key order, each owner's times increasing.
    """
    if first is None:
        first = np.full(keys.shape[0], np.nan)
    return _ring_table(keys, float(t), np.ascontiguousarray(first, dtype=np.float64))


class ClockStream:
    """Unit-rate Poisson clocks on every site of Z^2.

    With ``split_first_ring`` the first interarrival of every B-site
    (``x + y`` odd) is the sum of its four Gamma(1/4, 1) pieces, drawn from
    the ``"enh"`` stream of the same master seed and replica. The marginal
    law is unchanged since the pieces sum to an Exp(1) variable.
    """

    def __init__(self, seed: SeedSpec, horizon: float = math.inf, split_first_ring: bool = False):
        if seed.purpose != "clock":
            seed = seed.with_purpose("clock")
        self.seed = seed
        self.horizon = float(horizon)
        self.split_first_ring = split_first_ring

    def __repr__(self) -> str:
        return f"ClockStream({self.seed}, split_first_ring={self.split_first_ring})"

    def _check(self, t: float):
        if t < 0:
            raise ValueError("time must be non-negative")
        if t > self.horizon:
            raise ValueError(f"t={t} exceeds clock horizon {self.horizon}")

    def _first(self, xs, ys, replicas=None):
        if not self.split_first_ring:
            return None
        first = np.full(np.shape(xs), np.nan)
        odd = (np.asarray(xs) + np.asarray(ys)) % 2 == 1
        if odd.any():
            reps = None if replicas is None else np.asarray(replicas)[odd]
            first[odd] = piece_sum(gamma_pieces(self.seed, np.asarray(xs)[odd],
                                                np.asarray(ys)[odd], reps))
        return first

    def ring_table(self, xs, ys, t: float, replicas=None):
        """Vectorised ring times for sites ``(xs[i], ys[i])``; see :func:`ring_table`."""
        self._check(t)
        xs = np.atleast_1d(np.asarray(xs, dtype=np.int64))
        ys = np.atleast_1d(np.asarray(ys, dtype=np.int64))
        keys = site_keys(self.seed, xs, ys, replicas)
        return ring_table(keys, t, self._first(xs, ys, replicas))

    def events(self, region: Rect, t: float):
        """All rings of ``region`` in ``[0, t]``, sorted by ``(time, x, y)``.

        Returns ``(times, xs, ys)`` arrays.
        """
        xs, ys = region.coords()
        times, owner = self.ring_table(xs, ys, t)
        ex, ey = xs[owner], ys[owner]
        order = np.lexsort((ey, ex, times))
        return times[order], ex[order], ey[order]

    def rings(self, s, t: float) -> list[float]:
        x, y = s
        times, _ = self.ring_table([x], [y], t)
        return times.tolist()

    def last_ring_before(self, s, t: float) -> float | None:
        """Largest ring time strictly below ``t``."""
        r = self.rings(s, t)
        i = bisect.bisect_left(r, t)
        return r[i - 1] if i else None

    def first_rings(self, xs, ys) -> np.ndarray:
        """Time of the first ring at every site (always finite)."""
        xs = np.atleast_1d(np.asarray(xs, dtype=np.int64))
        ys = np.atleast_1d(np.asarray(ys, dtype=np.int64))
        first = self._first(xs, ys)
        if first is None:
            first = np.full(len(xs), np.nan)
        return _first_rings(site_keys(self.seed, xs, ys), first)


class ExplicitClocks:
    """Hand-specified ring times, for constructed instances and tests.

    Sites missing from ``rings`` never ring.
    """

    seed = None
    split_first_ring = False

    def __init__(self, rings: Mapping = None, horizon: float = math.inf):
        self._rings = {Site(*s): sorted(float(v) for v in ts) for s, ts in (rings or {}).items()}
        for s, ts in self._rings.items():
            if any(a == b for a, b in zip(ts, ts[1:])):
                raise ValueError(f"repeated ring time at {s}")
            if ts and ts[0] < 0:
                raise ValueError("ring times must be non-negative")
        self.horizon = float(horizon)

    def __repr__(self) -> str:
        return f"ExplicitClocks({len(self._rings)} sites)"

    def ring_table(self, xs, ys, t: float, replicas=None):
        if t > self.horizon:
            raise ValueError(f"t={t} exceeds clock horizon {self.horizon}")
        times, owner = [], []
        for i, (x, y) in enumerate(zip(np.atleast_1d(xs), np.atleast_1d(ys))):
            for r in self._rings.get(Site(int(x), int(y)), ()):
                if r <= t:
                    times.append(r)
                    owner.append(i)
        return np.asarray(times, dtype=float), np.asarray(owner, dtype=np.int64)

    def events(self, region: Rect, t: float):
        xs, ys = region.coords()
        times, owner = self.ring_table(xs, ys, t)
        ex, ey = xs[owner], ys[owner]
        order = np.lexsort((ey, ex, times))
        return times[order], ex[order], ey[order]

    def rings(self, s, t: float) -> list[float]:
        return [r for r in self._rings.get(Site(*s), ()) if r <= t]

    def last_ring_before(self, s, t: float) -> float | None:
        r = self.rings(s, t)
        i = bisect.bisect_left(r, t)
        return r[i - 1] if i else None

    def first_rings(self, xs, ys) -> np.ndarray:
        return np.array([(self._rings.get(Site(int(x), int(y))) or [math.inf])[0]
                         for x, y in zip(np.atleast_1d(xs), np.atleast_1d(ys))])
