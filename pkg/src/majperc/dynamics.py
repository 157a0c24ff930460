"""Majority dynamics driven by Poisson clocks.

Two independent evaluators are provided. :func:`evolve_forward` processes
every ring of a finite box in global time order (ties broken by ``(x, y)``).
:func:`evaluate_lazy` computes a single opinion by unfolding the graphical
construction backwards from the query site, touching only the sites whose
clocks matter.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import stats

from . import _kernels
from .clocks import ClockStream, ExplicitClocks, SeedSpec, uniform_at, uniform_field
from .grid import BoundaryPolicy, Rect, Site, SpinConfig, neighbors, random_init

CONE_RATE = 3 * math.e ** 2


def step_site(config: SpinConfig, s, policy=BoundaryPolicy.FREE_FINITE) -> int:
    """Opinion ``s`` adopts when its clock rings: strict majority of its
    neighbours, keeping its own opinion on a tie."""
    s = Site(*s)
    nbs = neighbors(s, config.region, policy)
    ones = sum(nb.source if isinstance(nb.source, int) else config[nb.source] for nb in nbs)
    if 2 * ones > len(nbs):
        return 1
    if 2 * ones < len(nbs):
        return 0
    return config[s]


@dataclass(frozen=True)
class FlipEvent:
    time: float
    site: Site
    old: int
    new: int


@dataclass(frozen=True)
class InitialField:
    """The initial condition ``1{U_x <= p}`` on all of Z^2."""

    seed: SeedSpec
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if self.seed.purpose == "clock":
            object.__setattr__(self, "seed", self.seed.with_purpose("init"))

    def values(self, xs, ys) -> np.ndarray:
        return (uniform_at(self.seed, xs, ys) <= self.p).astype(np.uint8)

    def config(self, region: Rect) -> SpinConfig:
        return random_init(region, self.p, uniform_field(self.seed, region))


def _policy_code(policy) -> int:
    return BoundaryPolicy.parse(policy).value


def _events_local(clocks, region: Rect, t: float):
    times, xs, ys = clocks.events(region, t)
    return times, (ys - region.y0).astype(np.int64), (xs - region.x0).astype(np.int64)


class Trajectory:
    """Ordered flip log of one forward run."""

    def __init__(self, init: SpinConfig, final: SpinConfig, times, xs, ys, news):
        self.init = init
        self.final = final
        self.times = np.asarray(times, dtype=float)
        self.xs = np.asarray(xs, dtype=np.int64)
        self.ys = np.asarray(ys, dtype=np.int64)
        self.news = np.asarray(news, dtype=np.uint8)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def events(self) -> list[FlipEvent]:
        return [FlipEvent(float(t), Site(int(x), int(y)), int(1 - n), int(n))
                for t, x, y, n in zip(self.times, self.xs, self.ys, self.news)]

    def flip_counts(self) -> np.ndarray:
        r = self.init.region
        counts = np.zeros(r.shape, dtype=np.int64)
        np.add.at(counts, (self.ys - r.y0, self.xs - r.x0), 1)
        return counts

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "site_x", "site_y", "old", "new"])
        for t, x, y, n in zip(self.times, self.xs, self.ys, self.news):
            w.writerow([f"{t:.17g}", int(x), int(y), int(1 - n), int(n)])
        return buf.getvalue()


def replay(init: SpinConfig, events: Iterable[FlipEvent]) -> SpinConfig:
    """Apply a flip log to ``init``; every event must start from the logged opinion."""
    bits = init.bits.copy()
    r = init.region
    last = -math.inf
    for ev in events:
        if ev.time < last:
            raise ValueError("flip log is not time ordered")
        last = ev.time
        cur = bits[ev.site.y - r.y0, ev.site.x - r.x0]
        if cur != ev.old or ev.old == ev.new:
            raise ValueError(f"inconsistent flip {ev}")
        bits[ev.site.y - r.y0, ev.site.x - r.x0] = ev.new
    return SpinConfig(r, bits)


def evolve_trajectory(init: SpinConfig, clocks, t: float, policy=BoundaryPolicy.FREE_FINITE,
                      force_one_until: float = -math.inf) -> Trajectory:
    """Run the dynamics on ``init.region`` up to time ``t`` and keep the flip log.

    Rings before ``force_one_until`` set the ringing site to 1 instead of
    applying the majority rule (used by the continuity coupling).
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    region = init.region
    times, ly, lx = _events_local(clocks, region, t)
    state = init.bits.copy()
    flip_idx = np.empty(len(times), dtype=np.int64)
    nflip = _kernels.run_events(state, times, ly, lx, _policy_code(policy),
                                float(force_one_until), flip_idx)
    idx = flip_idx[:nflip]
    fy, fx = ly[idx], lx[idx]
    return Trajectory(init, SpinConfig(region, state), times[idx], fx + region.x0,
                      fy + region.y0, state_after(idx, fy, fx, init.bits))


def state_after(idx, fy, fx, bits0) -> np.ndarray:
    # every logged event is a flip, so the new opinion alternates per site
    cur = bits0.copy()
    news = np.empty(len(idx), dtype=np.uint8)
    for k in range(len(idx)):
        cur[fy[k], fx[k]] ^= 1
        news[k] = cur[fy[k], fx[k]]
    return news


def evolve_forward(init: SpinConfig, clocks, t: float, policy=BoundaryPolicy.FREE_FINITE,
                   force_one_until: float = -math.inf) -> SpinConfig:
    """Configuration at time ``t`` started from ``init`` with the given clocks."""
    if t < 0:
        raise ValueError("t must be non-negative")
    region = init.region
    times, ly, lx = _events_local(clocks, region, t)
    state = init.bits.copy()
    _kernels.run_events(state, times, ly, lx, _policy_code(policy), float(force_one_until),
                        np.empty(len(times), dtype=np.int64))
    return SpinConfig(region, state)


def evolve_replicas(box: Rect, p: float, t: float, policy, master_seed: int, replica_ids,
                    force_one_until: float = -math.inf, max_events: int = 4_000_000) -> np.ndarray:
    """Final configurations of many independent replicas, shape ``(B, h, w)``.

    Replica ``r`` uses the init field ``SeedSpec(master_seed, r, "init")`` and
    the clocks ``SeedSpec(master_seed, r, "clock")``. Results depend only on
    the replica ids, never on how replicas are grouped.
    """
    replica_ids = np.asarray(replica_ids, dtype=np.int64)
    nrep = len(replica_ids)
    h, w = box.shape
    # (x, y) lexicographic site order, so a stable sort on time alone yields
    # the global (time, x, y) event order
    xs, ys = (a.T.ravel() for a in box.coords_grid())
    nsite = len(xs)
    if p <= 0.0 or p >= 1.0:
        # constant configurations are absorbing under every policy
        if p >= 1.0 or force_one_until <= 0.0:
            return np.full((nrep, h, w), 1 if p >= 1.0 else 0, dtype=np.uint8)
    per = max(1, int(max_events // max(1, nsite * max(t, 1.0))))
    out = np.empty((nrep, h, w), dtype=np.uint8)
    for lo in range(0, nrep, per):
        reps = replica_ids[lo:lo + per]
        b = len(reps)
        rx, ry = np.tile(xs, b), np.tile(ys, b)
        rr = np.repeat(reps, nsite)
        u = uniform_at(SeedSpec(master_seed, 0, "init"), rx, ry, replicas=rr)
        states = np.ascontiguousarray((u <= p).astype(np.uint8).reshape(b, w, h).transpose(0, 2, 1))
        if t > 0:
            clocks = ClockStream(SeedSpec(master_seed, 0, "clock"))
            times, owner = clocks.ring_table(rx, ry, t, replicas=rr)
            rep = owner // nsite
            order = np.lexsort((times, rep))
            owner = owner[order]
            times, rep = times[order], rep[order]
            ly = ry[owner] - box.y0
            lx = rx[owner] - box.x0
            offsets = np.searchsorted(rep, np.arange(b + 1))
            _kernels.run_batch(states, offsets, times, ly, lx, _policy_code(policy),
                               float(force_one_until))
        out[lo:lo + b] = states
    return out


# --- lazy backward evaluation -------------------------------------------------


class LazyEvaluator:
    """Backward evaluation of single opinions at a fixed horizon ``t``.

    ``init`` is either an :class:`InitialField` (the process on all of Z^2) or
    a :class:`SpinConfig` (the process on ``init.region`` under ``policy``).
    Memoised values are shared between queries on the same evaluator.
    """

    TILE = 8

    def __init__(self, clocks, init, t: float, policy=BoundaryPolicy.FROZEN_ZERO,
                 budget: int = 10_000_000):
        if t < 0:
            raise ValueError("t must be non-negative")
        self.clocks = clocks
        self.init = init
        self.t = float(t)
        self.policy = BoundaryPolicy.parse(policy)
        self.budget = budget
        self.region = init.region if isinstance(init, SpinConfig) else None
        self._rings: dict[Site, list[float]] = {}
        self._init: dict[Site, int] = {}
        self._memo: dict[tuple[Site, int], int] = {}
        self.evaluations = 0

    def _tile(self, s: Site) -> tuple[np.ndarray, np.ndarray]:
        k = self.TILE
        tx, ty = (s.x // k) * k, (s.y // k) * k
        tile = Rect(tx, tx + k - 1, ty, ty + k - 1)
        if self.region is not None:
            r = self.region
            tile = Rect(max(tile.x0, r.x0), min(tile.x1, r.x1), max(tile.y0, r.y0), min(tile.y1, r.y1))
        return tile.coords()

    def rings(self, s: Site) -> list[float]:
        r = self._rings.get(s)
        if r is not None:
            return r
        if isinstance(self.clocks, ExplicitClocks):
            self._rings[s] = r = self.clocks.rings(s, self.t)
            return r
        xs, ys = self._tile(s)
        times, owner = self.clocks.ring_table(xs, ys, self.t)
        split = np.searchsorted(owner, np.arange(len(xs) + 1))
        for i, (x, y) in enumerate(zip(xs.tolist(), ys.tolist())):
            self._rings[Site(x, y)] = times[split[i]:split[i + 1]].tolist()
        return self._rings[s]

    def initial(self, s: Site) -> int:
        v = self._init.get(s)
        if v is not None:
            return v
        if isinstance(self.init, SpinConfig):
            v = self.init[s]
            self._init[s] = v
            return v
        xs, ys = self._tile(s)
        vals = self.init.values(xs, ys)
        for x, y, b in zip(xs.tolist(), ys.tolist(), vals.tolist()):
            self._init[Site(x, y)] = b
        return self._init[s]

    def _sources(self, s: Site) -> list:
        if self.region is None:
            return [Site(s.x + 1, s.y), Site(s.x - 1, s.y), Site(s.x, s.y + 1), Site(s.x, s.y - 1)]
        return [nb.source for nb in neighbors(s, self.region, self.policy)]

    def _count_before(self, v: Site, r: float, s: Site) -> int:
        # rings of v ordered before the event (r, s) in the global (time, x, y) order
        ts = self.rings(v)
        k = bisect.bisect_left(ts, r)
        if k < len(ts) and ts[k] == r and v < s:
            k += 1
        return k

    def value(self, s, t: float | None = None) -> int:
        """Opinion of ``s`` at time ``t`` (default: the evaluator horizon)."""
        s = Site(*s)
        if self.region is not None and not self.region.contains(s):
            raise ValueError(f"site {s} outside region {self.region}")
        t = self.t if t is None else t
        if t > self.t:
            raise ValueError("query time beyond evaluator horizon")
        k = bisect.bisect_right(self.rings(s), t)
        return self._value(s, k)

    def _value(self, s: Site, k: int) -> int:
        memo = self._memo
        stack = [(s, k)]
        while stack:
            v, j = stack[-1]
            if (v, j) in memo:
                stack.pop()
                continue
            if j == 0:
                memo[(v, 0)] = self.initial(v)
                stack.pop()
                continue
            r = self.rings(v)[j - 1]
            srcs = self._sources(v)
            deps = [(v, j - 1)]
            consts = 0
            for src in srcs:
                if isinstance(src, int):
                    consts += src
                else:
                    deps.append((src, self._count_before(src, r, v)))
            missing = [d for d in deps if d not in memo]
            if missing:
                stack.extend(missing)
                continue
            self.evaluations += 1
            if self.evaluations > self.budget:
                raise RuntimeError("lazy evaluation budget exceeded; clock stream suspect")
            ones = consts + sum(memo[d] for d in deps[1:])
            deg = len(srcs)
            if 2 * ones > deg:
                memo[(v, j)] = 1
            elif 2 * ones < deg:
                memo[(v, j)] = 0
            else:
                memo[(v, j)] = memo[(v, j - 1)]
            stack.pop()
        return memo[(s, k)]

    def influence(self) -> set[Site]:
        """Sites whose initial opinion has been read so far."""
        return {v for (v, j) in self._memo if j == 0}


def evaluate_lazy(s, t: float, clocks, init, policy=BoundaryPolicy.FROZEN_ZERO) -> int:
    """Opinion ``eta_t(s)`` by backward recursion through the clocks."""
    return LazyEvaluator(clocks, init, t, policy).value(s)


@dataclass(frozen=True)
class InfluenceSet:
    root: Site
    t: float
    members: frozenset

    def radius(self) -> int:
        """Largest sup-norm distance from the root."""
        return max(max(abs(v.x - self.root.x), abs(v.y - self.root.y)) for v in self.members)


def influence_set(s, t: float, clocks, region: Rect | None = None,
                  policy=BoundaryPolicy.FROZEN_ZERO) -> InfluenceSet:
    """Sites whose initial opinions ``evaluate_lazy(s, t)`` reads.

    The set depends on the clocks only, so it is computed against an
    all-zero initial condition.
    """
    s = Site(*s)
    if region is None:
        init = InitialField(SeedSpec(0, 0, "init"), 0.0)
    else:
        init = SpinConfig.constant(region, 0)
    ev = LazyEvaluator(clocks, init, t, policy)
    ev.value(s)
    return InfluenceSet(s, float(t), frozenset(ev.influence()))


# --- cone-of-light padding ----------------------------------------------------


def cone_bound(t: float, m: int) -> float:
    """``min(1, 4 * 3^m * P[Poisson(t) >= m])``: chance a cone reaches distance ``m``."""
    if m <= 0:
        return 1.0
    if t <= 0:
        return 0.0
    log_b = math.log(4) + m * math.log(3) + stats.poisson.logsf(m - 1, t)
    return 1.0 if log_b >= 0 else math.exp(log_b)


@dataclass(frozen=True)
class PadBound:
    t: float
    u: float
    m: int
    bound: float

    @classmethod
    def from_slack(cls, t: float, u: float) -> "PadBound":
        if u < 0:
            raise ValueError("slack must be non-negative")
        m = math.ceil(CONE_RATE * t + u)
        return cls(float(t), float(u), m, cone_bound(t, m))


def pad_radius(t: float, eps: float) -> PadBound:
    """Smallest padding ``m = ceil(3 e^2 t + u)`` whose cone bound is ``<= eps``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if eps <= 0:
        raise ValueError("eps must be positive")
    base = CONE_RATE * t
    m = math.ceil(base)
    while cone_bound(t, m) > eps:
        m += 1
    u = 0.0 if m == math.ceil(base) else m - base
    return PadBound(float(t), u, m, cone_bound(t, m))


def default_pad(window: Rect, t: float) -> PadBound:
    """Padding for Z^2 approximation of ``window``: ``eps = 1e-6 / boundary size``."""
    return pad_radius(t, 1e-6 / window.boundary_size)


# --- quiescence ---------------------------------------------------------------


@dataclass
class QuiescenceResult:
    final: SpinConfig
    quiescent: bool
    time: float | None
    flip_counts: np.ndarray
    trajectory: Trajectory = field(repr=False)


def is_quiescent(config: SpinConfig, policy=BoundaryPolicy.FREE_FINITE) -> bool:
    return _kernels.count_unstable(config.bits.copy(), _policy_code(policy)) == 0


def run_to_quiescence(init: SpinConfig, clocks, policy=BoundaryPolicy.FREE_FINITE,
                      t_max: float = 1000.0) -> QuiescenceResult:
    """Evolve until no site would change when its clock rings, or until ``t_max``.

    The horizon doubles from 1 until quiescence; the reported time is the
    last flip (0 when ``init`` is already quiescent).
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    code = _policy_code(policy)
    region = init.region
    state = init.bits.copy()
    parts = []
    t_prev, horizon = 0.0, min(1.0, t_max)
    quiescent = _kernels.count_unstable(state, code) == 0
    while not quiescent:
        times, ly, lx = _events_local(clocks, region, horizon)
        keep = times > t_prev if t_prev > 0 else np.ones(len(times), dtype=bool)
        times, ly, lx = times[keep], ly[keep], lx[keep]
        flip_idx = np.empty(len(times), dtype=np.int64)
        nflip = _kernels.run_events(state, times, ly, lx, code, -math.inf, flip_idx)
        idx = flip_idx[:nflip]
        parts.append((times[idx], lx[idx], ly[idx]))
        quiescent = _kernels.count_unstable(state, code) == 0
        if horizon >= t_max:
            break
        t_prev, horizon = horizon, min(2 * horizon, t_max)
    if parts:
        ft = np.concatenate([a for a, _, _ in parts])
        fx = np.concatenate([b for _, b, _ in parts])
        fy = np.concatenate([c for _, _, c in parts])
    else:
        ft, fx, fy = np.empty(0), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    news = state_after(np.arange(len(ft)), fy, fx, init.bits)
    traj = Trajectory(init, SpinConfig(region, state), ft, fx + region.x0, fy + region.y0, news)
    qtime = (float(ft[-1]) if len(ft) else 0.0) if quiescent else None
    return QuiescenceResult(traj.final, quiescent, qtime, traj.flip_counts(), traj)
