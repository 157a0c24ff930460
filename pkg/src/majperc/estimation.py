"""Monte Carlo estimates of crossing and circuit probabilities.

Replica ``r`` of a run with master seed ``s`` always uses the initial field
``SeedSpec(s, r, "init")`` and the clocks ``SeedSpec(s, r, "clock")``, so an
estimate depends only on ``(s, replica ids)``. Chunks of replicas may be
evaluated in any order or in parallel; aggregation only sums counts.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import optimize, stats

from . import _kernels
from .clocks import SeedSpec, uniform_field
from .dynamics import PadBound, cone_bound, default_pad, evolve_replicas, pad_radius
from .grid import BoundaryPolicy, Rect, Site
from .percolation import _local_mask, _touching, _label_batch, Connectivity, circuit_batch, h_crossing_batch

EPSILON = 1.0 / (4 * 14 ** 2)
SITES_PER_CHUNK = 2_000_000


class BudgetExhausted(RuntimeError):
    """Raised when a sequential procedure runs out of replicas.

    ``partial`` holds whatever was computed so far.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit value, else ``MAJPERC_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("MAJPERC_THREADS", "").strip()
        threads = int(env) if env else 1
    if threads < 1:
        raise ValueError("thread count must be positive")
    return threads


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return (0.0, 1.0)
    z = stats.norm.ppf(0.5 + confidence / 2)
    return _wilson_z(successes, trials, z)


def _wilson_z(k: int, n: int, z: float) -> tuple[float, float]:
    phat = k / n
    denom = 1 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    # clamp so rounding never pushes an endpoint past p_hat or out of [0, 1]
    return (max(0.0, min(center - half, phat)), min(1.0, max(center + half, phat)))


# --- events ------------------------------------------------------------------


@dataclass(frozen=True)
class EventSpec:
    """An event of the time-``t`` configuration together with its sampling setup.

    Under ``FROZEN_ZERO`` / ``FROZEN_ONE`` the event window is simulated on a
    box padded by ``pad.m`` as an approximation of Z^2. ``FREE_FINITE`` and
    ``PERIODIC`` treat the window itself as the whole graph (``pad`` is
    ``None``).
    """

    kind: str
    window: Rect
    t: float
    p: float
    policy: BoundaryPolicy = BoundaryPolicy.FROZEN_ZERO
    inner: int = 0
    A: tuple = ()
    B: tuple = ()
    pad: PadBound | None = None

    def __post_init__(self):
        if self.kind not in ("h_crossing", "circuit", "connects"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.t < 0:
            raise ValueError("t must be non-negative")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        object.__setattr__(self, "policy", BoundaryPolicy.parse(self.policy))
        if self.policy.frozen_value is not None:
            if self.pad is None:
                object.__setattr__(self, "pad", default_pad(self.window, self.t))
            elif self.pad.t != self.t:
                raise ValueError("pad bound was computed for a different time")
        else:
            object.__setattr__(self, "pad", None)

    @classmethod
    def h_crossing(cls, n: int, lam: float = 2.0, t: float = 0.0, p: float = 0.5,
                   policy=BoundaryPolicy.FROZEN_ZERO) -> "EventSpec":
        """Left-right crossing of ``[1, floor(lam n)] x [1, n]``."""
        if lam <= 0 or n < 1:
            raise ValueError("need lam > 0 and n >= 1")
        width = math.floor(lam * n)
        if width < 1:
            raise ValueError("rectangle width floor(lam n) must be at least 1")
        return cls("h_crossing", Rect(1, width, 1, n), t, p, policy)

    @classmethod
    def circuit(cls, m: int, n: int, t: float = 0.0, p: float = 0.5,
                policy=BoundaryPolicy.FROZEN_ZERO) -> "EventSpec":
        """Open circuit in ``[-n, n]^2`` around ``[-m, m]^2``."""
        if not 0 <= m < n:
            raise ValueError("need 0 <= m < n")
        return cls("circuit", Rect.centered(n), t, p, policy, inner=m)

    @classmethod
    def connects(cls, window: Rect, A, B, t: float = 0.0, p: float = 0.5,
                 policy=BoundaryPolicy.FROZEN_ZERO) -> "EventSpec":
        A = tuple(Site(*a) for a in A)
        B = tuple(Site(*b) for b in B)
        _local_mask(window, A), _local_mask(window, B)
        return cls("connects", window, t, p, policy, A=A, B=B)

    @property
    def box(self) -> Rect:
        return self.window if self.pad is None else self.window.pad(self.pad.m)

    def with_p(self, p: float) -> "EventSpec":
        return replace(self, p=p)

    def describe(self) -> str:
        w = self.window
        if self.kind == "h_crossing":
            geo = f"H({w.width},{w.height})"
        elif self.kind == "circuit":
            geo = f"Cir({self.inner},{w.x1})"
        else:
            geo = f"connects(|A|={len(self.A)},|B|={len(self.B)}) in {w}"
        pad = "none" if self.pad is None else str(self.pad.m)
        return f"{geo} t={self.t!r} p={self.p!r} policy={self.policy.name} pad={pad}"

    def evaluate(self, states: np.ndarray) -> np.ndarray:
        """Event indicator of every replica in a ``(B, h, w)`` stack on :attr:`box`."""
        box, w = self.box, self.window
        sub = states[:, w.y0 - box.y0:w.y1 - box.y0 + 1, w.x0 - box.x0:w.x1 - box.x0 + 1]
        if self.kind == "h_crossing":
            return h_crossing_batch(sub)
        if self.kind == "circuit":
            return circuit_batch(sub, self.inner, w.x1, w)
        labels, count = _label_batch(sub, Connectivity.NEAREST_NEIGHBOR)
        return _touching(labels, count, _local_mask(w, self.A), _local_mask(w, self.B))


@dataclass(frozen=True)
class EventProbEstimate:
    spec: EventSpec
    replicas: int
    successes: int
    p_hat: float
    ci: tuple[float, float]
    seeds: tuple[int, int, int]  # (master_seed, first replica id, last replica id)

    @property
    def sigma(self) -> float:
        """Binomial standard error of ``p_hat``."""
        return math.sqrt(self.p_hat * (1 - self.p_hat) / self.replicas)


def replica_outcomes(spec: EventSpec, seed: int, replica_ids, threads: int | None = None) -> np.ndarray:
    """Event indicator per replica id, in the order given."""
    ids = np.asarray(replica_ids, dtype=np.int64)
    box = spec.box
    per = max(1, SITES_PER_CHUNK // box.area)
    parts = [ids[i:i + per] for i in range(0, len(ids), per)]

    def work(chunk):
        states = evolve_replicas(box, spec.p, spec.t, spec.policy, seed, chunk)
        return spec.evaluate(states)

    threads = resolve_threads(threads)
    if threads == 1 or len(parts) == 1:
        results = [work(c) for c in parts]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, parts))
    return np.concatenate(results) if results else np.zeros(0, dtype=bool)


def mc_event_prob(spec: EventSpec, replicas: int, seed: int, first_replica: int = 0,
                  threads: int | None = None) -> EventProbEstimate:
    """Estimate ``P[event]`` from replicas ``first_replica .. first_replica + replicas - 1``."""
    if replicas < 1:
        raise ValueError("replicas must be at least 1")
    hits = replica_outcomes(spec, seed, np.arange(first_replica, first_replica + replicas), threads)
    k = int(hits.sum())
    return EventProbEstimate(spec, replicas, k, k / replicas, wilson_interval(k, replicas),
                             (int(seed), first_replica, first_replica + replicas - 1))


# --- threshold search --------------------------------------------------------


@dataclass(frozen=True)
class TracePoint:
    p: float
    replicas: int
    successes: int
    ci_lo: float
    ci_hi: float
    decision: str  # "above" / "below" (confident) or "above?" / "below?" (by sign only)
    stage: str = "bisect"

    @property
    def p_hat(self) -> float:
        return self.successes / self.replicas

    @property
    def confident(self) -> bool:
        return not self.decision.endswith("?")


@dataclass
class ThresholdEstimate:
    """Density at which the crossing probability passes ``target``.

    ``ci`` runs from the largest probe confidently below ``target`` to the
    smallest probe confidently above it, each decided at level ``z``.
    """

    t: float
    n: int
    lam: float
    target: float
    p_star: float
    ci: tuple[float, float]
    trace: list[TracePoint] = field(default_factory=list)
    replicas_used: int = 0
    master_seed: int = 0
    z: float = 3.0


def _probe(spec: EventSpec, target: float, seed: int, z: float, batch0: int,
           max_per_point: int, threads, stage: str) -> TracePoint:
    n_done, k = 0, 0
    size = batch0
    while True:
        hits = replica_outcomes(spec, seed, np.arange(n_done, n_done + size), threads)
        k += int(hits.sum())
        n_done += size
        lo, hi = _wilson_z(k, n_done, z)
        if lo > target:
            return TracePoint(spec.p, n_done, k, lo, hi, "above", stage)
        if hi < target:
            return TracePoint(spec.p, n_done, k, lo, hi, "below", stage)
        if n_done >= max_per_point:
            guess = "above?" if k / n_done >= target else "below?"
            return TracePoint(spec.p, n_done, k, lo, hi, guess, stage)
        size = min(n_done, max_per_point - n_done)


def threshold_search(t: float, n: int, lam: float = 2.0, target: float = 0.5, tol: float = 0.004,
                     seed: int = 0, policy=BoundaryPolicy.FROZEN_ZERO, z: float = 3.0,
                     batch0: int = 64, max_per_point: int = 4096, budget: int = 500_000,
                     threads: int | None = None) -> ThresholdEstimate:
    """Bisection on ``p`` for ``P_p[H(floor(lam n), n)] = target`` at time ``t``.

    Each probe samples replicas in doubling batches (starting at ``batch0``)
    until the Wilson interval at level ``z`` excludes ``target``; a probe
    still undecided after ``max_per_point`` replicas is classified by the
    sign of ``p_hat - target``. Bisection stops once the bracket is
    narrower than ``tol``. Confirmation probes at ``p_star -+ j * tol`` then
    make both ends of ``ci`` confident decisions. All probes reuse replica
    ids ``0, 1, ...``, so estimates at different ``p`` share their
    randomness and are monotone in ``p``. Using more than ``budget``
    replicas raises :class:`BudgetExhausted` with the partial estimate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0.0 < target < 1.0:
        raise ValueError("target must lie in (0, 1)")
    base = EventSpec.h_crossing(n, lam, t, 0.5, policy)
    est = ThresholdEstimate(t, n, lam, target, 0.5, (0.0, 1.0), [], 0, seed, z)

    def run(p: float, stage: str) -> TracePoint:
        point = _probe(base.with_p(p), target, seed, z, batch0, max_per_point, threads, stage)
        est.trace.append(point)
        est.replicas_used += point.replicas
        if est.replicas_used > budget:
            raise BudgetExhausted(f"threshold search used {est.replicas_used} > {budget} replicas", est)
        return point

    lo, hi = 0.0, 1.0
    while hi - lo >= tol:
        mid = (lo + hi) / 2
        if run(mid, "bisect").decision.startswith("above"):
            hi = mid
        else:
            lo = mid
        est.p_star = (lo + hi) / 2
    p_star = est.p_star

    def bounds():
        below = [q.p for q in est.trace if q.decision == "below"]
        above = [q.p for q in est.trace if q.decision == "above"]
        return max(below, default=0.0), min(above, default=1.0)

    for j in range(1, 1 + math.ceil(1 / tol)):
        c_lo, c_hi = bounds()
        need_lo = c_lo < p_star - j * tol and p_star - j * tol > 0
        need_hi = c_hi > p_star + j * tol and p_star + j * tol < 1
        if not (need_lo or need_hi):
            break
        if need_lo and c_lo < p_star - j * tol:
            run(p_star - j * tol, "confirm")
        if need_hi and c_hi > p_star + j * tol:
            run(p_star + j * tol, "confirm")
        c_lo, c_hi = bounds()
        if c_lo >= p_star - j * tol and c_hi <= p_star + j * tol:
            break
    est.ci = bounds()
    return est


# --- Newman-Ziff cross-check -------------------------------------------------


@dataclass
class NewmanZiffEstimate:
    """Crossing threshold from cluster-growth sweeps at time 0.

    ``steps[s]`` is the number of occupied sites at which sweep ``s`` first
    crossed; ``largest_fraction[k - 1]`` is the mean largest cluster size
    divided by the area after ``k`` occupations and ``largest_fraction_sq``
    the mean of its square.
    """

    n: int
    lam: float
    target: float
    p_star: float
    se: float
    steps: np.ndarray
    largest_fraction: np.ndarray
    master_seed: int
    largest_fraction_sq: np.ndarray | None = None

    @property
    def ci(self) -> tuple[float, float]:
        return (self.p_star - 1.96 * self.se, self.p_star + 1.96 * self.se)

    @property
    def area(self) -> int:
        return len(self.largest_fraction)

    def _weights(self, p: float) -> np.ndarray:
        # P[Binomial(N, p) >= k] for k = 0..N+1
        k = np.arange(self.area + 2)
        return stats.binom.sf(k - 1, self.area, p)

    def crossing_probability(self, p: float) -> float:
        """Canonical-ensemble crossing probability at density ``p``."""
        return float(self._weights(p)[self.steps].mean())

    def largest_cluster_fraction(self, p: float) -> float:
        k = np.arange(self.area + 1)
        pmf = stats.binom.pmf(k, self.area, p)
        return float(pmf[1:] @ self.largest_fraction)

    def largest_cluster_susceptibility(self, p: float) -> float:
        """``N * Var(largest cluster fraction)`` in the canonical ensemble at ``p``."""
        k = np.arange(1, self.area + 1)
        pmf = stats.binom.pmf(k, self.area, p)
        m1 = pmf @ self.largest_fraction
        return float(self.area * (pmf @ self.largest_fraction_sq - m1 * m1))

    def largest_cluster_threshold(self, lo: float = 0.5, hi: float = 0.75) -> float:
        """Density maximising the largest-cluster susceptibility on ``[lo, hi]``.

        A threshold estimate built only from the size of the largest cluster,
        without reference to any crossing.
        """
        grid = np.linspace(lo, hi, 101)
        chi = np.array([self.largest_cluster_susceptibility(p) for p in grid])
        i = int(chi.argmax())
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        res = optimize.minimize_scalar(lambda p: -self.largest_cluster_susceptibility(p), bounds=(a, b),
                                       method="bounded", options={"xatol": 1e-6})
        return float(res.x)


def newman_ziff_threshold(n: int, lam: float = 2.0, sweeps: int = 2000, seed: int = 0,
                          target: float = 0.5) -> NewmanZiffEstimate:
    """Independent estimate of the time-0 crossing threshold of ``H(floor(lam n), n)``.

    Sites are occupied one at a time in a random order (from the ``"nz"``
    stream) and clusters are grown by union-find. The step at which a
    left-right crossing first appears converts into the crossing probability
    at any density by binomial averaging.
    """
    window = Rect(1, math.floor(lam * n), 1, n)
    h, w = window.shape
    orders = np.empty((sweeps, window.area), dtype=np.int64)
    for s in range(sweeps):
        u = uniform_field(SeedSpec(seed, s, "nz"), window).ravel()
        orders[s] = np.argsort(u, kind="stable")
    steps, sizes, sizes2 = _kernels.crossing_steps(orders, h, w)
    est = NewmanZiffEstimate(n, lam, target, math.nan, math.nan, steps,
                             sizes / (sweeps * window.area), seed,
                             sizes2 / (sweeps * window.area ** 2))
    f = lambda p: est.crossing_probability(p) - target  # noqa: E731
    p_star = optimize.brentq(f, 1e-9, 1 - 1e-9, xtol=1e-12)
    # delta method: the crossing probability is a mean of per-sweep terms
    per = est._weights(p_star)[steps]
    dp = 1e-4
    slope = (est.crossing_probability(p_star + dp) - est.crossing_probability(p_star - dp)) / (2 * dp)
    est.p_star = p_star
    est.se = float(per.std(ddof=1) / math.sqrt(sweeps) / slope) if slope > 0 else math.inf
    return est


# --- covariance --------------------------------------------------------------


@dataclass(frozen=True)
class CovarianceEstimate:
    x: Site
    y: Site
    p: float
    t: float
    replicas: int
    cov: float
    se: float
    mean_x: float
    mean_y: float

    @property
    def ci(self) -> tuple[float, float]:
        return (self.cov - 1.96 * self.se, self.cov + 1.96 * self.se)


def _site_values(sites: Sequence[Site], t: float, p: float, seed: int, ids: np.ndarray,
                 policy, eps: float) -> np.ndarray:
    """Opinions at time ``t`` of the given sites for each replica, shape ``(B, len(sites))``."""
    pad = pad_radius(t, eps).m
    out = np.empty((len(ids), len(sites)), dtype=np.uint8)
    # group sites whose padded boxes overlap into one simulation box
    groups: list[list[int]] = []
    for i, s in enumerate(sites):
        for g in groups:
            if any(max(abs(s.x - sites[j].x), abs(s.y - sites[j].y)) <= 2 * pad + 1 for j in g):
                g.append(i)
                break
        else:
            groups.append([i])
    for g in groups:
        xs = [sites[i].x for i in g]
        ys = [sites[i].y for i in g]
        box = Rect(min(xs), max(xs), min(ys), max(ys)).pad(pad)
        per = max(1, SITES_PER_CHUNK // box.area)
        for lo in range(0, len(ids), per):
            states = evolve_replicas(box, p, t, policy, seed, ids[lo:lo + per])
            for i in g:
                out[lo:lo + per, i] = states[:, sites[i].y - box.y0, sites[i].x - box.x0]
    return out


def covariance_estimate(p: float, t: float, x, y, replicas: int, seed: int = 0,
                        policy=BoundaryPolicy.FROZEN_ZERO, eps: float = 1e-6) -> CovarianceEstimate:
    """Sample covariance of ``eta_t(x)`` and ``eta_t(y)`` on Z^2.

    Each site is simulated on a box padded by ``pad_radius(t, eps)``; sites
    whose boxes would overlap share one box. ``se`` is the standard error of
    the mean of the centred products.
    """
    if replicas < 2:
        raise ValueError("replicas must be at least 2")
    x, y = Site(*x), Site(*y)
    ids = np.arange(replicas, dtype=np.int64)
    vals = _site_values([x, y], t, p, seed, ids, policy, eps).astype(float)
    a, b = vals[:, 0], vals[:, 1]
    prod = (a - a.mean()) * (b - b.mean())
    cov = float(prod.sum() / (replicas - 1))
    se = float(prod.std(ddof=1) / math.sqrt(replicas))
    return CovarianceEstimate(x, y, p, t, replicas, cov, se, float(a.mean()), float(b.mean()))


# --- renormalisation ---------------------------------------------------------


def decoupling_correction(t: float, L: int, factor: int) -> float:
    """Evaluated additive term of the renormalisation recursion at scale ``L``.

    The decoupling constant is replaced by the cone bound: two cones started
    at distance ``d`` can only meet if one of them reaches ``ceil(d / 2)``.
    With ``d = L`` (factor 3) or ``2L`` (factor 4) and boundary products
    ``64 L^2`` or ``100 L^2``, the term is
    ``prefactor * boundary * 2 * cone_bound(t, ceil(d / 2))``.
    """
    if factor == 3:
        prefactor, boundary, d = 49, 64 * L * L, L
    elif factor == 4:
        prefactor, boundary, d = 196, 100 * L * L, 2 * L
    else:
        raise ValueError("factor must be 3 or 4")
    return prefactor * boundary * 2 * cone_bound(t, math.ceil(d / 2)) if t > 0 else 0.0


@dataclass(frozen=True)
class RenormRow:
    k: int
    L: int
    replicas: int
    failures: int
    q_hat: float
    q_lo: float
    q_hi: float
    bound: float  # prefactor * q_{k-1}^2 + correction, from the previous row's upper bound
    correction: float
    holds: bool | None  # None for k = 0 or when the bound is vacuous (>= 1)


@dataclass
class RenormTrace:
    p: float
    t: float
    L0: int
    factor: int
    master_seed: int
    rows: list[RenormRow]

    @property
    def prefactor(self) -> int:
        return 49 if self.factor == 3 else 196

    @property
    def all_hold(self) -> bool:
        return all(r.holds is not False for r in self.rows)


def renorm_trace(p: float, t: float, L0: int, factor: int = 3, k_max: int = 2, seed: int = 0,
                 replicas: int = 2000, policy=BoundaryPolicy.FROZEN_ZERO,
                 threads: int | None = None, max_sites: int = 5_000_000) -> RenormTrace:
    """Failure probabilities ``q_k = P[H(factor L_k, L_k)^c]`` along ``L_k = L0 factor^k``.

    Row ``k >= 1`` compares the measured ``q_k`` with
    ``prefactor * q_{k-1}^2 + correction``. To keep the comparison honest
    under sampling noise, the lower 95% Wilson bound of ``q_k`` is compared
    with the bound evaluated at the upper 95% Wilson bound of ``q_{k-1}``.
    """
    if factor not in (3, 4):
        raise ValueError("factor must be 3 or 4")
    top = L0 * factor ** k_max
    if factor * top * top > max_sites:
        raise ValueError(f"largest scale needs {factor * top * top} sites > max_sites={max_sites}")
    trace = RenormTrace(p, t, L0, factor, seed, [])
    prev = None
    for k in range(k_max + 1):
        L = L0 * factor ** k
        est = mc_event_prob(EventSpec.h_crossing(L, factor, t, p, policy), replicas, seed, threads=threads)
        fails = replicas - est.successes
        q_lo, q_hi = wilson_interval(fails, replicas)
        if prev is None:
            bound, corr, holds = math.nan, math.nan, None
        else:
            corr = decoupling_correction(t, prev.L, factor)
            bound = trace.prefactor * prev.q_hi ** 2 + corr
            holds = None if bound >= 1 else bool(q_lo <= bound)
        prev = RenormRow(k, L, replicas, fails, fails / replicas, q_lo, q_hi, bound, corr, holds)
        trace.rows.append(prev)
    return trace


# --- certificate -------------------------------------------------------------


@dataclass(frozen=True)
class CertificateReport:
    p: float
    t: float
    n: int
    replicas: int
    failures: int
    q_hat: float
    q_upper: float
    epsilon: float
    status: str
    prediction: float
    correction: float
    n0: int
    T: float
    master_seed: int

    def to_text(self) -> str:
        lines = [
            "[certificate]",
            f"event = H(4n,n) complement, n = {self.n}",
            f"p = {self.p!r}",
            f"t = {self.t!r}",
            f"T = {self.T!r}",
            f"n0 = {self.n0}",
            f"replicas = {self.replicas}",
            f"master_seed = {self.master_seed}",
            f"failures = {self.failures}",
            f"q_hat = {self.q_hat:.17g}",
            f"q_upper_95 = {self.q_upper:.17g}",
            f"epsilon = {self.epsilon:.17g}",
            f"next_scale_prediction = {self.prediction:.17g}",
            f"decoupling_term = {self.correction:.17g}",
            f"status = {self.status}",
        ]
        return "\n".join(lines) + "\n"


def percolation_certificate(p: float, t: float, n: int, seed: int = 0, replicas: int = 4000,
                            n0: int | None = None, T: float | None = None,
                            policy=BoundaryPolicy.FROZEN_ZERO, threads: int | None = None) -> CertificateReport:
    """Finite-size certificate ``P[H(4n, n)^c] < epsilon = 1 / (4 * 14^2)``.

    ``n0`` defaults to ``ceil(3 e^2 T)`` with ``T = t``; these are stand-ins
    for constants that are only known to exist. CERTIFIED requires the upper
    95% Wilson bound on the failure probability to lie below epsilon, which
    needs at least about 3000 replicas even with no failures.
    """
    T = t if T is None else T
    if t > T:
        raise ValueError(f"t={t} exceeds the configured time bound T={T}")
    n0 = math.ceil(3 * math.e ** 2 * T) if n0 is None else n0
    if n < n0:
        raise ValueError(f"n={n} is below the configured n0={n0}")
    est = mc_event_prob(EventSpec.h_crossing(n, 4, t, p, policy), replicas, seed, threads=threads)
    fails = replicas - est.successes
    q_hat = fails / replicas
    q_upper = wilson_interval(fails, replicas)[1]
    corr = decoupling_correction(t, n, 4)
    prediction = 196 * (q_hat ** 2 + corr)
    status = "CERTIFIED" if q_upper < EPSILON else "UNDECIDED"
    return CertificateReport(p, t, n, replicas, fails, q_hat, q_upper, EPSILON, status, prediction,
                             corr, n0, T, seed)
