"""Exact law of the time-``t`` configuration on tiny graphs.

On an ``n``-site graph the superposition of the site clocks is a rate-``n``
Poisson process whose marks are uniform over the sites. A fixed ordered
sequence of ``k`` rings therefore has weight ``exp(-n t) t^k / k!``, and
truncating at ``K`` rings loses exactly ``P[Poisson(n t) > K]`` of the mass.

The default ``"dp"`` method pushes the initial product law through ``K``
uniformly random site updates (``2^n`` states); ``"enumerate"`` walks every
ring sequence explicitly and is limited to ``n^K <= 1e8``. Both obtain the
update rule from :func:`majperc.dynamics.step_site`.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .dynamics import step_site
from .grid import BoundaryPolicy, Rect, Site, SpinConfig

N_MAX = 12
ENUMERATION_GUARD = 10 ** 8
DEFAULT_TAIL = 1e-6

Event = Callable[[SpinConfig], bool]


class OracleBudgetError(ValueError):
    """The requested exact computation is too large."""


class NotIncreasing(ValueError):
    """An event handed to the FKG check is not increasing."""


def poisson_tail(rate: float, K: int) -> float:
    """``P[Poisson(rate) > K]``."""
    return float(stats.poisson.sf(K, rate)) if rate > 0 else 0.0


def truncation_for(rate: float, tail: float = DEFAULT_TAIL) -> int:
    """Smallest ``K`` with ``P[Poisson(rate) > K] < tail``."""
    K = 0
    while poisson_tail(rate, K) >= tail:
        K += 1
    return K


def sequence_weight(k: int, n: int, t: float) -> float:
    """Probability of one specific ordered ring sequence of length ``k``."""
    return float(np.exp(stats.poisson.logpmf(k, n * t) - k * np.log(n))) if t > 0 else float(k == 0)


def config_from_index(region: Rect, index: int) -> SpinConfig:
    """Configuration whose row-major site ``i`` holds bit ``i`` of ``index``."""
    bits = [(index >> i) & 1 for i in range(region.area)]
    return SpinConfig(region, np.array(bits, dtype=np.uint8).reshape(region.shape))


def config_index(config: SpinConfig) -> int:
    return int(sum(int(b) << i for i, b in enumerate(config.bits.ravel())))


def transition_tables(region: Rect, policy=BoundaryPolicy.FREE_FINITE) -> np.ndarray:
    """``T[s, c]``: configuration index after site ``s`` rings in configuration ``c``."""
    n = region.area
    sites = list(region.sites())
    T = np.empty((n, 1 << n), dtype=np.int64)
    for c in range(1 << n):
        cfg = config_from_index(region, c)
        for s, site in enumerate(sites):
            new = step_site(cfg, site, policy)
            T[s, c] = (c & ~(1 << s)) | (new << s)
    return T


@dataclass
class ExactLaw:
    """Truncated law of the configuration at time ``t``.

    ``masses[c]`` is the mass of configuration index ``c``; the masses sum
    to ``1 - tail`` up to rounding.
    """

    region: Rect
    policy: BoundaryPolicy
    t: float
    p: float
    K: int
    masses: np.ndarray
    tail: float
    method: str = "dp"
    _configs: list = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.region.area

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def configs(self) -> list[SpinConfig]:
        if self._configs is None:
            self._configs = [config_from_index(self.region, c) for c in range(1 << self.n)]
        return self._configs

    def indicator(self, event: Event) -> np.ndarray:
        return np.array([bool(event(c)) for c in self.configs()])

    def site_marginals(self) -> np.ndarray:
        """``P[eta_t(s) = 1]`` lower bounds for every site in row-major order."""
        idx = np.arange(1 << self.n)
        return np.array([self.masses[(idx >> s) & 1 == 1].sum() for s in range(self.n)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        r = self.region
        buf.write(f"# region={r.x0},{r.x1},{r.y0},{r.y1} policy={self.policy.name} t={self.t!r} "
                  f"p={self.p!r} K={self.K} method={self.method}\n")
        buf.write(f"# tail={self.tail:.17g}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["config_bits", "mass"])
        for c in range(1 << self.n):
            bits = "".join(str((c >> i) & 1) for i in range(self.n))
            w.writerow([bits, f"{self.masses[c]:.17g}"])
        return buf.getvalue()


def _initial_law(n: int, p: float) -> np.ndarray:
    ones = np.array([bin(c).count("1") for c in range(1 << n)])
    return p ** ones * (1 - p) ** (n - ones)


def exact_law(region: Rect, t: float, p: float, K: int | None = None,
              policy=BoundaryPolicy.FREE_FINITE, method: str = "dp",
              tail_target: float = DEFAULT_TAIL) -> ExactLaw:
    """Exact law truncated at ``K`` rings (default: tail below ``tail_target``)."""
    policy = BoundaryPolicy.parse(policy)
    n = region.area
    if n > N_MAX:
        raise OracleBudgetError(f"{n} sites exceed the oracle limit of {N_MAX}")
    if t < 0 or not 0.0 <= p <= 1.0:
        raise ValueError("need t >= 0 and p in [0, 1]")
    rate = n * t
    if K is None:
        K = truncation_for(rate, tail_target)
    if method == "enumerate" and sum(n ** k for k in range(K + 1)) > ENUMERATION_GUARD:
        raise OracleBudgetError(f"enumerating {n}^{K} ring sequences exceeds the guard")
    T = transition_tables(region, policy)
    pi0 = _initial_law(n, p)
    if method == "dp":
        masses = _dp(T, pi0, rate, K)
    elif method == "enumerate":
        masses = _enumerate(T, pi0, t, K)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ExactLaw(region, policy, float(t), float(p), K, masses, poisson_tail(rate, K), method)


def _dp(T: np.ndarray, pi0: np.ndarray, rate: float, K: int) -> np.ndarray:
    n = T.shape[0]
    masses = np.zeros_like(pi0)
    cur = pi0.copy()
    for k in range(K + 1):
        masses += stats.poisson.pmf(k, rate) * cur if rate > 0 else (cur if k == 0 else 0)
        nxt = np.zeros_like(cur)
        for s in range(n):
            np.add.at(nxt, T[s], cur)
        cur = nxt / n
    return masses


def _enumerate(T: np.ndarray, pi0: np.ndarray, t: float, K: int) -> np.ndarray:
    n = T.shape[0]
    masses = np.zeros_like(pi0)
    start = np.arange(len(pi0))
    for k in range(K + 1):
        w = sequence_weight(k, n, t)
        if w == 0.0:
            continue
        for seq in itertools.product(range(n), repeat=k):
            cur = start
            for s in seq:
                cur = T[s, cur]
            np.add.at(masses, cur, w * pi0)
    return masses


def oracle_event_prob(law: ExactLaw, event: Event) -> tuple[float, float]:
    """Rigorous interval ``(lower, lower + tail)`` for ``P[event]``."""
    lower = float(law.masses[law.indicator(event)].sum())
    return lower, min(1.0, lower + law.tail)


def is_increasing(region: Rect, event: Event) -> bool:
    """Exhaustive check that opening any site never destroys ``event``."""
    n = region.area
    vals = np.array([bool(event(config_from_index(region, c))) for c in range(1 << n)])
    idx = np.arange(1 << n)
    for s in range(n):
        low = idx[(idx >> s) & 1 == 0]
        if np.any(vals[low] & ~vals[low | (1 << s)]):
            return False
    return True


@dataclass(frozen=True)
class FKGReport:
    p_a: tuple[float, float]
    p_b: tuple[float, float]
    p_ab: tuple[float, float]
    margin: float
    margin_lower: float
    tail: float

    @property
    def passed(self) -> bool:
        return self.margin_lower >= -3 * self.tail

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def oracle_fkg_check(law: ExactLaw, A: Event, B: Event) -> FKGReport:
    """``P[A and B] - P[A] P[B]`` with a rigorous lower bound.

    The lower bound uses the smallest admissible ``P[A and B]`` and the
    largest admissible ``P[A]``, ``P[B]``; the check passes when it is at
    least ``-3 * tail``.
    """
    for name, ev in (("A", A), ("B", B)):
        if not is_increasing(law.region, ev):
            raise NotIncreasing(f"event {name} is not increasing")
    both = lambda c: A(c) and B(c)  # noqa: E731
    pa, pb, pab = (oracle_event_prob(law, e) for e in (A, B, both))
    margin = pab[0] - pa[0] * pb[0]
    margin_lower = pab[0] - pa[1] * pb[1]
    return FKGReport(pa, pb, pab, margin, margin_lower, law.tail)


# --- named increasing events on small boxes ----------------------------------


def _h_cross(c: SpinConfig) -> bool:
    from .percolation import has_h_crossing

    return has_h_crossing(c)


def _v_cross(c: SpinConfig) -> bool:
    from .percolation import has_v_crossing

    return has_v_crossing(c)


def standard_events(region: Rect) -> dict[str, Event]:
    """A fixed family of increasing events on ``region``."""
    r = region
    cx, cy = (r.x0 + r.x1) // 2, (r.y0 + r.y1) // 2
    corner = Site(r.x0, r.y0)
    far = Site(r.x1, r.y1)
    left = [Site(r.x0, y) for y in range(r.y0, r.y1 + 1)]
    right = [Site(r.x1, y) for y in range(r.y0, r.y1 + 1)]
    top = [Site(x, r.y1) for x in range(r.x0, r.x1 + 1)]
    bottom = [Site(x, r.y0) for x in range(r.x0, r.x1 + 1)]
    half = (r.area + 1) // 2
    return {
        "center_open": lambda c: c[(cx, cy)] == 1,
        "corner_open": lambda c: c[corner] == 1,
        "far_corner_open": lambda c: c[far] == 1,
        "left_any": lambda c: any(c[s] for s in left),
        "right_any": lambda c: any(c[s] for s in right),
        "top_all": lambda c: all(c[s] for s in top),
        "bottom_all": lambda c: all(c[s] for s in bottom),
        "h_crossing": _h_cross,
        "v_crossing": _v_cross,
        "majority_open": lambda c: c.count_ones() >= half,
        "two_open": lambda c: c.count_ones() >= 2,
        "center_and_corner": lambda c: c[(cx, cy)] == 1 and c[corner] == 1,
    }


STANDARD_FKG_PAIRS = [
    ("center_open", "center_open"),
    ("center_open", "corner_open"),
    ("corner_open", "far_corner_open"),
    ("left_any", "right_any"),
    ("top_all", "bottom_all"),
    ("h_crossing", "v_crossing"),
    ("h_crossing", "center_open"),
    ("v_crossing", "corner_open"),
    ("h_crossing", "majority_open"),
    ("majority_open", "two_open"),
    ("left_any", "h_crossing"),
    ("top_all", "v_crossing"),
    ("bottom_all", "h_crossing"),
    ("center_and_corner", "far_corner_open"),
    ("center_and_corner", "h_crossing"),
    ("two_open", "corner_open"),
    ("majority_open", "top_all"),
    ("right_any", "far_corner_open"),
    ("left_any", "bottom_all"),
    ("v_crossing", "majority_open"),
]


def fkg_suite(law: ExactLaw) -> list[tuple[str, str, FKGReport]]:
    events = standard_events(law.region)
    return [(a, b, oracle_fkg_check(law, events[a], events[b])) for a, b in STANDARD_FKG_PAIRS]
