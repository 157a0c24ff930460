"""Order-preserving couplings of two copies of the dynamics.

Both copies read the same initial uniforms and the same Poisson clocks.
Because the update rule is monotone, the sitewise order of the two copies
can never be broken; every function below checks it anyway and treats a
violation as a defect.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .clocks import ClockStream, SeedSpec, uniform_field
from .dynamics import _events_local, _policy_code
from .grid import BoundaryPolicy, Rect, SpinConfig


class OrderViolation(AssertionError):
    """The lower copy exceeded the upper copy somewhere."""


def delta_prime(p: float, delta: float) -> float:
    """Extra density gained by forcing rings in ``[0, delta]`` to 1:
    ``(1 - p - delta) * (1 - exp(-delta))``."""
    return (1.0 - p - delta) * -math.expm1(-delta)


@dataclass(frozen=True)
class CoupledPair:
    """Two configurations with ``lower <= upper`` sitewise.

    ``violations`` maps each checkpoint name to the number of sites where the
    order failed there (``"events"`` counts per-event failures in strict
    mode). ``mid`` holds both copies at the intermediate checkpoint, if any.
    """

    lower: SpinConfig
    upper: SpinConfig
    meta: dict = field(default_factory=dict)
    violations: dict = field(default_factory=dict)
    mid: tuple[SpinConfig, SpinConfig] | None = None

    @property
    def total_violations(self) -> int:
        return int(sum(self.violations.values()))

    def __post_init__(self):
        if self.lower.region != self.upper.region:
            raise ValueError("coupled configurations must share a region")


def _order_count(lower: np.ndarray, upper: np.ndarray) -> int:
    return int(np.count_nonzero(lower > upper))


def _shared_randomness(region: Rect, seed) -> tuple[np.ndarray, ClockStream, SeedSpec]:
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
    u = uniform_field(seed.with_purpose("init"), region)
    return u, ClockStream(seed.with_purpose("clock")), seed


def _finish(lower, upper, region, meta, violations, mid, raise_on_violation) -> CoupledPair:
    pair = CoupledPair(SpinConfig(region, lower), SpinConfig(region, upper), meta, violations, mid)
    if raise_on_violation and pair.total_violations:
        raise OrderViolation(f"order violated: {violations}")
    return pair


def monotone_p_pair(p1: float, p2: float, t: float, region: Rect, seed, policy=BoundaryPolicy.FREE_FINITE,
                    strict: bool = False, raise_on_violation: bool = True) -> CoupledPair:
    """Densities ``p1 <= p2`` coupled through one uniform field and one clock stream.

    Checkpoints are time 0 and time ``t``; with ``strict`` the order is also
    checked after every ring.
    """
    if not 0.0 <= p1 <= p2 <= 1.0:
        raise ValueError(f"need 0 <= p1 <= p2 <= 1, got {p1}, {p2}")
    if t < 0:
        raise ValueError("t must be non-negative")
    u, clocks, seed = _shared_randomness(region, seed)
    lower = (u <= p1).astype(np.uint8)
    upper = (u <= p2).astype(np.uint8)
    violations = {"start": _order_count(lower, upper)}
    times, ly, lx = _events_local(clocks, region, t)
    _, bad = _kernels.run_pair(lower, upper, times, ly, lx, _policy_code(policy),
                               -math.inf, -math.inf, float(t), strict)
    violations["events"] = int(bad)
    violations["end"] = _order_count(lower, upper)
    meta = {"kind": "monotone", "p_lower": p1, "p_upper": p2, "t": t, "seed": str(seed),
            "policy": BoundaryPolicy.parse(policy).name}
    return _finish(lower, upper, region, meta, violations, None, raise_on_violation)


def continuity_pair(p: float, delta: float, t: float, region: Rect, seed,
                    policy=BoundaryPolicy.FREE_FINITE, strict: bool = False,
                    raise_on_violation: bool = True) -> CoupledPair:
    """The pair ``(xi, xi_bar)`` used to show continuity in ``p``.

    Both start from the same Bernoulli(``p + delta``) configuration and run
    on shared clocks until ``t + delta``. ``xi`` follows the majority rule
    throughout; ``xi_bar`` sets every ringing site to 1 during ``[0, delta)``
    and follows the majority rule afterwards. At time ``delta`` each site of
    ``xi_bar`` is open with probability ``p + delta + delta_prime(p, delta)``.
    Checkpoints are 0, ``delta`` and ``t + delta``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if p < 0 or p + delta > 1:
        raise ValueError(f"need 0 <= p and p + delta <= 1, got p={p}, delta={delta}")
    if t < 0:
        raise ValueError("t must be non-negative")
    u, clocks, seed = _shared_randomness(region, seed)
    lower = (u <= p + delta).astype(np.uint8)
    upper = lower.copy()
    violations = {"start": _order_count(lower, upper)}
    end = t + delta
    times, ly, lx = _events_local(clocks, region, end)
    code = _policy_code(policy)
    i, bad1 = _kernels.run_pair(lower, upper, times, ly, lx, code, -math.inf, float(delta),
                                float(delta), strict)
    violations["delta"] = _order_count(lower, upper)
    mid = (SpinConfig(region, lower), SpinConfig(region, upper))
    _, bad2 = _kernels.run_pair(lower, upper, times[i:], ly[i:], lx[i:], code, -math.inf,
                                float(delta), float(end), strict)
    violations["events"] = int(bad1 + bad2)
    violations["end"] = _order_count(lower, upper)
    meta = {"kind": "continuity", "p": p, "delta": delta, "delta_prime": delta_prime(p, delta),
            "t": t, "end_time": end, "seed": str(seed), "policy": BoundaryPolicy.parse(policy).name}
    return _finish(lower, upper, region, meta, violations, mid, raise_on_violation)


COUPLING_COLUMNS = ["replica", "kind", "p_lower", "p_upper", "t", "delta", "delta_prime",
                    "violations", "lower_density", "upper_density", "upper_mid_density"]


def coupling_row(replica: int, pair: CoupledPair) -> list:
    m = pair.meta
    if m["kind"] == "monotone":
        p_lo, p_hi, delta, dprime = m["p_lower"], m["p_upper"], 0.0, 0.0
        mid = math.nan
    else:
        p_lo = p_hi = m["p"] + m["delta"]
        delta, dprime = m["delta"], m["delta_prime"]
        mid = pair.mid[1].bits.mean()
    return [replica, m["kind"], p_lo, p_hi, m["t"], delta, dprime, pair.total_violations,
            pair.lower.bits.mean(), pair.upper.bits.mean(), mid]


def coupling_csv(rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COUPLING_COLUMNS)
    for r in rows:
        w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r])
    return buf.getvalue()
