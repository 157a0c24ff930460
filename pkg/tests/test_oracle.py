import math

import numpy as np
import pytest

from majperc.clocks import ClockStream, SeedSpec
from majperc.dynamics import InitialField, evolve_forward, evolve_replicas
from majperc.grid import BoundaryPolicy, Rect, SpinConfig
from majperc.oracle import (N_MAX, STANDARD_FKG_PAIRS, NotIncreasing, OracleBudgetError, config_from_index,
                            config_index, exact_law, fkg_suite, is_increasing, oracle_event_prob,
                            oracle_fkg_check, poisson_tail, sequence_weight, standard_events,
                            transition_tables, truncation_for)
from majperc.percolation import has_h_crossing

from oracles import all_configs, dfs_crossing, generator_law

# frozen from the expm oracle in tests/oracles.py
ORACLE_H33 = 0.6657551517715483
ORACLE_MARGINAL_22 = 0.6188865283337934
R33 = Rect.square(3)


def test_sequence_weight_formula():
    n, t, k = 4, 0.3, 5
    assert sequence_weight(k, n, t) == pytest.approx(math.exp(-n * t) * t ** k / math.factorial(k), rel=1e-12)
    # summing over all n^k sequences gives the Poisson(n t) mass
    assert n ** k * sequence_weight(k, n, t) == pytest.approx(
        math.exp(-n * t) * (n * t) ** k / math.factorial(k), rel=1e-12)
    assert sequence_weight(0, n, 0.0) == 1.0


def test_truncation_tail():
    K = truncation_for(9 * 0.5)
    assert poisson_tail(4.5, K) < 1e-6 <= poisson_tail(4.5, K - 1)


def test_config_index_roundtrip():
    for c in range(1 << 9):
        assert config_index(config_from_index(R33, c)) == c


def test_transition_tables_use_majority():
    T = transition_tables(R33)
    # all-open and all-closed are fixed points
    assert all(T[s, 0] == 0 and T[s, 511] == 511 for s in range(9))


def test_dp_matches_generator_exponential():
    law = exact_law(R33, 0.5, 0.6)
    exact = generator_law(3, 3, 0.5, 0.6)
    assert law.tail < 1e-6
    assert np.all(law.masses <= exact + 1e-12)
    assert abs(law.masses - exact).sum() <= law.tail + 1e-12


def test_h_crossing_interval_contains_exact_value():
    law = exact_law(R33, 0.5, 0.6)
    lo, hi = oracle_event_prob(law, has_h_crossing)
    assert lo <= ORACLE_H33 <= hi
    assert hi - lo == pytest.approx(law.tail)
    # the crossing indicator used here agrees with an independent DFS
    assert np.array_equal(law.indicator(has_h_crossing),
                          [dfs_crossing(b) for b in all_configs(9).reshape(-1, 3, 3)])


def test_enumerate_matches_dp():
    r = Rect(1, 2, 1, 2)
    a = exact_law(r, 0.4, 0.3, K=6, method="dp")
    b = exact_law(r, 0.4, 0.3, K=6, method="enumerate")
    assert np.allclose(a.masses, b.masses, atol=1e-13)


def test_two_by_two_marginals_match_monte_carlo():
    r = Rect(1, 2, 1, 2)
    law = exact_law(r, 0.5, 0.6, K=12)
    assert law.tail < 1e-6
    marg = law.site_marginals()
    assert np.all(marg <= ORACLE_MARGINAL_22) and np.all(ORACLE_MARGINAL_22 <= marg + law.tail)
    states = evolve_replicas(r, 0.6, 0.5, BoundaryPolicy.FREE_FINITE, 3, np.arange(100_000))
    mc = states.reshape(len(states), -1).mean(axis=0)
    sigma = math.sqrt(ORACLE_MARGINAL_22 * (1 - ORACLE_MARGINAL_22) / len(states))
    assert np.all(np.abs(mc - marg) < 3 * sigma + law.tail)


def test_law_csv():
    law = exact_law(Rect(1, 2, 1, 1), 0.2, 0.5)
    lines = law.to_csv().splitlines()
    assert lines[0].startswith("#") and lines[1].startswith("# tail=")
    assert lines[2] == "config_bits,mass" and len(lines) == 3 + 4


def test_budget_guards():
    with pytest.raises(OracleBudgetError):
        exact_law(Rect(1, N_MAX + 1, 1, 1), 0.1, 0.5)
    with pytest.raises(OracleBudgetError):
        exact_law(R33, 2.0, 0.5, method="enumerate")
    with pytest.raises(ValueError):
        exact_law(R33, 0.5, 1.5)


def test_is_increasing():
    ev = standard_events(R33)
    assert all(is_increasing(R33, e) for e in ev.values())
    assert not is_increasing(R33, lambda c: c[(2, 2)] == 0)


def test_fkg_left_right_columns():
    law = exact_law(R33, 0.5, 0.5)
    ev = standard_events(R33)
    rep = oracle_fkg_check(law, ev["left_any"], ev["right_any"])
    assert rep.passed and rep.verdict == "PASS"
    assert rep.margin >= rep.margin_lower


def test_fkg_rejects_decreasing_event():
    law = exact_law(R33, 0.25, 0.5)
    with pytest.raises(NotIncreasing):
        oracle_fkg_check(law, lambda c: c[(1, 1)] == 0, standard_events(R33)["center_open"])


def test_fkg_detects_negative_correlation_of_non_increasing_pair():
    # opposite events are negatively correlated; the margin must reveal it
    law = exact_law(R33, 0.25, 0.5)
    mask = law.indicator(lambda c: c[(2, 2)] == 1)
    pa = law.masses[mask].sum()
    assert law.masses[mask & ~mask].sum() - pa * (law.total_mass - pa) < 0


def test_fkg_suite_shape():
    law = exact_law(R33, 0.25, 0.4)
    res = fkg_suite(law)
    assert len(res) == len(STANDARD_FKG_PAIRS) == 20
    assert all(r.passed for *_, r in res)
