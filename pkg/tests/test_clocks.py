import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from majperc.clocks import (ClockStream, ExplicitClocks, SeedSpec, gamma_pieces, piece_sum, purpose_key,
                            uniform_at, uniform_field)
from majperc.grid import Rect, Site


def test_uniforms_are_counter_based():
    seed = SeedSpec(7, 3, "init")
    r = Rect(-4, 5, -2, 6)
    field = uniform_field(seed, r)
    xs, ys = r.coords()
    # any subset and any order gives the same per-site values
    perm = np.random.default_rng(0).permutation(len(xs))
    assert np.array_equal(uniform_at(seed, xs[perm], ys[perm]), field.ravel()[perm])
    assert np.all((field > 0) & (field < 1))


@given(st.integers(0, 2 ** 62), st.integers(0, 1000), st.integers(-10 ** 6, 10 ** 6), st.integers(-10 ** 6, 10 ** 6))
def test_uniform_deterministic_in_open_interval(master, rep, x, y):
    u1 = uniform_at(SeedSpec(master, rep, "init"), [x], [y])
    u2 = uniform_at(SeedSpec(master, rep, "init"), [x], [y])
    assert u1[0] == u2[0] and 0.0 < u1[0] < 1.0


def test_purposes_and_replicas_differ():
    r = Rect.square(20)
    a = uniform_field(SeedSpec(1, 0, "init"), r)
    assert not np.array_equal(a, uniform_field(SeedSpec(1, 0, "clock"), r))
    assert not np.array_equal(a, uniform_field(SeedSpec(1, 1, "init"), r))
    assert not np.array_equal(a, uniform_field(SeedSpec(2, 0, "init"), r))
    assert purpose_key("init") != purpose_key("clock")


def test_disjoint_purposes_uncorrelated():
    r = Rect.square(100)  # N = 10^4 sites
    a = uniform_field(SeedSpec(5, 0, "init"), r).ravel()
    b = uniform_field(SeedSpec(5, 0, "enh"), r).ravel()
    rho = np.corrcoef(a, b)[0, 1]
    assert abs(rho) < 3 / math.sqrt(a.size)


def test_uniform_ks_at_one_percent():
    u = uniform_field(SeedSpec(11, 0, "init"), Rect.square(100)).ravel()
    assert stats.kstest(u, "uniform").pvalue > 0.01


def test_mean_ring_count_poisson():
    clocks = ClockStream(SeedSpec(3))
    r = Rect(1, 1000, 1, 100)  # 10^5 sites
    xs, ys = r.coords()
    times, owner = clocks.ring_table(xs, ys, 1.0)
    counts = np.bincount(owner, minlength=r.area)
    assert 0.99 <= counts.mean() <= 1.01
    assert abs(counts.var() - 1.0) < 0.03
    assert np.all(times < 1.0) and np.all(times > 0)


def test_rings_are_increasing_and_prefix_consistent():
    clocks = ClockStream(SeedSpec(9, 2))
    for s in [(0, 0), (5, -3), (-100, 40)]:
        long = clocks.rings(s, 10.0)
        short = clocks.rings(s, 4.0)
        assert long == sorted(long)
        assert short == [x for x in long if x < 4.0]
        last = clocks.last_ring_before(s, 4.0)
        assert last == (short[-1] if short else None)


def test_events_are_sorted_by_time_then_site():
    times, xs, ys = ClockStream(SeedSpec(1)).events(Rect.square(6), 3.0)
    keys = list(zip(times.tolist(), xs.tolist(), ys.tolist()))
    assert keys == sorted(keys)


def test_horizon_enforced():
    c = ClockStream(SeedSpec(0), horizon=2.0)
    c.rings((0, 0), 2.0)
    with pytest.raises(ValueError):
        c.rings((0, 0), 2.5)


def test_interarrivals_exponential():
    clocks = ClockStream(SeedSpec(21))
    xs, ys = Rect.square(60).coords()
    times, owner = clocks.ring_table(xs, ys, 50.0)
    first = np.full(len(xs), np.inf)
    np.minimum.at(first, owner, times)
    assert stats.kstest(first[np.isfinite(first)], "expon").pvalue > 0.01


def test_gamma_pieces_sum_to_exponential():
    r = Rect(1, 1000, 1, 100)
    xs, ys = r.coords()
    pieces = gamma_pieces(SeedSpec(4), xs, ys)
    assert pieces.shape == (r.area, 4)
    assert stats.kstest(pieces[:, 0], stats.gamma(0.25).cdf).pvalue > 0.01
    assert stats.kstest(piece_sum(pieces), "expon").pvalue > 0.01


def test_split_first_ring_matches_piece_sum_on_b_sites():
    seed = SeedSpec(8, 1)
    split = ClockStream(seed, split_first_ring=True)
    plain = ClockStream(seed)
    xs, ys = Rect.square(10).coords()
    odd = (xs + ys) % 2 == 1
    f_split = split.first_rings(xs, ys)
    f_plain = plain.first_rings(xs, ys)
    expect = piece_sum(gamma_pieces(seed.with_purpose("clock"), xs[odd], ys[odd]))
    assert np.allclose(f_split[odd], expect, rtol=1e-12)
    assert np.array_equal(f_split[~odd], f_plain[~odd])
    for x, y, f in zip(xs[odd][:5], ys[odd][:5], f_split[odd][:5]):
        assert split.rings((x, y), 100.0)[0] == pytest.approx(f, rel=1e-12)


def test_explicit_clocks():
    c = ExplicitClocks({(0, 0): [0.5, 0.2], (1, 0): [0.3]})
    assert c.rings((0, 0), 1.0) == [0.2, 0.5]
    assert c.rings((0, 0), 0.4) == [0.2]
    assert c.rings((9, 9), 1.0) == []
    times, xs, ys = c.events(Rect(0, 1, 0, 0), 1.0)
    assert times.tolist() == [0.2, 0.3, 0.5]
    assert [Site(x, y) for x, y in zip(xs, ys)] == [Site(0, 0), Site(1, 0), Site(0, 0)]
    with pytest.raises(ValueError):
        ExplicitClocks({(0, 0): [0.1, 0.1]})
