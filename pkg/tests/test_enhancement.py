import math

import numpy as np
import pytest
from scipy import stats

from majperc.clocks import ClockStream, ExplicitClocks, SeedSpec
from majperc.dynamics import InitialField
from majperc.enhancement import (OPPOSITE, EnhancementField, SeedMismatch, activation_mask, activation_probability,
                                 apply_enhancement, chain_stability_check, performed_enhancements, protected_core,
                                 report_csv, sample_enhancement_field)
from majperc.grid import OFFSETS, Rect, SpinConfig


def test_opposite_directions():
    for d, e in enumerate(OPPOSITE):
        assert OFFSETS[d][0] == -OFFSETS[e][0] and OFFSETS[d][1] == -OFFSETS[e][1]


def test_field_pieces_sum_to_first_ring_on_b_sites():
    r = Rect.square(20)
    field = sample_enhancement_field(r, SeedSpec(3))
    inner = field.pieces[1:-1, 1:-1]
    b = ~field.a_mask()
    assert np.allclose(inner[b].sum(axis=1), field.first_ring[b], rtol=1e-12)
    assert np.isnan(inner[~b]).all()


def test_first_ring_law_is_exponential():
    # ten independent fields of 10^5 sites; under Exp(1) at most two 1% rejections
    # happen with probability above 0.9998
    r = Rect(1, 1000, 1, 100)
    rejected = 0
    for s in range(10):
        field = sample_enhancement_field(r, SeedSpec(s))
        rejected += stats.kstest(field.first_ring.ravel(), "expon").pvalue < 0.01
    assert rejected <= 2


def test_attributed_pieces_point_back():
    r = Rect.square(6)
    field = sample_enhancement_field(r, SeedSpec(1))
    att = field.attributed()
    for d, (dx, dy) in enumerate(OFFSETS):
        # site (3, 3) is an A-site; its east neighbour (4, 3) gives its west piece
        nb = field.pieces[3 - 1 + 1 + dy, 3 - 1 + 1 + dx]
        assert att[2, 2, d] == nb[OPPOSITE[d]]


def test_activation_probability_monte_carlo():
    t = 1.0
    r = Rect(1, 1000, 1, 200)  # 10^5 A-sites
    field = sample_enhancement_field(r, SeedSpec(2))
    act = activation_mask(field, t)
    n_a = int(field.a_mask().sum())
    q = activation_probability(t)
    assert q == pytest.approx((1 - math.exp(-1)) * stats.gamma(0.25).sf(1.0) ** 4, rel=1e-12)
    assert abs(act.count / n_a - q) <= 3 * math.sqrt(q * (1 - q) / n_a)
    small = activation_mask(field, 0.05)
    q_small = activation_probability(0.05)
    assert abs(small.count / n_a - q_small) <= 3 * math.sqrt(q_small * (1 - q_small) / n_a)


def test_activated_site_with_three_open_neighbours_opens():
    r = Rect.square(3)
    config = SpinConfig.from_sites(r, [(3, 2), (1, 2), (2, 3)])
    mask = type(activation_mask(sample_enhancement_field(r, SeedSpec(0)), 1.0))(
        r, np.array([[0, 0, 0], [0, 1, 0], [0, 0, 0]], dtype=bool), 1.0)
    out = apply_enhancement(config, mask)
    assert out[(2, 2)] == 1
    two = SpinConfig.from_sites(r, [(3, 2), (1, 2)])
    assert apply_enhancement(two, mask)[(2, 2)] == 0
    assert performed_enhancements(config, mask).sum() == 1


def test_protected_core_keeps_cycles():
    r = Rect.square(6)
    cycle = [(2, 2), (3, 2), (2, 3), (3, 3)]
    init = SpinConfig.from_sites(r, cycle + [(5, 5)])
    core = protected_core(init, np.zeros(r.shape), 1.0)
    assert core.sum() == 4
    never = protected_core(init, np.full(r.shape, 5.0), 1.0)
    assert never.sum() == 5


def _hand_built_instance():
    # two open 2x2 blocks joined by the A-site (5, 3); its B-neighbours never ring before t
    r = Rect.square(9)
    left = [(3, 3), (4, 3), (3, 4), (4, 4)]
    right = [(6, 3), (7, 3), (6, 4), (7, 4)]
    init = SpinConfig.from_sites(r, left + right + [(5, 2)])
    rings = {(5, 3): [0.4]}
    first = np.full(r.shape, np.inf)
    first[3 - 1, 5 - 1] = 0.4
    pieces = np.full((r.height + 2, r.width + 2, 4), np.nan)
    for x, y in r.pad(1).sites():
        if (x + y) % 2:
            pieces[y - r.y0 + 1, x - r.x0 + 1] = 5.0
    field = EnhancementField(r, first, pieces)
    return init, ExplicitClocks(rings), field


def test_hand_built_connector_is_open_at_t():
    init, clocks, field = _hand_built_instance()
    rep = chain_stability_check(init, clocks, field, 1.0)
    # the two blocks plus the lone open site (5, 2), which never rings
    assert rep.connectors_checked == 1 and rep.chains_checked == 3 and rep.violations == 0
    assert rep.instance_seed == "explicit"


def test_seed_mismatch_detected():
    r = Rect.square(8)
    field = sample_enhancement_field(r, SeedSpec(1))
    init = InitialField(SeedSpec(1), 0.6).config(r)
    with pytest.raises(SeedMismatch):
        chain_stability_check(init, ClockStream(SeedSpec(2), split_first_ring=True), field, 1.0)


def test_random_instances_have_no_violations():
    r = Rect.square(48)
    reports = []
    for k in range(20):
        seed = SeedSpec(7, k)
        init = InitialField(seed, 0.58).config(r)
        rep = chain_stability_check(init, ClockStream(seed, split_first_ring=True),
                                    sample_enhancement_field(r, seed), 1.0)
        assert rep.violations == 0
        reports.append((k, rep))
    assert sum(rep.chains_checked for _, rep in reports) > 0
    assert report_csv(reports).splitlines()[0] == "instance_seed,chains_checked,connectors_checked,violations"
