import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aseplab.config import (ConfigError, LineConfig, SegmentConfig, assign_labels,
                            build_extension, height_from_config, reflect_dual, xi_max)
from aseplab.dynamics import evolve, evolve_coupled
from aseplab.experiments import overtake_family
from aseplab.observables import (DefectSet, HeightObserver, HittingResult, LabelObserver,
                                 coupled_hitting, height_query, hitting_time_H, hitting_time_g,
                                 hitting_times, kappa, overtake_M, overtake_Mprime,
                                 overtake_count, overtake_sups, rescaled_height, tagged_position,
                                 zeta_max_of)
from aseplab.oracle import StateSpace, hitting_mean, reversed_step_hitting_cdf
from aseplab.rng import ClockField
from aseplab.stats import ks_distance

from strategies import mixed_segments


# -- hitting times

def test_hitting_result_checks():
    with pytest.raises(ValueError):
        HittingResult("maybe", 1.0, 2.0)
    with pytest.raises(ValueError):
        HittingResult("hit", 3.0, 2.0)


def test_hit_at_zero_from_the_packed_state():
    xi = xi_max(6, 1, 3)
    clocks = ClockField(0, 0.75)
    assert hitting_time_g(xi, clocks, 10.0) == HittingResult("hit", 0.0, 10.0)
    assert build_extension("zeta", xi) == zeta_max_of(xi)
    assert hitting_time_H(xi, clocks, 10.0).time == 0.0


def test_two_site_hit_at_first_event():
    clocks = ClockField(9, 1.0)
    t1, _ = clocks.event(1, 0)
    res = hitting_time_g(SegmentConfig.parse("10"), clocks, 100.0)
    assert res.hit and res.time == t1


def test_censoring_at_the_horizon():
    res = hitting_time_g(SegmentConfig.parse("111000"), ClockField(0, 0.75), 1e-6)
    assert res.status == "censored" and res.time == 1e-6


def test_mean_g_matches_first_passage_oracle():
    xi = SegmentConfig.parse("111000")
    exact = hitting_mean(StateSpace(6, 1, 3, 0.75), xi)
    g = hitting_times(xi, xi_max(6, 1, 3), ClockField(31, 0.75), 400.0, 10_000)
    assert np.all(np.isfinite(g))
    se = g.std() / np.sqrt(g.size)
    assert abs(g.mean() - exact) < 3 * se


def test_single_defect_H_law():
    xi = SegmentConfig.parse("010111")
    zeta = build_extension("zeta", xi)
    H = hitting_times(zeta, zeta_max_of(xi), ClockField(5, 0.75), 200.0, 100_000)
    assert np.all(np.isfinite(H))
    grid = np.linspace(0, np.quantile(H, 0.9999), 600)
    cdf, lost = reversed_step_hitting_cdf(zeta, 0.75, grid, max_area=14)
    assert lost[-1] < 1e-3
    assert ks_distance(H, lambda s: np.interp(s, grid, cdf)) < 0.02


@settings(max_examples=15, deadline=None)
@given(mixed_segments(max_sites=8), st.integers(0, 2**32))
def test_g_never_exceeds_H(xi, seed):
    g, H = coupled_hitting(xi, ClockField(seed, 0.7), 500.0, 30, check=False)
    done = np.isfinite(H)
    assert np.all(g[done] <= H[done])


def test_g_le_H_in_many_trials():
    xi = SegmentConfig.parse("1101100100")
    g, H = coupled_hitting(xi, ClockField(17, 0.75), 1000.0, 1000)
    assert np.all(np.isfinite(H)) and np.all(g <= H)


def test_literal_gauge_may_violate_g_le_H():
    xi = SegmentConfig.parse("1101100100")
    with pytest.raises(AssertionError):
        coupled_hitting(xi, ClockField(17, 0.75, gauge="literal"), 1000.0, 1000, check=True)


# -- defect set

def test_defect_set_tracks_the_packed_line():
    xi = SegmentConfig.parse("0110101")
    target = zeta_max_of(xi)
    ds = DefectSet(target, rescan=50)
    tr = evolve(build_extension("zeta", xi), ClockField(2, 0.75), 300.0, [ds])
    assert ds.result.hit
    rows = tr.states()
    trow = tr.plan.row_for(target)
    n = int(np.searchsorted(tr.events.time, ds.result.time, side="left"))
    assert np.array_equal(rows[n + 1], trow)
    assert not any(np.array_equal(rows[r], trow) for r in range(n + 1))


def test_defect_set_on_segment():
    xi = SegmentConfig.parse("1010")
    ds = DefectSet(xi_max(4, 1, 2))
    evolve(xi, ClockField(0, 0.75), 0.0, [ds])
    assert ds.defects() == [1, 4]


# -- heights

@pytest.mark.parametrize("seed", range(3))
def test_height_observer_consistency(seed):
    eta = build_extension("flat", reach=20)
    qs = [(y, t) for y in (-4, 0, 3) for t in (0.0, 1.0, 2.5, 4.0)]
    ho = HeightObserver(qs)
    tr = evolve(eta, ClockField(seed, 0.75), 4.0, [ho])
    assert ho.consistent()
    assert ho.height(0, 0.0) == 0
    h_end = height_from_config(tr.final)
    # final heights agree up to the global shift carried by the flux at 0
    shift = ho.height(0, 4.0) - h_end(0)
    for y in (-4, 3):
        assert ho.height(y, 4.0) == h_end(y) + shift


def test_height_steps_are_unit():
    eta = build_extension("step", at=0)
    ts = np.linspace(0, 5, 201)
    ho = HeightObserver([(0, t) for t in ts])
    evolve(eta, ClockField(1, 0.75), 5.0, [ho])
    h = np.array([ho.height(0, t) for t in ts])
    assert np.all(np.abs(np.diff(h)) <= 1)
    assert h[-1] > 0                      # net current through a step goes right


def test_height_query_past_horizon():
    with pytest.raises(ValueError):
        evolve(build_extension("step", at=0), ClockField(1, 0.75), 1.0,
               [HeightObserver([(0, 2.0)])])


def test_kappa_and_query_site():
    assert kappa(0.5) == pytest.approx(2.0)
    site, time = height_query(0.5, 1000, 1.0, 0.5, 0.75)
    assert site == 200 and time == pytest.approx(2000.0)
    site, _ = height_query(0.25, 8, 0.0, 1.0, 0.75)
    assert site == 8


def test_rescaled_height_at_origin():
    eta = build_extension("step", at=0)
    ho = HeightObserver([(0, 0.0)])
    evolve(eta, ClockField(0, 0.75), 0.0, [ho])
    assert rescaled_height(ho, 0.5, 200, 0.0, 0.0, 0.75) == 0.0
    assert rescaled_height(0, 0.5, 8, 0.0, 1.0, 0.75) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        rescaled_height(ho, 0.5, 200, 0.0, 1.0, 0.75)
    with pytest.raises(ValueError):
        height_query(1.0, 10, 0, 1, 0.75)


# -- overtaking

def test_overtake_count_examples():
    eta = LineConfig(0, 1, [2, 1, 0, 2], 2)
    assert overtake_count(eta, 2, 0) == 1
    with pytest.raises(ConfigError):
        overtake_count(LineConfig(0, 1, [1], 0), 2, 0)


def test_overtake_starts_at_zero_and_sup_dominates():
    eta = overtake_family("thm61", 16)
    res = overtake_M(eta, ClockField(0, 0.75), 30.0, times=[5.0, 10.0, 30.0])
    assert res.initial == 0
    assert res.sup >= res.at.max() >= 0
    eta2 = overtake_family("cor62", 16)
    res2 = overtake_Mprime(eta2, ClockField(0, 0.75), 30.0)
    assert res2.initial == 0 and res2.sup >= 0


def test_overtake_hypothesis_checked():
    with pytest.raises(ConfigError):
        overtake_M(LineConfig(0, 1, [2, 0, 1], 2), ClockField(0, 0.75), 1.0)
    with pytest.raises(ConfigError):
        overtake_Mprime(LineConfig(2, 1, [1, 2], 1), ClockField(0, 0.75), 1.0)


def test_duality_spot_check():
    eta = LineConfig(0, 1, [0, 1, 0, 1, 1, 2, 1, 2, 1, 2], 2)
    dual = reflect_dual(eta, 10)
    assert dual.values(1, 10).tolist() == [2, 0, 2, 0, 2, 0, 0, 1, 0, 1]
    # the M-experiment on eta becomes an M'-experiment on its dual
    assert overtake_count(eta, 2, 0) == 0
    assert overtake_count(dual, 1, 2) == 0
    overtake_Mprime(dual, ClockField(0, 0.75), 0.0)


def test_overtake_sups_match_single_runs():
    eta = overtake_family("thm61", 12)
    clocks = ClockField(3, 0.75)
    sups = overtake_sups(eta, clocks, 20.0, 4)
    single = [overtake_M(eta, clocks.for_trial(m), 20.0).sup for m in range(4)]
    assert sups.tolist() == single


# -- labels

def test_tagged_position_without_events():
    eta = LineConfig(0, 1, [1, 1, 0, 0], 0)
    labels = assign_labels(eta, 4, 2)
    tr = evolve(eta, ClockField(0, 0.75), 0.0)
    assert tagged_position(labels, tr, ("X", 1), 0.0) == 2
    with pytest.raises(KeyError):
        tagged_position(labels, tr, ("X", 99), 0.0)


def test_free_particle_at_p_one():
    eta = LineConfig(0, 0, [1], 0)
    clocks = ClockField(6, 1.0)
    tr = evolve(eta, clocks, 10.0)
    # walk the clocks by hand: the particle at x moves on the first ring of edge x after now
    x, now = 0, 0.0
    while True:
        n = 0
        while clocks.event(x, n)[0] <= now:
            n += 1
        t, _ = clocks.event(x, n)
        if t > 10.0:
            break
        x, now = x + 1, t
    assert tr.final == LineConfig(0, x, [1], 0)


@pytest.mark.parametrize("seed", range(3))
def test_label_order_along_trajectories(seed):
    xi = SegmentConfig.parse("1101001011")
    eta = build_extension("xi_bar", xi)
    labels = assign_labels(eta, 10, 6)
    ob = LabelObserver(labels)
    tr = evolve(eta, ClockField(seed, 0.7), 20.0, [ob])
    assert ob.violations == 0
    occ = tr.final
    for j in labels.particle_labels:
        x = ob.position(("X", int(j)))
        assert occ[x] == 1
        assert tagged_position(labels, tr, ("X", int(j)), 20.0) == x
    for i in labels.hole_labels:
        assert occ[ob.position(("H", int(i)))] == 0
    pos = [ob.position(("X", int(j))) for j in labels.particle_labels]
    assert len(set(pos)) == len(pos)


def test_dual_labels_under_transported_clocks():
    xi = SegmentConfig.parse("110100")
    b, k = 6, 3
    mu = build_extension("xi_bar", xi)
    dual = reflect_dual(mu, b)
    clocks = ClockField(4, 0.75)
    lab = assign_labels(mu, b, k)
    dlab = assign_labels(dual, b, b - k)
    t1 = evolve(mu, clocks, 6.0)
    t2 = evolve(dual, clocks.transported(-1, b), 6.0)
    for t in (0.0, 2.0, 6.0):
        for j in range(1, 3):
            h = tagged_position(lab, t1, ("H", b - k + j), t)
            xt = tagged_position(dlab, t2, ("X", b - k + j), t)
            assert -(xt - b - 1) == h
