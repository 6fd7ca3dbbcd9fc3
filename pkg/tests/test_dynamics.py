import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aseplab import _engine as eng
from aseplab.config import (LineConfig, SegmentConfig, build_extension, height_order_leq,
                            leftmost_second_class)
from aseplab.dynamics import (CensorScheme, Params, RunSpec, WindowAbort, evolve,
                              evolve_censored, evolve_coupled, evolve_reference,
                              hard_margin, merge_projection, run_batch)
from aseplab.observables import overtake_count
from aseplab.rng import ClockField

from strategies import lines, mixed_segments, segments

GAUGES = ["basic", "literal"]


def as_line(row, plan, like):
    return plan.to_config(row, like)


# -- the update rule

def test_params():
    pr = Params(0.75)
    assert (pr.q, pr.Q, pr.gamma) == (0.25, pytest.approx(1 / 3), 0.5)
    with pytest.raises(ValueError):
        Params(0.4)


@pytest.mark.parametrize("gauge", GAUGES)
def test_tasep_single_step(gauge):
    clocks = ClockField(7, 1.0, gauge=gauge)
    t1, _ = clocks.event(1, 0)
    tr = evolve(SegmentConfig.parse("10"), clocks, t1)
    assert tr.final == SegmentConfig.parse("01")
    assert tr.events.time[0] == t1 and tr.events.action[0, 0] == eng.ACT_SWAP
    before = evolve(SegmentConfig.parse("10"), clocks, np.nextafter(t1, 0))
    assert before.final == SegmentConfig.parse("10")


def test_exclusion():
    tr = evolve(SegmentConfig.parse("11"), ClockField(1, 0.7), 50.0)
    assert tr.final == SegmentConfig.parse("11")
    assert np.all(tr.events.action[:, 0] != eng.ACT_SWAP)


def _swap_fractions(tr, pairs):
    rows = tr.states()
    ev = tr.events
    i = ev.edge - tr.plan.base
    u, v = rows[np.arange(len(ev)), i], rows[np.arange(len(ev)), i + 1]
    swapped = ev.action[:, tr.slot] == eng.ACT_SWAP
    out = []
    for a, b in pairs:
        sel = (u == a) & (v == b)
        out.append((int(swapped[sel].sum()), int(sel.sum())))
    return out


def _within(k, n, prob):
    sd = np.sqrt(n * prob * (1 - prob))
    return abs(k - n * prob) <= 4 * sd + 1e-9


@pytest.mark.parametrize("gauge", GAUGES)
def test_two_site_rates(gauge):
    clocks = ClockField(3, 0.7, gauge=gauge)
    tr = evolve(SegmentConfig.parse("10"), clocks, 60_000.0)
    (kr, nr), (kl, nl) = _swap_fractions(tr, [(1, 0), (0, 1)])
    down, lo, hi = clocks.rule
    assert nr + nl > 10**4 * clocks.rate
    assert _within(kr, nr, down) and _within(kl, nl, hi - lo)
    # rates per unit time in the matching state: p to the right, q to the left
    assert kr / kl == pytest.approx(1.0, abs=0.05)      # alternation on two sites


@pytest.mark.parametrize("gauge", GAUGES)
def test_species_rates(gauge):
    # one 2 among 1's against a wall: 12 -> 21 at rate p, 21 -> 12 at rate q
    clocks = ClockField(4, 0.75, gauge=gauge)
    eta = LineConfig(1, 1, [2], 1, left_wall=1)
    tr = evolve(eta, clocks, 8_000.0, log_cap=4_000_000)
    assert len(tr.events) > 10**5
    pos = 1
    n12 = k12 = n21 = k21 = 0
    for z, act in zip(tr.events.edge.tolist(), tr.events.action[:, 0].tolist()):
        if z == pos - 1 and pos > 1:
            n12 += 1
            if act == eng.ACT_SWAP:
                k12 += 1
                pos -= 1
        elif z == pos:
            n21 += 1
            if act == eng.ACT_SWAP:
                k21 += 1
                pos += 1
    assert tr.final.values(pos, pos)[0] == 2
    down, lo, hi = clocks.rule
    assert _within(k12, n12, down) and _within(k21, n21, hi - lo)
    assert k12 * clocks.rate / n12 == pytest.approx(0.75, abs=0.03)


# -- determinism and replay

@settings(max_examples=20, deadline=None)
@given(mixed_segments(max_sites=12), st.integers(0, 2**32), st.sampled_from(GAUGES))
def test_determinism_and_replay(xi, seed, gauge):
    clocks = ClockField(seed, 0.7, gauge=gauge)
    a = evolve(xi, clocks, 15.0)
    b = evolve(xi, clocks, 15.0)
    for f in ("time", "edge", "index", "coin", "action"):
        assert np.array_equal(getattr(a.events, f), getattr(b.events, f))
    assert a.replay() == a.final


@settings(max_examples=25, deadline=None)
@given(mixed_segments(max_sites=10), st.integers(0, 2**32), st.sampled_from(GAUGES))
def test_segment_matches_reference(xi, seed, gauge):
    clocks = ClockField(seed, 0.65, gauge=gauge)
    tr = evolve(xi, clocks, 12.0)
    ref, events = evolve_reference(xi, clocks, 12.0)
    assert tr.final == ref
    assert len(events) == len(tr.events)
    assert np.array_equal([e[0] for e in events], tr.events.time)
    assert np.array_equal([e[2] for e in events], tr.events.action[:, 0])


@settings(max_examples=20, deadline=None)
@given(lines(max_window=8, fills=((0, 1), (1, 0), (0, 0))), st.integers(0, 2**32))
def test_line_matches_reference(eta, seed):
    clocks = ClockField(seed, 0.7)
    tr = evolve(eta, clocks, 5.0)
    lo = tr.plan.base + 1
    hi = tr.plan.base + tr.plan.L - 2
    ref, _ = evolve_reference(eta, clocks, 5.0, sites=(lo, hi))
    assert np.array_equal(tr.final.values(lo, hi), ref.values(lo, hi))


@settings(max_examples=15, deadline=None)
@given(mixed_segments(max_sites=12), st.integers(0, 2**32))
def test_lazy_equals_eager(xi, seed):
    zeta = build_extension("zeta", xi)
    clocks = ClockField(seed, 0.75)
    spec = RunSpec(checkpoints=[1.0, 4.0, 9.0], flux_edges=[xi.a, xi.b])
    a = run_batch([xi, zeta], clocks, 10.0, 6, spec=spec, keep_final=True, lazy=True)
    b = run_batch([xi, zeta], clocks, 10.0, 6, spec=spec, keep_final=True, lazy=False)
    assert np.array_equal(a.final, b.final)
    assert np.array_equal(a.flux, b.flux)
    assert np.array_equal(a.leftmost, b.leftmost, equal_nan=True)


def test_batch_matches_single_runs():
    xi = SegmentConfig.parse("11010010")
    clocks = ClockField(21, 0.75)
    res = run_batch([xi], clocks, 7.0, 5, keep_final=True, trial0=3)
    for m in range(5):
        single = evolve(xi, clocks.for_trial(3 + m), 7.0)
        assert np.array_equal(res.final[m, 0], single.plan.row_for(single.final))


# -- coupling

def _coupled_rows(trajs):
    return [t.states() for t in trajs]


@settings(max_examples=30, deadline=None)
@given(mixed_segments(max_sites=10), st.data())
def test_pointwise_order_is_preserved(xi, data):
    extra = [i for i in range(xi.n_sites) if xi.occ[i] == 0]
    add = data.draw(st.lists(st.sampled_from(extra), unique=True, max_size=len(extra)))
    occ = xi.occ.copy()
    occ[add] = 1
    eta = SegmentConfig(xi.a, xi.b, occ)
    gauge = data.draw(st.sampled_from(GAUGES))
    clocks = ClockField(data.draw(st.integers(0, 2**32)), 0.7, gauge=gauge)
    mu_rows, eta_rows = _coupled_rows(evolve_coupled([xi, eta], clocks, 20.0))
    assert np.all(mu_rows <= eta_rows)


@settings(max_examples=30, deadline=None)
@given(lines(max_window=8, fills=((0, 1),)), lines(max_window=8, fills=((0, 1),)),
       st.integers(0, 2**32))
def test_height_order_attractivity(x, y, seed):
    if not height_order_leq(x, y):
        x, y = y, x
    if not height_order_leq(x, y):
        return
    trs = evolve_coupled([x, y], ClockField(seed, 0.75), 8.0)
    rx, ry = _coupled_rows(trs)
    plan = trs[0].plan
    for r in range(rx.shape[0]):
        assert height_order_leq(as_line(rx[r], plan, x), as_line(ry[r], plan, y))


def test_literal_gauge_breaks_height_order():
    # 10 and 01 swap roles on a successful coin in the literal gauge
    x, y = LineConfig.parse("E|10|F"), LineConfig.parse("E|01|F")
    assert height_order_leq(x, y)
    for trial in range(200):
        clocks = ClockField(0, 0.75, trial, gauge="literal")
        trs = evolve_coupled([x, y], clocks, 3.0)
        rx, ry = _coupled_rows(trs)
        plan = trs[0].plan
        if any(not height_order_leq(as_line(rx[r], plan, x), as_line(ry[r], plan, y))
               for r in range(rx.shape[0])):
            return
    pytest.fail("no violation found")


@settings(max_examples=20, deadline=None)
@given(mixed_segments(max_sites=10), mixed_segments(max_sites=10), st.integers(0, 2**32),
       st.sampled_from(GAUGES))
def test_coupling_locality(x, y, seed, gauge):
    if x.n_sites != y.n_sites:
        return
    trs = evolve_coupled([x, y], ClockField(seed, 0.7, gauge=gauge), 10.0)
    rx, ry = _coupled_rows(trs)
    ev = trs[0].events
    i = ev.edge - trs[0].plan.base
    n = np.arange(len(ev))
    same = (rx[n, i] == ry[n, i]) & (rx[n, i + 1] == ry[n, i + 1])
    assert np.array_equal(ev.action[same, 0], ev.action[same, 1])


def test_identical_inits_identical_trajectories():
    xi = SegmentConfig.parse("1101000110")
    a, b = evolve_coupled([xi, xi], ClockField(2, 0.8), 30.0)
    assert np.array_equal(a.events.action[:, 0], a.events.action[:, 1])
    assert a.final == b.final


@settings(max_examples=20, deadline=None)
@given(segments(min_sites=2, max_sites=12), st.integers(0, 2**32))
def test_particle_conservation(xi, seed):
    rows = evolve(xi, ClockField(seed, 0.7), 10.0).states()
    assert np.all((rows == 1).sum(axis=1) == xi.k)


def test_species_conservation_against_a_wall():
    eta = LineConfig(0, 1, [2, 1, 0, 2, 1, 1, 0], 0, left_wall=1)
    tr = evolve(eta, ClockField(8, 0.7), 5.0)
    rows = tr.states()
    assert np.all((rows == 2).sum(axis=1) == 2)


# -- line windows

def test_hard_margin_formula():
    assert hard_margin(0.75, 100) == int(np.ceil(150 + 8 * np.sqrt(75) + 64))


def test_window_abort_on_tiny_margin():
    with pytest.raises(WindowAbort):
        evolve(build_extension("step"), ClockField(0, 1.0), 200.0, spec=RunSpec(margin=0),
               log_cap=0)


# -- censoring

def test_censor_scheme_is_right_continuous():
    cs = CensorScheme((1.0, 2.0), (frozenset(), frozenset({3}), frozenset({4})))
    assert cs.at(0.5) == frozenset() and cs.at(1.0) == {3} and cs.at(2.0) == {4}
    with pytest.raises(ValueError):
        CensorScheme((2.0, 1.0), (frozenset(),) * 3)
    with pytest.raises(ValueError):
        CensorScheme((1.0,), (frozenset(),))


def test_empty_censoring_is_plain_evolution():
    xi = SegmentConfig.parse("11100100")
    clocks = ClockField(5, 0.7)
    a = evolve_censored(xi, clocks, CensorScheme.none(), 20.0)
    b = evolve(xi, clocks, 20.0)
    assert a.final == b.final and np.array_equal(a.events.action, b.events.action)


def test_all_edges_censored():
    xi = SegmentConfig.parse("11100100")
    tr = evolve_censored(xi, ClockField(5, 0.7), CensorScheme.static(range(1, 8)), 20.0)
    assert tr.final == xi


def test_time_dependent_censoring_matches_reference():
    xi = SegmentConfig.parse("1110010011")
    cs = CensorScheme((2.0, 5.0), (frozenset({3, 4}), frozenset(), frozenset({1, 6, 7})))
    clocks = ClockField(12, 0.7)
    tr = evolve_censored(xi, clocks, cs, 9.0)
    ref, _ = evolve_reference(xi, clocks, 9.0, censor=cs)
    assert tr.final == ref


def test_rule_driven_censoring():
    xi = SegmentConfig.parse("110100")
    rule = CensorScheme(rule=lambda vals, t: frozenset({3}) if vals[3] == 1 else frozenset())
    final, events = evolve_censored(xi, ClockField(1, 0.7), rule, 5.0)
    for t, z, act in events:
        if z == 3 and act == eng.ACT_SWAP:
            pytest.fail("censored edge fired")


# -- merge projection

def test_merge_projection_example():
    eta = LineConfig(0, 1, [2, 1, 0, 2], 2)
    mp = merge_projection(eta)
    star = mp.config
    assert [star[i] for i in range(-3, 4)] == [0, 0, 2, 0, 2, 2, 2]
    assert leftmost_second_class(star) == -1
    assert overtake_count(eta, 2, 0) == -leftmost_second_class(star)
    assert mp.censored == frozenset({-1})


def test_merge_projection_without_ones():
    eta = LineConfig(0, 3, [2, 0, 0, 2], 2)
    mp = merge_projection(eta)
    assert mp.censored == frozenset()
    assert np.count_nonzero(mp.config.occ == 2) == np.count_nonzero(eta.occ == 2)


def test_merge_projection_needs_fills():
    with pytest.raises(Exception):
        merge_projection(LineConfig(0, 1, [2, 1], 0))


@pytest.mark.parametrize("seed", range(4))
def test_merge_identity_and_dynamics_per_event(seed):
    rng = np.random.default_rng(seed)
    w = rng.choice([0, 1, 2], size=14, p=[0.3, 0.4, 0.3])
    zeros = np.flatnonzero(w == 0)
    twos = np.flatnonzero(w == 2)
    # all 0's left of all 2's at time 0
    w = np.concatenate([np.zeros(len(zeros), np.int8), w[w == 1], np.full(len(twos), 2, np.int8)])
    rng.shuffle(w[len(zeros): len(w) - len(twos)])
    eta = LineConfig(0, 1, np.concatenate([w, [1, 2, 1]]), 2)
    tr = evolve(eta, ClockField(seed, 0.75), 15.0)
    rows = tr.states()
    plan = tr.plan
    lo, hi = plan.base + 1, plan.base + plan.L - 2
    prev = None
    for r in range(rows.shape[0]):
        cfg = LineConfig(0, lo, rows[r][1:-1], 2)
        mp = merge_projection(cfg)
        assert overtake_count(cfg, 2, 0) == -leftmost_second_class(mp.config)
        if prev is not None:
            span = (min(prev.config.window_lo, mp.config.window_lo) - 1,
                    max(prev.config.window_hi, mp.config.window_hi) + 1)
            a = prev.config.values(*span)
            b = mp.config.values(*span)
            diff = np.flatnonzero(a != b)
            if diff.size:
                assert diff.size == 2 and diff[1] == diff[0] + 1
                assert span[0] + diff[0] not in prev.censored
        prev = mp
