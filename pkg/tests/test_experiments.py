import math
import pathlib
import shutil

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aseplab.config import SegmentConfig, xi_max
from aseplab.experiments import (Estimate, RefCDF, ScaleSpec, TableChecksumError, batch,
                                 f_alpha, family_config, g_time, hitting_H_samples,
                                 kpz_onepoint_run, load_ref_cdf, lr_pair_law, profile_run,
                                 scale_constants, side_events, step_D, theory_profile,
                                 tv_lower_estimate, tv_upper_estimate)
from aseplab.dynamics import RunSpec
from aseplab.oracle import StateSpace, exact_tv
from aseplab.rng import ClockField
from aseplab.stationary import stationary_event_A


# -- scaling arithmetic

def test_g_time_examples():
    assert g_time(ScaleSpec(p=0.75, N=1000, D=1, c=0)) == pytest.approx(2000.0)
    assert g_time(ScaleSpec(p=1.0, N=8, D=1, c=2)) == pytest.approx(12.0)
    D = step_D(0.5)
    assert g_time(ScaleSpec(p=0.75, N=100, D=D)) == pytest.approx(2 * 100 / 0.5)


def test_scale_spec_checks():
    with pytest.raises(ValueError):
        ScaleSpec(p=0.5, N=10)
    with pytest.raises(ValueError):
        ScaleSpec(p=0.75, N=10, D=0)
    with pytest.raises(ValueError):
        ScaleSpec(p=0.75, N=10, delta=0.5)


def test_step_D_quarter():
    assert step_D(0.25) == pytest.approx(1 + math.sqrt(3) / 2, abs=1e-12)
    assert step_D(0.25) == pytest.approx(1.8660, abs=1e-4)


def test_scale_constants():
    kap, f = scale_constants(0.5)
    assert kap == pytest.approx(2.0) and f == pytest.approx(0.5)
    with pytest.raises(ValueError):
        scale_constants(1.0)


@given(st.floats(0.01, 0.99))
def test_f_symmetry(alpha):
    assert f_alpha(alpha) == pytest.approx(f_alpha(1 - alpha), rel=1e-12)


# -- reference tables

def test_gue_table():
    F = load_ref_cdf("GUE")
    # -1.7711 is the mean; the median sits near -1.8049
    assert abs(F(-1.8049) - 0.5) < 0.01
    assert np.all(np.diff(F.grid) <= 0.05 + 1e-12)
    assert F.grid[0] <= -8 and F.grid[-1] >= 6
    assert F(-100) == 0.0 and F(100) == 1.0
    assert F.mean() == pytest.approx(-1.7711, abs=0.02)
    assert F.quantile(0.5) == pytest.approx(-1.8049, abs=0.01)


def test_goe_table():
    F = load_ref_cdf("GOE")
    assert F.mean() == pytest.approx(-1.2065, abs=0.02)
    assert np.all(np.diff(F.values) >= 0)
    assert F.values.min() >= 0 and F.values.max() <= 1


def test_table_checksum(tmp_path, monkeypatch):
    from aseplab import experiments
    src = experiments.DATA_DIR / "tw_gue.txt"
    bad = tmp_path / "tw_gue.txt"
    text = src.read_text().splitlines()
    text[5] = text[5][:-1] + ("1" if text[5][-1] != "1" else "2")
    bad.write_text("\n".join(text) + "\n")
    monkeypatch.setenv("ASEPLAB_TABLE_DIR", str(tmp_path))
    with pytest.raises(TableChecksumError):
        load_ref_cdf("GUE")
    monkeypatch.setenv("ASEPLAB_TABLE_DIR", str(tmp_path / "missing"))
    with pytest.raises(TableChecksumError):
        load_ref_cdf("GOE")


# -- theory curves

def test_theory_profile():
    F = load_ref_cdf("GOE")
    c = np.linspace(-4, 4, 9)
    assert np.allclose(theory_profile("flat", c), 1 - F(2 ** (-2 / 3) * c))
    assert theory_profile("step", 0.0) == pytest.approx(1 - load_ref_cdf("GUE")(0.0))
    assert theory_profile("flat", -50) == pytest.approx(1.0)
    assert theory_profile("step", 50) == pytest.approx(0.0)
    assert np.all(np.diff(theory_profile("maxTV", c)) <= 0)
    assert theory_profile("step", 1.3, alpha=0.3) == pytest.approx(
        theory_profile("step", 1.3, alpha=0.7))
    for bad in ("half_flat", "nope"):
        with pytest.raises(ValueError):
            theory_profile(bad, 0.0)


# -- families

def test_family_configs():
    xi, D = family_config("flat", 8)
    assert xi.literal() == "01010101 @ a=1" and D == 1
    xi, _ = family_config("half_flat", 8)
    assert (xi.a, xi.b) == (-4, 2) and xi.positions().tolist() == [-4, -2, 0]
    xi, D = family_config("step", 8, alpha=0.25)
    assert xi.k == 2 and D == pytest.approx(step_D(0.25))


# -- lower and upper estimates

def test_lower_event_A_at_zero():
    xi = SegmentConfig.parse("101010")
    est = tv_lower_estimate(xi, [0.0], 0.75, "event_A", l=0)[0]
    piA = stationary_event_A(6, 1, 3, 0, 0.75)
    assert est.value == pytest.approx(abs(1.0 - piA))
    assert est.ci == (est.value, est.value)


def test_lr_pair_law_normalized():
    law = lr_pair_law(7, 1, 3, 0.7)
    assert sum(law.values()) == pytest.approx(1.0)
    space = StateSpace(7, 1, 3, 0.7)
    pi = space.closed_form()
    acc = {}
    for r in range(space.size):
        x = space.config(r)
        L = int(x.positions()[0])
        R = int(np.flatnonzero(x.occ == 0)[-1]) + 1
        acc[(L, R)] = acc.get((L, R), 0.0) + pi[r]
    assert set(acc) == set(law)
    for key in law:
        assert law[key] == pytest.approx(acc[key], rel=1e-9)


@pytest.mark.filterwarnings("ignore:statistic is under-sampled")
@pytest.mark.parametrize("statistic", ["full_config", "L_R_pair", "event_A"])
def test_lower_is_below_exact(statistic):
    xi = SegmentConfig.parse("111000")
    space = StateSpace(6, 1, 3, 0.75)
    ts = [0.5, 2.0, 5.0, 10.0]
    est = tv_lower_estimate(xi, ts, 0.75, statistic, trials=4000, seed=2, l=0)
    for t, e in zip(ts, est):
        assert e.ci[0] <= exact_tv(space, xi, t) + 1e-12


def test_under_sampled_warning():
    with pytest.warns(UserWarning, match="under-sampled"):
        tv_lower_estimate(SegmentConfig.parse("111000"), [1.0], 0.75, "full_config", trials=50)


def test_full_config_limit():
    with pytest.raises(ValueError):
        tv_lower_estimate(SegmentConfig(1, 25, [1] * 10 + [0] * 15), [1.0], 0.75, "full_config")


def test_upper_is_above_exact():
    xi = SegmentConfig.parse("111000")
    space = StateSpace(6, 1, 3, 0.75)
    ts = [0.0, 2.0, 5.0, 10.0, 20.0]
    est = tv_upper_estimate(xi, ts, 0.75, trials=4000, seed=5)
    assert est[0].value == 1.0
    for t, e in zip(ts, est):
        assert e.ci[1] >= exact_tv(space, xi, t) - 1e-12


def test_upper_flags_times_past_horizon():
    xi = SegmentConfig.parse("1100")
    est = tv_upper_estimate(xi, [1.0, 5.0], 0.75, trials=50, horizon=2.0)
    assert not est[0].flagged and est[1].flagged


def test_hitting_tail_is_monotone():
    xi, _ = family_config("flat", 16)
    H = hitting_H_samples(xi, 0.75, 200.0, 500, seed=1)
    ts = np.linspace(0, 200, 81)
    tail = [np.count_nonzero(~(H <= t)) for t in ts]
    assert all(a >= b for a, b in zip(tail, tail[1:]))


def test_profile_toy_band_brackets_exact():
    rows = profile_run("flat", 6, 0.75, [-4, -2, 0, 2, 4], trials=3000, seed=3, exact=True)
    for r in rows:
        assert r["exact"] is not None
        assert r["lower_ci_lo"] <= r["exact"] + 1e-12
        assert r["upper_ci_hi"] >= r["exact"] - 1e-12
        assert r["lower_ci_lo"] <= r["upper_ci_hi"]
    assert rows[0]["upper"] >= rows[-1]["upper"]


def test_step_profile_time_scale():
    rows = profile_run("step", 8, 0.75, [0.0], trials=20, seed=0)
    assert rows[0]["t"] == pytest.approx(2 * 8 / 0.5)


def test_half_flat_has_no_theory():
    rows = profile_run("half_flat", 8, 0.75, [0.0], trials=20, seed=0)
    assert rows[0]["theory"] is None


# -- parallel trials

def test_batch_does_not_depend_on_jobs():
    xi, _ = family_config("flat", 12)
    spec = RunSpec(checkpoints=[3.0, 6.0])
    a = batch([xi], ClockField(1, 0.75), 6.0, 120, spec, jobs=1, chunk=50)
    b = batch([xi], ClockField(1, 0.75), 6.0, 120, spec, jobs=3, chunk=50)
    c = batch([xi], ClockField(1, 0.75), 6.0, 120, spec, jobs=1, chunk=120)
    assert np.array_equal(a.leftmost, b.leftmost) and np.array_equal(a.leftmost, c.leftmost)


# -- side events and KPZ

def test_side_events_shape():
    s = side_events("flat", 16, 0.75, [-2.0, 2.0], trials=200, seed=0)
    assert s.particle.shape == (2,) and s.hole_ci.shape == (2, 2)
    assert np.all((0 <= s.particle) & (s.particle <= 1))
    assert s.particle[0] >= s.particle[1] - 0.15


def test_kpz_small_run():
    res = kpz_onepoint_run("step", 32, 100, seed=0)
    assert res.reference == "GUE" and 0 <= res.ks <= 1
    grid = np.linspace(-10, 10, 50)
    F = res.ecdf(grid)
    assert F[0] == 0 and F[-1] == 1 and np.all(np.diff(F) >= 0)
    half = kpz_onepoint_run("half_flat", 16, 20, seed=0)
    assert half.reference is None
    with pytest.raises(ValueError):
        kpz_onepoint_run("flat", 16, 10, seed=0, rho=0.3)
