import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from statsmodels.stats.proportion import proportion_confint

from dynwalk import estimators as est
from dynwalk import events, oracle, streams
from dynwalk import schedule as sch
from dynwalk.errors import EstimatorRefused, InputError, ResourceError
from dynwalk.walk import WalkConfig, path_view

# segment 2 spans steps 3..9 (six moves); segments 3.. keep the clause ranges short
DESK = sch.desk_schedule([3, 9, 12, 15, 18, 21, 24, 27, 30], inner=[1, 2, 1, 2, 1, 1, 1, 1, 1])
TINY = sch.desk_schedule([1, 2, 3, 4, 5])


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5000), st.data())
def test_wilson_matches_statsmodels(n, data):
    k = data.draw(st.integers(0, n))
    lo, hi = est.wilson_interval(k, n)
    ref_lo, ref_hi = proportion_confint(k, n, alpha=0.05, method="wilson")
    assert lo == pytest.approx(ref_lo, abs=1e-12)
    assert hi == pytest.approx(ref_hi, abs=1e-12)
    assert 0 <= lo <= k / n <= hi <= 1


def test_wilson_coverage_self_test():
    rng = np.random.default_rng(20240601)
    covered = 0
    for _ in range(500):
        p = rng.uniform(0.02, 0.98)
        n = int(rng.integers(50, 2000))
        lo, hi = est.wilson_interval(int(rng.binomial(n, p)), n)
        covered += lo <= p <= hi
    assert covered / 500 >= 0.92


def test_estimate_bounds_at_extremes():
    e = est.McEstimate.from_counts(10, 10)
    assert e.ci_high == 1.0 and e.estimate == 1.0
    e = est.McEstimate.from_counts(0, 10)
    assert e.ci_low == 0.0
    with pytest.raises(InputError):
        est.McEstimate.from_counts(11, 10)


def test_constant_detectors():
    spec = est.ExperimentSpec("const", 500, 1, steps=3)
    yes = est.estimate_event(spec, lambda b: np.ones(len(b), bool))
    no = est.estimate_event(spec, lambda b: np.zeros(len(b), bool))
    assert yes.estimate == 1.0 and yes.ci_high == 1.0
    assert no.estimate == 0.0


def test_first_step_law():
    spec = est.ExperimentSpec("first", 100_000, 8, steps=1, reference=0.25)
    e = est.estimate_event(spec, lambda b: (b.paths_0[:, 1, 0] == 1) & (b.paths_0[:, 1, 1] == 0))
    assert e.agrees(0.25)
    assert abs(e.z) <= 4


def test_trials_follow_documented_seeds():
    spec = est.ExperimentSpec("seeds", 20, 42, steps=12, t=0.4)
    batch = est._make_batch(spec, 0, 20)
    for r in range(20):
        cfg = WalkConfig(int(streams.trial_seeds(42, [r])[0]))
        assert (batch.paths_0[r] == path_view(cfg, 12, 0.0).positions).all()
        assert (batch.paths_t[r] == path_view(cfg, 12, 0.4).positions).all()


@pytest.mark.parametrize("x,ref", [((1, 0), 1 / 3), ((1, 1), 1 / 6)])
def test_hit_before_exit_radius_two(x, ref):
    e = est.estimate_hit_before_exit(x, 2, 100_000, master_seed=5)
    assert e.reference == pytest.approx(ref, abs=1e-12)
    assert abs(e.z) <= 4


def test_hit_before_exit_guard():
    with pytest.raises(InputError):
        est.estimate_hit_before_exit((2, 0), 2, 10)


def test_segment_lemmas_against_enumeration():
    rep = est.estimate_segment_lemmas(DESK, 2, 40_000, master_seed=3, start="fixed", start_point=(2, 0))
    exact = est.exact_segment_events(DESK, 2, (2, 0))
    for name in ("R", "SR", "G"):
        e = getattr(rep, name)
        assert e.reference == pytest.approx(float(exact[name]))
        assert e.agrees(e.reference), name
    assert rep.SR.estimate <= rep.R.estimate


def test_g_fails_only_through_the_inner_bound():
    # outer radius = s_j, so the triangle inequality keeps every endpoint inside
    trials, seed = 3000, 17
    rep = est.estimate_segment_lemmas(DESK, 4, trials, master_seed=seed, start="origin")
    inner2 = DESK.inner_radius(4) ** 2
    fails = 0
    for r in range(trials):
        cfg = WalkConfig(int(streams.trial_seeds(seed, [r])[0]))
        x, y = path_view(cfg, DESK.stop(4), 0.0).positions[-1]
        fails += x * x + y * y < inner2
    assert rep.G.successes == trials - fails


def test_annulus_start_points():
    s = sch.desk_schedule([10, 40, 2000], inner=[3, 5, 30], outer=[6, 40, 2000])
    seeds = streams.trial_seeds(0, np.arange(20_000))
    pts = est.sample_annulus(seeds, 3, 6, 0)
    r2 = (pts**2).sum(1)
    assert ((r2 >= 9) & (r2 <= 36)).all()
    allowed = est._annulus_points(3, 6)
    counts = np.unique(pts, axis=0, return_counts=True)[1]
    assert len(counts) == len(allowed)
    expected = len(pts) / len(allowed)
    chi2 = ((counts - expected) ** 2 / expected).sum()
    assert chi2 < len(allowed) + 5 * math.sqrt(2 * len(allowed))
    big = est.sample_annulus(seeds[:2000], 30, 2000, 1)
    r2 = (big**2).sum(1)
    assert ((r2 >= 900) & (r2 <= 2000**2)).all()
    rep = est.estimate_segment_lemmas(s, 3, 200, start="annulus")
    assert rep.R.reference is None


def test_annulus_zero_and_budget():
    with pytest.raises(InputError):
        est.estimate_segment_lemmas(DESK, 1, 10, start="annulus")
    with pytest.raises(ResourceError):
        est.estimate_segment_lemmas(sch.paper_schedule(3), 3, 1, start="fixed")
    with pytest.raises(InputError):
        est.estimate_segment_lemmas(DESK, 3, 10, start="fixed", start_point=(0, 0))


def test_joint_at_time_zero():
    rep = est.estimate_joint(DESK, 0.0, 5000, j=3, master_seed=2, start="fixed")
    for ev in rep.events.values():
        assert ev.joint.successes == ev.marginal_0.successes == ev.marginal_t.successes
        assert ev.ratio == pytest.approx(1 / ev.marginal_0.estimate)


@pytest.mark.parametrize("t", [0.2, 1.0])
def test_joint_against_two_time_enumeration(t):
    s = sch.desk_schedule([2, 7, 9, 11, 13])
    rep = est.estimate_joint(s, t, 40_000, j=2, master_seed=9, start="fixed", start_point=(2, 0))
    for name in ("R", "SR"):
        ev = rep.events[name]
        assert ev.joint.reference is not None
        assert ev.joint.agrees(ev.joint.reference), name
        assert ev.marginal_0.agrees(ev.marginal_0.reference), name


def test_joint_full_resampling_ratio_near_one():
    rep = est.estimate_joint(DESK, 10.0, 40_000, j=3, master_seed=1, start="fixed")
    ev = rep.events["R"]
    assert ev.ratio_low <= 1 <= ev.ratio_high


def test_correlation_ratio_interval():
    ratio, lo, hi = est.correlation_ratio(500, 500, 250, 1000)
    assert ratio == pytest.approx(1.0)
    assert lo < 1 < hi
    assert est.correlation_ratio(0, 10, 0, 100)[2] == math.inf


def test_workers_do_not_change_results():
    a = est.estimate_joint(DESK, 0.5, 30_000, k=1, master_seed=4, start="origin", workers=1)
    b = est.estimate_joint(DESK, 0.5, 30_000, k=1, master_seed=4, start="origin", workers=4)
    assert a == b


def test_decorrelation_full_and_empty():
    full = est.estimate_resample_decorrelation(40, 20, 40, 20_000, path_seed=3, master_seed=1)
    assert full.conditional.agrees(full.unconditional.estimate)
    assert full.unconditional.agrees(full.unconditional.reference)
    none = est.estimate_resample_decorrelation(40, 20, 0, 200, path_seed=3)
    assert none.conditional.estimate in (0.0, 1.0)
    assert none.conditional.estimate == float(none.fixed_path_hits)


def test_decorrelation_trend():
    n = 32
    trend = est.decorrelation_trend(n, 16, [n // 16, n // 2], paths=20, trials=1500, master_seed=3)
    assert trend[n // 2] <= trend[n // 16]


def brute_fmt(schedule, M, t):
    last = sch.se_last_step(schedule, M)

    def e(paths):
        return events.intersection_flags(paths, 0, schedule, M)

    p0 = float(oracle.brute_force(last, (0, 0), e).probability)
    pj = oracle.brute_force_two_time(last, (0, 0), (0, 0), t, lambda a, b: e(a) & e(b)).probability
    return p0, pj


def test_fmt_ratio_cases():
    vac = est.estimate_fmt_ratio(TINY, 0, 0.3, 100)
    assert vac.ratio == 1.0
    at0 = est.estimate_fmt_ratio(TINY, 1, 0.0, 20_000, master_seed=1)
    assert at0.ratio == pytest.approx(1 / at0.marginal.estimate)
    p0, pj = brute_fmt(TINY, 1, 0.5)
    r = est.estimate_fmt_ratio(TINY, 1, 0.5, 100_000, master_seed=2)
    assert r.marginal.agrees(p0)
    assert r.joint.agrees(pj)
    assert r.ci_low <= pj / p0**2 <= r.ci_high


def test_fmt_refuses_rare_events():
    with pytest.raises(EstimatorRefused):
        est.estimate_fmt_ratio(TINY, 1, 0.5, 100, floor=0.99)


def test_excursion_and_disc_bounds():
    for m in (2, 3, 4):
        e = est.estimate_max_excursion(10_000, m, 10_000, master_seed=1)
        assert e.estimate <= 4 / m**2
    for N, M in ((100, 100), (400, 200)):
        e = est.estimate_disc_hit(N, M, 10_000, master_seed=2)
        assert e.estimate <= 4 * N / M**2


def test_report_serialization():
    e = est.McEstimate.from_counts(3, 10, 0.25, "x")
    row = e.csv_row("lemma", "a=1")
    assert len(row) == len(est.McEstimate.CSV_FIELDS)
    assert e.to_dict()["successes"] == 3
