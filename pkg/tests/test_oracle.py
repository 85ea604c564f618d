import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynwalk import oracle
from dynwalk.errors import InputError, ResourceError

STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def gauss_seidel(n, target=((0, 0),), sweeps=20_000, tol=1e-15):
    """Independent dict-based relaxation for the hit-target-before-exit problem."""
    pts = [(x, y) for x in range(-n + 1, n) for y in range(-n + 1, n) if x * x + y * y < n * n]
    v = {p: 0.0 for p in pts}
    for p in target:
        v[p] = 1.0
    for _ in range(sweeps):
        change = 0.0
        for p in pts:
            if p in target:
                continue
            new = 0.25 * sum(v.get((p[0] + dx, p[1] + dy), 0.0) for dx, dy in STEPS)
            change = max(change, abs(new - v[p]))
            v[p] = new
        if change < tol:
            break
    return v


def test_radius_two_hand_values():
    # a = v(1,0), b = v(1,1): a = (1 + 2b)/4, b = a/2  =>  a = 1/3, b = 1/6
    f = oracle.solve_hit_before_exit(2)
    assert abs(f.value((1, 0)) - 1 / 3) <= 1e-12
    assert abs(f.value((1, 1)) - 1 / 6) <= 1e-12
    assert f.value((0, 0)) == 1.0
    assert f.value((2, 0)) == 0.0


@pytest.mark.parametrize("n", [3, 5, 7])
def test_matches_independent_relaxation(n):
    f = oracle.solve_hit_before_exit(n)
    ref = gauss_seidel(n)
    for p, val in ref.items():
        assert abs(f.value(p) - val) < 1e-11


@pytest.mark.parametrize("n", [4, 33, 100])
def test_field_symmetry_and_bounds(n):
    f = oracle.solve_hit_before_exit(n)
    g = f.grid
    assert np.allclose(g, g[::-1, :], atol=1e-13)
    assert np.allclose(g, g.T, atol=1e-13)
    assert g.min() >= -1e-14 and g.max() <= 1 + 1e-14
    assert f.residual <= 1e-12


@pytest.mark.parametrize("target", [((1, 0),), ((0, 0), (2, 1)), ((-1, 2), (1, 1), (0, -3))])
def test_asymmetric_targets_match_relaxation(target):
    n = 5
    f = oracle.solve_hit_before_exit(n, target=target)
    for p, val in gauss_seidel(n, target).items():
        assert abs(f.value(p) - val) < 1e-11


def test_other_targets():
    f = oracle.solve_hit_before_exit(4, target=[(1, 0), (-1, 0), (0, 1), (0, -1)])
    assert f.value((1, 0)) == 1.0
    # the origin's neighbours are all targets, so it hits with certainty
    assert abs(f.value((0, 0)) - 1.0) < 1e-12


def test_radius_guards():
    with pytest.raises(ResourceError):
        oracle.solve_hit_before_exit(1)
    with pytest.raises(ResourceError):
        oracle.solve_hit_before_exit(2000)
    with pytest.raises(InputError):
        oracle.solve_hit_before_exit(3, target=[(5, 0)])


def test_csv_export():
    text = oracle.solve_hit_before_exit(2).to_csv()
    lines = text.strip().splitlines()
    assert lines[0] == "x,y,value"
    assert len(lines) == 1 + 9


def test_escape_probability_decreases_like_inverse_log():
    esc = [oracle.escape_probability(n) for n in (8, 16, 32, 64)]
    assert all(a > b for a, b in zip(esc, esc[1:]))
    fit = oracle.fit_escape((8, 16, 32, 64))
    assert fit.slope_rel_error < 0.05


def test_radial_profile_monotone():
    prof = oracle.radial_profile(40)
    assert prof[0] == pytest.approx(oracle.hit_probability((1, 0), 40))
    assert all(a >= b - 1e-12 for a, b in zip(prof, prof[1:]))


def test_band_check_is_finite():
    rep = oracle.lemma31_band_check(32)
    assert 0 < rep.min_C < 5


# --- enumeration -------------------------------------------------------------


def dp_hit(m, start, target, avoid=None):
    """Exact P(some S_0..S_m in target, never in avoid before that) via a Fraction DP."""
    live = {tuple(start): Fraction(1)}
    total = Fraction(0)
    for step in range(m + 1):
        nxt = {}
        for p, w in live.items():
            if avoid and p in avoid:
                continue
            if p in target:
                total += w
                continue
            if step == m:
                continue
            for dx, dy in STEPS:
                q = (p[0] + dx, p[1] + dy)
                nxt[q] = nxt.get(q, 0) + w / 4
        live = nxt
    return total


D = {(1, 0), (-1, 0), (0, 1), (0, -1)}


def hits_d(paths):
    r2 = paths[..., 0] ** 2 + paths[..., 1] ** 2
    return (r2 == 1).any(axis=1)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 7), st.integers(-3, 3), st.integers(-3, 3))
def test_brute_force_matches_dp(m, x, y):
    got = oracle.brute_force(m, (x, y), hits_d).probability
    assert got == dp_hit(m, (x, y), D)


def test_brute_force_avoiding_origin_matches_dp():
    def sr(paths):
        r2 = paths[..., 0] ** 2 + paths[..., 1] ** 2
        first_d = np.where((r2 == 1).any(1), (r2 == 1).argmax(1), 10**9)
        first_o = np.where((r2 == 0).any(1), (r2 == 0).argmax(1), 10**9)
        return first_d < first_o

    assert oracle.brute_force(8, (2, 1), sr).probability == dp_hit(8, (2, 1), D, avoid={(0, 0)})


def test_brute_force_budget():
    with pytest.raises(ResourceError):
        oracle.brute_force(11, (0, 0), hits_d)
    assert oracle.brute_force(0, (1, 0), hits_d).probability == 1


def pair_dp(m, start, t, event_final):
    """Two-time probability via a DP over pairs of positions and flags."""
    q = -math.expm1(-t)
    same = (1 - q) / 4 + q / 16
    diff = q / 16

    def flag(p):
        return p[0] ** 2 + p[1] ** 2 == 1

    state = {(tuple(start), flag(start), tuple(start), flag(start)): 1.0}
    for _ in range(m):
        nxt = {}
        for (a, fa, b, fb), w in state.items():
            for i, (dx, dy) in enumerate(STEPS):
                for k, (ex, ey) in enumerate(STEPS):
                    pa = (a[0] + dx, a[1] + dy)
                    pb = (b[0] + ex, b[1] + ey)
                    key = (pa, fa or flag(pa), pb, fb or flag(pb))
                    nxt[key] = nxt.get(key, 0.0) + w * (same if i == k else diff)
        state = nxt
    return math.fsum(w for (a, fa, b, fb), w in state.items() if event_final(fa, fb))


@pytest.mark.parametrize("t", [0.0, 0.3, 1.5, 30.0])
def test_two_time_enumeration_matches_pair_dp(t):
    m, start = 4, (2, 0)
    got = oracle.brute_force_two_time(m, start, start, t, lambda a, b: hits_d(a) & hits_d(b)).probability
    assert got == pytest.approx(pair_dp(m, start, t, lambda fa, fb: fa and fb), abs=1e-14)


def test_two_time_limits():
    m, start = 3, (2, 0)
    p = float(oracle.brute_force(m, start, hits_d).probability)
    at0 = oracle.brute_force_two_time(m, start, start, 0.0, lambda a, b: hits_d(a) & hits_d(b)).probability
    far = oracle.brute_force_two_time(m, start, start, 50.0, lambda a, b: hits_d(a) & hits_d(b)).probability
    assert at0 == pytest.approx(p, abs=1e-14)
    assert far == pytest.approx(p * p, abs=1e-14)


def test_two_time_budget():
    with pytest.raises(ResourceError):
        oracle.brute_force_two_time(6, (0, 0), (0, 0), 1.0, lambda a, b: hits_d(a))


@pytest.mark.parametrize("n,w", [(4, 0), (6, 2), (8, 3), (9, 9)])
def test_window_return_matches_enumeration(n, w):
    def ret(paths):
        tail = paths[:, w:]
        return ((tail[..., 0] == 0) & (tail[..., 1] == 0)).any(axis=1)

    exact = float(oracle.brute_force(n, (0, 0), ret).probability)
    assert oracle.window_return_probability(n, w) == pytest.approx(exact, abs=1e-14)
