import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynwalk import events
from dynwalk import schedule as sch
from dynwalk.errors import InputError
from dynwalk.walk import PathView, WalkConfig, path_view, positions_from_codes

SCHED = sch.desk_schedule([1, 3, 5, 8, 11, 14, 17, 20, 23, 26], inner=[1, 1, 1, 2, 1, 2, 1, 2, 1, 1])


def naive_segment(path, s, j):
    pts = [tuple(p) for p in path[s.stop(j - 1) : s.stop(j)]]
    hit_d = any(x * x + y * y == 1 for x, y in pts)
    hit_o = any(x == 0 and y == 0 for x, y in pts)
    ex, ey = path[s.stop(j)]
    g = s.inner_radius(j) ** 2 <= ex * ex + ey * ey <= s.outer_radius(j) ** 2
    return hit_d, hit_o, g


def naive_se(path, s, k, include_next):
    """Literal reading: exactly one SR_j in W_k, no other R_i in the clause range, all G_i there."""
    top = 2 ** (k + 1) if include_next else 2 ** (k + 1) - 1
    clause = range(2**k, top + 1)
    flags = {i: naive_segment(path, s, i) for i in clause}
    for j in range(2**k, 2 ** (k + 1)):
        hit_d, hit_o, _ = flags[j]
        if not (hit_d and not hit_o):
            continue
        others_clear = all(not flags[i][0] for i in clause if i != j)
        if others_clear and all(flags[i][2] for i in clause):
            return True
    return False


codes_st = st.lists(st.integers(0, 3), min_size=26, max_size=26)


@settings(max_examples=200, deadline=None)
@given(codes_st, st.integers(1, 10))
def test_segment_flags_match_definition(codes, j):
    path = positions_from_codes(np.array(codes, dtype=np.int8))
    got = [bool(v[0]) for v in events.segment_flags(path[None], 0, SCHED, j)]
    assert tuple(got) == naive_segment(path, SCHED, j)


@settings(max_examples=300, deadline=None)
@given(codes_st, st.integers(1, 2), st.booleans())
def test_se_flags_match_definition(codes, k, include_next):
    path = positions_from_codes(np.array(codes, dtype=np.int8))
    holds, witness = events.se_flags(path[None], 0, SCHED, k, include_next)
    assert bool(holds[0]) == naive_se(path, SCHED, k, include_next)
    if holds[0]:
        assert witness[0] in SCHED.super_segment(k)
        assert naive_segment(path, SCHED, int(witness[0]))[:2] == (True, False)
    else:
        assert witness[0] == -1


def test_se_example_hand_built():
    # schedule with unit segments: segment j is the single position S_{j-1}
    s = sch.desk_schedule(range(1, 10))
    # positions S_0..S_8: W_1 = segments {2, 3} -> S_1, S_2; clause adds segment 4 -> S_3
    right, left, up = 0, 1, 2
    path = positions_from_codes(np.array([right, right, up, up, up, up, up, up], dtype=np.int8))
    # S_1 = (1,0) in D, S_2 = (2,0), S_3 = (2,1), S_4 = (2,2)
    assert events.detect_SE(PathView(0.0, path), 1, s).se_holds
    # ending the clause range at segment 3 does not change this path
    assert events.detect_SE(PathView(0.0, path), 1, s, include_next=False).se_holds
    back = positions_from_codes(np.array([right, right, left, up, up, up, up, up], dtype=np.int8))
    # S_3 = (1,0) hits D in segment 4: only the literal (inclusive) reading rejects
    assert not events.detect_SE(PathView(0.0, back), 1, s).se_holds
    assert events.detect_SE(PathView(0.0, back), 1, s, include_next=False).se_holds


def test_sr_implies_r_and_g_bounds():
    seeds = np.arange(500)
    for seed in seeds[:50]:
        pv = path_view(WalkConfig(int(seed)), 26, 0.0)
        for j in range(1, 11):
            out = events.detect_segment(pv, j, SCHED)
            assert not out.sr or out.r


def test_intersection_empty_is_true():
    path = np.zeros((3, 1, 2), dtype=np.int64)
    assert events.intersection_flags(path, 0, SCHED, 0).all()


def test_path_too_short_is_rejected():
    with pytest.raises(InputError):
        events.detect_segment(PathView(0.0, np.zeros((3, 2), dtype=np.int64)), 4, SCHED)


def test_detect_joint_at_zero_agrees():
    cfg = WalkConfig(4)
    out = events.detect_joint(cfg, SCHED, 0.0, j=3)
    assert out.at_0 == out.at_t
    assert out.r == out.at_0.r
    out = events.detect_joint(cfg, SCHED, 0.0, k=2)
    assert out.se == out.at_0.se_holds
    with pytest.raises(InputError):
        events.detect_joint(cfg, SCHED, 0.0)


def test_outcome_rows():
    out = events.detect_segment(path_view(WalkConfig(1), 26, 0.0), 2, SCHED)
    row = events.outcome_row(1, 0.0, out)
    assert len(row) == len(events.OUTCOME_CSV_HEADER)
