"""Segment and super-segment events on realized paths.

Batch functions take a position array of shape ``(B, L+1, 2)`` whose
column 0 is the walk at absolute step ``step0``; single-path wrappers take
a :class:`~dynwalk.walk.PathView` (``step0 = 0``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import schedule as sch
from .errors import InputError
from .walk import PathView, WalkConfig, path_view


@dataclass(frozen=True)
class SegmentOutcome:
    j: int
    hit_D: bool
    hit_origin: bool
    end_in_annulus: bool

    @property
    def r(self) -> bool:
        return self.hit_D

    @property
    def sr(self) -> bool:
        return self.hit_D and not self.hit_origin

    @property
    def g(self) -> bool:
        return self.end_in_annulus


@dataclass(frozen=True)
class SuperSegmentOutcome:
    k: int
    segments: tuple[SegmentOutcome, ...]
    se_holds: bool
    se_witness: int | None


@dataclass(frozen=True)
class JointOutcome:
    """Event flags of the same walk read at times 0 and t."""

    t: float
    at_0: SegmentOutcome | SuperSegmentOutcome
    at_t: SegmentOutcome | SuperSegmentOutcome

    @property
    def r(self) -> bool | None:
        if isinstance(self.at_0, SegmentOutcome):
            return self.at_0.r and self.at_t.r
        return None

    @property
    def sr(self) -> bool | None:
        if isinstance(self.at_0, SegmentOutcome):
            return self.at_0.sr and self.at_t.sr
        return None

    @property
    def se(self) -> bool | None:
        if isinstance(self.at_0, SuperSegmentOutcome):
            return self.at_0.se_holds and self.at_t.se_holds
        return None


def _columns(positions: np.ndarray, step0: int, first: int, last: int) -> np.ndarray:
    """Positions at absolute steps ``first..last`` (inclusive)."""
    n_cols = positions.shape[1]
    if first < step0 or last - step0 >= n_cols:
        raise InputError(
            f"path covers steps {step0}..{step0 + n_cols - 1}, needs {first}..{last}"
        )
    return positions[:, first - step0 : last - step0 + 1]


def segment_flags(positions: np.ndarray, step0: int, schedule: sch.ParamSchedule, j: int):
    """``(hit_D, hit_origin, end_in_annulus)`` boolean arrays for segment ``j``."""
    seg = schedule.segment(j)
    block = _columns(positions, step0, seg.start, seg.stop - 1)
    r2 = block[..., 0] ** 2 + block[..., 1] ** 2
    hit_d = (r2 == 1).any(axis=1)
    hit_origin = (r2 == 0).any(axis=1)
    return hit_d, hit_origin, g_flags(positions, step0, schedule, j)


def g_flags(positions: np.ndarray, step0: int, schedule: sch.ParamSchedule, j: int) -> np.ndarray:
    """``G_j``: the walk at step ``s_j`` lies in annulus ``A_j``."""
    end = _columns(positions, step0, schedule.stop(j), schedule.stop(j))[:, 0]
    r2 = end[:, 0] ** 2 + end[:, 1] ** 2
    lo, hi = sch.annulus_bounds_sq(schedule, j)
    return (r2 >= lo) & (r2 <= hi)


def se_flags(
    positions: np.ndarray,
    step0: int,
    schedule: sch.ParamSchedule,
    k: int,
    include_next: bool = True,
):
    """``(holds, witness)`` arrays for ``SE_k``; witness is -1 when no segment qualifies.

    ``SE_k`` holds when exactly one segment ``j`` of ``W_k`` has ``SR_j``,
    no other segment in the clause range hits D, and every ``G_i`` in the
    clause range holds.  Since ``SR_j`` implies ``R_j``, the first two
    conditions amount to: one R in the clause range, and it is an SR
    inside ``W_k``.
    """
    clause = sch.se_range(k, include_next)
    members = schedule.super_segment(k)
    n_r = np.zeros(positions.shape[0], dtype=np.int64)
    n_sr = np.zeros_like(n_r)
    all_g = np.ones(positions.shape[0], dtype=bool)
    witness = np.full(positions.shape[0], -1, dtype=np.int64)
    for i in clause:
        hit_d, hit_origin, g = segment_flags(positions, step0, schedule, i)
        n_r += hit_d
        all_g &= g
        if i in members:
            sr = hit_d & ~hit_origin
            n_sr += sr
            witness[sr] = i
    holds = (n_r == 1) & (n_sr == 1) & all_g
    return holds, np.where(holds, witness, -1)


def intersection_flags(
    positions: np.ndarray,
    step0: int,
    schedule: sch.ParamSchedule,
    M: int,
    include_next: bool = True,
) -> np.ndarray:
    """``E_M = SE_1 & ... & SE_M`` (all true when M = 0)."""
    out = np.ones(positions.shape[0], dtype=bool)
    for k in range(1, M + 1):
        out &= se_flags(positions, step0, schedule, k, include_next)[0]
    return out


def detect_segment(path: PathView, j: int, schedule: sch.ParamSchedule) -> SegmentOutcome:
    hit_d, hit_origin, g = segment_flags(path.positions[None], 0, schedule, j)
    return SegmentOutcome(j, bool(hit_d[0]), bool(hit_origin[0]), bool(g[0]))


def detect_SE(
    path: PathView, k: int, schedule: sch.ParamSchedule, include_next: bool = True
) -> SuperSegmentOutcome:
    batch = path.positions[None]
    holds, witness = se_flags(batch, 0, schedule, k, include_next)
    segments = tuple(detect_segment(path, i, schedule) for i in sch.se_range(k, include_next))
    w = int(witness[0])
    return SuperSegmentOutcome(k, segments, bool(holds[0]), w if w >= 0 else None)


def detect_joint(
    cfg: WalkConfig,
    schedule: sch.ParamSchedule,
    t: float,
    j: int | None = None,
    k: int | None = None,
    include_next: bool = True,
) -> JointOutcome:
    """Evaluate segment ``j`` or super-segment ``k`` on the walk at times 0 and t."""
    if (j is None) == (k is None):
        raise InputError("give exactly one of j or k")
    if j is not None:
        n = schedule.stop(j)
        detect = lambda path: detect_segment(path, j, schedule)  # noqa: E731
    else:
        n = sch.se_last_step(schedule, k, include_next)
        detect = lambda path: detect_SE(path, k, schedule, include_next)  # noqa: E731
    return JointOutcome(float(t), detect(path_view(cfg, n, 0.0)), detect(path_view(cfg, n, t)))


OUTCOME_CSV_HEADER = ("seed", "t", "level", "index", "hit_D", "hit_origin", "end_in_annulus", "sr", "se")


def outcome_row(seed: int, t: float, outcome: SegmentOutcome | SuperSegmentOutcome) -> tuple:
    """One CSV row; segment rows leave ``se`` blank, super-segment rows leave the segment flags blank."""
    if isinstance(outcome, SegmentOutcome):
        return (seed, t, "j", outcome.j, int(outcome.hit_D), int(outcome.hit_origin),
                int(outcome.end_in_annulus), int(outcome.sr), "")
    return (seed, t, "k", outcome.k, "", "", "", "", int(outcome.se_holds))
