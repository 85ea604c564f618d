"""Sweeping the dynamics over t in [0, 1].

The first ``n`` steps only change at the clock rings of steps ``1..n``, so
``[0, 1)`` splits into half-open constancy intervals ``[tau_i, tau_{i+1})``.
A sweep evaluates a path predicate once per interval, at its left end,
updating positions in place: a ring of step ``i`` shifts every ``S_m`` with
``m >= i`` by the same vector.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import events, streams
from . import schedule as sch
from .errors import InputError, PredicateError, ResourceError
from .walk import DIRS, PathView, WalkConfig, codes_at, event_arrays, path_view, positions_from_codes

MAX_SWEEP_STEPS = 10**5

PathPredicate = Callable[[PathView], bool]


@dataclass(frozen=True)
class SweepResult:
    seed: int
    n: int
    intervals: tuple[tuple[float, float], ...]
    total_measure: float
    event_count: int
    event_times: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def contains(self, t: float) -> bool:
        return any(a <= t < b for a, b in self.intervals)

    def endpoints_valid(self) -> bool:
        """Every endpoint is 0, 1 or a clock ring of steps 1..n."""
        allowed = {0.0, 1.0, *self.event_times}
        return all(a in allowed and b in allowed for a, b in self.intervals)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n": self.n,
            "intervals": [[a, b] for a, b in self.intervals],
            "total_measure": self.total_measure,
            "event_count": self.event_count,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _check_sweep(cfg: WalkConfig, n: int):
    if cfg.horizon < 1:
        raise InputError("sweeps need horizon >= 1")
    if not 0 <= n <= cfg.n_max:
        raise InputError(f"n={n} outside [0, {cfg.n_max}]")
    if n > MAX_SWEEP_STEPS:
        raise ResourceError(f"n={n} exceeds the sweep cap of {MAX_SWEEP_STEPS}")


def sweep_values(cfg: WalkConfig, n: int, fn: Callable[[PathView], object]):
    """``fn`` on every constancy interval: ``(pieces, ring_times)``, pieces being ``(a, b, value)``."""
    _check_sweep(cfg, n)
    seed = streams.as_seed(cfg.master_seed)
    positions = positions_from_codes(codes_at([seed], np.arange(1, n + 1), 0.0)[0])
    if n:
        times, idx, old, new = event_arrays(cfg.master_seed, n, 0.0, 1.0)
        keep = times < 1.0
        times, idx, old, new = times[keep], idx[keep], old[keep], new[keep]
        shift = DIRS[new] - DIRS[old]
    else:
        times = np.zeros(0)
    pieces = []
    start = 0.0
    i, count = 0, len(times)
    while True:
        view = PathView(start, positions.copy())
        try:
            value = fn(view)
        except Exception as exc:
            raise PredicateError(start, exc) from exc
        if i == count:
            pieces.append((start, 1.0, value))
            break
        nxt = float(times[i])
        pieces.append((start, nxt, value))
        while i < count and times[i] == nxt:
            positions[idx[i]:] += shift[i]
            i += 1
        start = nxt
    return pieces, tuple(float(x) for x in times)


def _merge(pieces) -> tuple[tuple[float, float], ...]:
    out: list[list[float]] = []
    for a, b, ok in pieces:
        if not ok:
            continue
        if out and out[-1][1] == a:
            out[-1][1] = b
        else:
            out.append([a, b])
    return tuple((a, b) for a, b in out)


def sweep(cfg: WalkConfig, n: int, predicate: PathPredicate) -> SweepResult:
    """Maximal half-open intervals of ``[0, 1)`` on which ``predicate`` holds for the first ``n`` steps."""
    pieces, times = sweep_values(cfg, n, lambda view: bool(predicate(view)))
    intervals = _merge(pieces)
    return SweepResult(
        seed=int(cfg.master_seed),
        n=n,
        intervals=intervals,
        total_measure=math.fsum(b - a for a, b in intervals),
        event_count=len(times),
        event_times=times,
    )


def dense_grid_check(cfg: WalkConfig, n: int, predicate: PathPredicate, result: SweepResult, factor: int = 10):
    """Grid times where direct evaluation disagrees with ``result``'s intervals.

    The grid has ``factor * max(event_count, 1)`` points spaced uniformly on
    ``[0, 1)``; each point rebuilds the path from scratch.
    """
    size = factor * max(result.event_count, 1)
    bad = []
    for t in np.arange(size) / size:
        t = float(t)
        if bool(predicate(path_view(cfg, n, t))) != result.contains(t):
            bad.append(t)
    return bad


# --- avoidance --------------------------------------------------------------

ForbiddenSet = Callable[[np.ndarray, np.ndarray], np.ndarray]

FORBIDDEN_SETS: dict[str, ForbiddenSet] = {
    "none": lambda x, y: np.zeros(np.shape(x), dtype=bool),
    "odd-rows": lambda x, y: (y % 2) == 1,
    "even-rows": lambda x, y: (y % 2) == 0,
    "rows-2mod4": lambda x, y: (y % 4) == 2,
}

# Periodic escape paths (direction codes, repeated) that avoid each set from the origin.
WITNESSES: dict[str, tuple[int, ...] | None] = {
    "none": (0,),
    "odd-rows": (0,),
    "even-rows": None,
    "rows-2mod4": (0,),
}


@dataclass(frozen=True)
class AvoidanceSpec:
    forbidden: str
    n_grid: tuple[int, ...]
    seeds: int
    master_seed: int = 0
    witness: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.forbidden not in FORBIDDEN_SETS:
            raise InputError(f"unknown forbidden set {self.forbidden!r}; choose from {sorted(FORBIDDEN_SETS)}")
        if self.seeds < 100:
            raise InputError("avoidance runs need at least 100 seeds")
        if not self.n_grid or min(self.n_grid) < 0:
            raise InputError("n_grid must be a non-empty list of non-negative integers")
        if self.witness is not None and not witness_avoids(self.forbidden, self.witness, max(self.n_grid)):
            raise InputError("registered witness path enters the forbidden set")

    def contains(self, x, y) -> np.ndarray:
        return FORBIDDEN_SETS[self.forbidden](np.asarray(x), np.asarray(y))


def witness_avoids(forbidden: str, pattern: Sequence[int], n: int) -> bool:
    codes = np.resize(np.asarray(pattern, dtype=np.int8), n)
    pts = positions_from_codes(codes)
    return not FORBIDDEN_SETS[forbidden](pts[:, 0], pts[:, 1]).any()


def parse_grid(text: str) -> tuple[int, ...]:
    """``"8:48:8"`` (inclusive stop) or ``"8,16,24"``."""
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise InputError(f"bad grid {text!r}; expected start:stop:step")
        return tuple(range(parts[0], parts[1] + 1, parts[2]))
    return tuple(int(p) for p in text.split(","))


@dataclass(frozen=True)
class DecayRow:
    n: int
    survivors: int
    seeds: int

    @property
    def fraction(self) -> float:
        return self.survivors / self.seeds


@dataclass(frozen=True)
class DecayReport:
    forbidden: str
    rows: tuple[DecayRow, ...]
    slope: float
    intercept: float
    r2: float
    complete: bool

    def to_csv(self) -> str:
        lines = ["n,fraction,seeds,survivors"]
        lines += [f"{r.n},{r.fraction!r},{r.seeds},{r.survivors}" for r in self.rows]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "forbidden": self.forbidden,
            "rows": [{"n": r.n, "fraction": r.fraction, "seeds": r.seeds, "survivors": r.survivors} for r in self.rows],
            "fit": {"slope": self.slope, "intercept": self.intercept, "r2": self.r2, "complete": self.complete},
        }


def avoid_length(forbidden: ForbiddenSet, positions: np.ndarray) -> int:
    """Number of leading positions outside the forbidden set."""
    bad = forbidden(positions[:, 0], positions[:, 1])
    hits = np.flatnonzero(bad)
    return int(hits[0]) if hits.size else len(positions)


def longest_avoiding_prefix(cfg: WalkConfig, n: int, forbidden: ForbiddenSet) -> int:
    """``max over t`` of the avoiding prefix length of ``S_0..S_n``; ``Q_m`` is non-empty iff it exceeds ``m``."""
    pieces, _ = sweep_values(cfg, n, lambda view: avoid_length(forbidden, view.positions))
    return max(value for _, _, value in pieces)


def log_linear_fit(ns, fractions) -> tuple[float, float, float]:
    """Least-squares line through ``(n, log fraction)`` over the positive fractions."""
    ns = np.asarray(ns, dtype=float)
    fr = np.asarray(fractions, dtype=float)
    ok = fr > 0
    if ok.sum() < 2 or np.ptp(ns[ok]) == 0:
        return math.nan, math.nan, math.nan
    y = np.log(fr[ok])
    if np.ptp(y) == 0:
        return 0.0, float(y[0]), math.nan
    fit = stats.linregress(ns[ok], y)
    return float(fit.slope), float(fit.intercept), float(fit.rvalue**2)


def run_avoidance(spec: AvoidanceSpec) -> DecayReport:
    """Fraction of seeds whose ``Q_n`` is non-empty, for each ``n`` in the grid, plus a log-linear fit.

    ``complete`` is False when some fraction is zero; the fit then only
    describes the positive part of the grid.
    """
    forbidden = FORBIDDEN_SETS[spec.forbidden]
    n_top = max(spec.n_grid)
    seeds = streams.trial_seeds(spec.master_seed, np.arange(spec.seeds))
    best = np.array([longest_avoiding_prefix(WalkConfig(int(s), 1.0), n_top, forbidden) for s in seeds])
    rows = tuple(DecayRow(n, int((best > n).sum()), spec.seeds) for n in spec.n_grid)
    slope, intercept, r2 = log_linear_fit([r.n for r in rows], [r.fraction for r in rows])
    return DecayReport(spec.forbidden, rows, slope, intercept, r2, all(r.survivors > 0 for r in rows))


# --- exceptional intervals --------------------------------------------------


def exceptional_predicate(n: int, m0: int, h: int) -> PathPredicate:
    """No origin visit at steps ``m0 < m <= n`` and at least ``h`` visits to D among steps ``0..n``."""

    def holds(view: PathView) -> bool:
        r2 = view.positions[:, 0] ** 2 + view.positions[:, 1] ** 2
        return not (r2[m0 + 1 : n + 1] == 0).any() and int((r2 == 1).sum()) >= h

    return holds


def exceptional_demo(cfg: WalkConfig, n: int, m0: int, h: int) -> SweepResult:
    """Times in ``[0, 1)`` where the first ``n`` steps look like an exceptional path."""
    if not 0 <= m0 <= n:
        raise InputError("need 0 <= m0 <= n")
    if h < 0:
        raise InputError("h must be non-negative")
    return sweep(cfg, n, exceptional_predicate(n, m0, h))


def nested_intersection(cfg: WalkConfig, schedule: sch.ParamSchedule, M: int, include_next: bool = True) -> SweepResult:
    """``T_M``: the times at which ``SE_1, ..., SE_M`` all hold."""
    if M < 0:
        raise InputError("M must be non-negative")
    n = sch.se_last_step(schedule, M, include_next) if M else 0

    def holds(view: PathView) -> bool:
        return bool(events.intersection_flags(view.positions[None], 0, schedule, M, include_next)[0])

    return sweep(cfg, n, holds)


def intervals_contained(inner: SweepResult, outer: SweepResult) -> bool:
    """Whether every interval of ``inner`` lies inside some interval of ``outer``."""
    return all(any(a <= c and d <= b for a, b in outer.intervals) for c, d in inner.intervals)


def nested_intersections(cfg: WalkConfig, schedule: sch.ParamSchedule, M_max: int, include_next: bool = True):
    """``[T_0, ..., T_{M_max}]``; raises if the sequence fails to decrease."""
    out = [nested_intersection(cfg, schedule, M, include_next) for M in range(M_max + 1)]
    for M in range(M_max):
        if not intervals_contained(out[M + 1], out[M]):
            raise AssertionError(f"T_{M + 1} is not contained in T_{M} for seed {cfg.master_seed}")
    return out
