"""Dynamical simple random walk on Z^2.

Each step index ``n`` carries a rate-1 Poisson clock.  At every ring the
step's direction is replaced by a fresh uniform choice among the four unit
vectors, and ``S_n(t)`` is the sum of the first ``n`` step values at time
``t``.  Timelines are derived lazily from :mod:`dynwalk.streams`, so a
``WalkConfig`` is just a seed plus bounds.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import streams
from .errors import InputError

#: Direction codes 0..3 map to these unit vectors (row ``c`` is code ``c``).
DIRS = np.array([(1, 0), (-1, 0), (0, 1), (0, -1)], dtype=np.int64)


@dataclass(frozen=True)
class Direction:
    dx: int
    dy: int

    def __post_init__(self):
        if abs(self.dx) + abs(self.dy) != 1 or abs(self.dx) > 1 or abs(self.dy) > 1:
            raise InputError(f"not a unit lattice step: ({self.dx}, {self.dy})")

    @property
    def code(self) -> int:
        return _CODE_OF[(self.dx, self.dy)]

    @classmethod
    def from_code(cls, code: int) -> "Direction":
        return DIRECTIONS[int(code)]

    def as_tuple(self) -> tuple[int, int]:
        return (self.dx, self.dy)


DIRECTIONS = tuple(Direction(int(dx), int(dy)) for dx, dy in DIRS)
_CODE_OF = {(int(dx), int(dy)): c for c, (dx, dy) in enumerate(DIRS)}


@dataclass(frozen=True)
class StepTimeline:
    """One step's direction over ``[0, horizon]``.

    ``events`` holds ``(time, Direction)`` pairs for the clock rings in
    ``(0, horizon]``; ``initial`` is the value before the first ring.
    """

    index: int
    initial: Direction
    events: tuple[tuple[float, Direction], ...]
    horizon: float

    def __post_init__(self):
        if self.index < 1:
            raise InputError("step indices start at 1")
        prev = 0.0
        for time, _ in self.events:
            if not (prev < time <= self.horizon):
                raise InputError("event times must be strictly increasing within (0, horizon]")
            prev = time

    @property
    def times(self) -> list[float]:
        return [time for time, _ in self.events]

    def to_json(self) -> str:
        return json.dumps(
            {
                "index": self.index,
                "horizon": self.horizon,
                "initial": list(self.initial.as_tuple()),
                "events": [[time, list(d.as_tuple())] for time, d in self.events],
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "StepTimeline":
        doc = json.loads(line)
        return cls(
            index=int(doc["index"]),
            initial=Direction(*doc["initial"]),
            events=tuple((float(time), Direction(*d)) for time, d in doc["events"]),
            horizon=float(doc["horizon"]),
        )


@dataclass(frozen=True)
class WalkConfig:
    master_seed: int = 0
    horizon: float = 1.0
    n_max: int = 10**8

    def __post_init__(self):
        if not self.horizon >= 0:
            raise InputError("horizon must be non-negative")
        if self.n_max < 1:
            raise InputError("n_max must be at least 1")


@dataclass(frozen=True)
class PathView:
    """Positions ``S_0..S_n`` of the walk frozen at time ``t``; ``positions`` has shape (n+1, 2)."""

    t: float
    positions: np.ndarray

    @property
    def n(self) -> int:
        return len(self.positions) - 1


@dataclass(frozen=True)
class ResampleEvent:
    time: float
    step_index: int
    old_value: Direction
    new_value: Direction


def timeline(seed: int, index: int, horizon: float) -> StepTimeline:
    """The clock rings and directions of step ``index`` up to ``horizon``."""
    if horizon < 0:
        raise InputError("horizon must be non-negative")
    if index < 1:
        raise InputError("step indices start at 1")
    base = streams.stream_base(streams.as_seed(seed), index)
    initial = int(streams.to_direction(streams.draw(base, 0)))
    events = []
    time = 0.0
    m = 1
    while True:
        time = time + float(streams.to_exponential(streams.draw(base, 2 * m - 1)))
        if time > horizon:
            break
        code = int(streams.to_direction(streams.draw(base, 2 * m)))
        events.append((time, DIRECTIONS[code]))
        m += 1
    return StepTimeline(index, DIRECTIONS[initial], tuple(events), float(horizon))


def value_at(tl: StepTimeline, t: float) -> Direction:
    if not 0 <= t <= tl.horizon:
        raise InputError(f"t={t} outside [0, {tl.horizon}]")
    value = tl.initial
    for time, d in tl.events:
        if time > t:
            break
        value = d
    return value


def codes_at(seeds, indices, t: float) -> np.ndarray:
    """Direction codes of steps ``indices`` at time ``t`` for each walk seed.

    Returns an int8 array of shape ``(len(seeds), len(indices))``.  This is
    the vectorized form of ``value_at(timeline(seed, i, h), t)`` and agrees
    with it bit for bit: gaps are accumulated in the same order.
    """
    seeds = np.atleast_1d(np.asarray(seeds, dtype=np.uint64))
    indices = np.atleast_1d(np.asarray(indices, dtype=np.uint64))
    base = streams.stream_base(seeds[:, None], indices[None, :])
    codes = streams.to_direction(streams.draw(base, 0))
    if t <= 0 or codes.size == 0:
        return codes
    flat_codes = codes.reshape(-1)
    live = np.arange(flat_codes.size)
    live_base = base.reshape(-1)
    time = np.zeros(flat_codes.size)
    m = 1
    while live.size:
        time = time + streams.to_exponential(streams.draw(live_base, 2 * m - 1))
        rang = time <= t
        live, live_base, time = live[rang], live_base[rang], time[rang]
        flat_codes[live] = streams.to_direction(streams.draw(live_base, 2 * m))
        m += 1
    return codes


def positions_from_codes(codes: np.ndarray, start=(0, 0)) -> np.ndarray:
    """Prefix sums of coded steps; ``codes`` of shape (..., L) give positions (..., L+1, 2)."""
    steps = DIRS[codes]
    out = np.zeros(codes.shape[:-1] + (codes.shape[-1] + 1, 2), dtype=np.int64)
    np.cumsum(steps, axis=-2, out=out[..., 1:, :])
    out += np.asarray(start, dtype=np.int64)[..., None, :]
    return out


def _check_query(cfg: WalkConfig, n: int, t: float):
    if not 0 <= n <= cfg.n_max:
        raise InputError(f"n={n} outside [0, {cfg.n_max}]")
    if not 0 <= t <= cfg.horizon:
        raise InputError(f"t={t} outside [0, {cfg.horizon}]")


def path_view(cfg: WalkConfig, n: int, t: float) -> PathView:
    _check_query(cfg, n, t)
    codes = codes_at([streams.as_seed(cfg.master_seed)], np.arange(1, n + 1), t)[0]
    return PathView(float(t), positions_from_codes(codes))


def position(cfg: WalkConfig, n: int, t: float) -> tuple[int, int]:
    """``S_n(t)``."""
    x, y = path_view(cfg, n, t).positions[-1]
    return int(x), int(y)


def event_arrays(seed: int, n: int, a: float, b: float):
    """Resample events of steps 1..n in ``(a, b]`` as parallel arrays.

    Returns ``(times, indices, old_codes, new_codes)`` sorted by time, ties
    broken by ascending step index.
    """
    idx = np.arange(1, n + 1, dtype=np.uint64)
    base = streams.stream_base(streams.as_seed(seed), idx)
    current = streams.to_direction(streams.draw(base, 0))
    live = np.arange(n)
    time = np.zeros(n)
    out_t, out_i, out_old, out_new = [], [], [], []
    m = 1
    while live.size:
        time = time + streams.to_exponential(streams.draw(base, 2 * m - 1))
        rang = time <= b
        live, base, time, current = live[rang], base[rang], time[rang], current[rang]
        new = streams.to_direction(streams.draw(base, 2 * m))
        keep = time > a
        out_t.append(time[keep])
        out_i.append(live[keep] + 1)
        out_old.append(current[keep])
        out_new.append(new[keep])
        current = new
        m += 1
    if not out_t:
        empty = np.zeros(0)
        return empty, empty.astype(np.int64), empty.astype(np.int8), empty.astype(np.int8)
    times = np.concatenate(out_t)
    indices = np.concatenate(out_i).astype(np.int64)
    order = np.lexsort((indices, times))
    return (
        times[order],
        indices[order],
        np.concatenate(out_old)[order],
        np.concatenate(out_new)[order],
    )


def resample_events(cfg: WalkConfig, n: int, interval: tuple[float, float]) -> list[ResampleEvent]:
    """All clock rings of steps 1..n inside ``(a, b]``, in time order."""
    a, b = interval
    if not 1 <= n <= cfg.n_max:
        raise InputError(f"n={n} outside [1, {cfg.n_max}]")
    if not (0 <= a <= b <= cfg.horizon):
        raise InputError(f"invalid interval [{a}, {b}] for horizon {cfg.horizon}")
    if a == b:
        return []
    times, indices, old, new = event_arrays(cfg.master_seed, n, a, b)
    return [
        ResampleEvent(float(tm), int(i), DIRECTIONS[o], DIRECTIONS[v])
        for tm, i, o, v in zip(times, indices, old, new)
    ]


def timelines(cfg: WalkConfig, indices: Iterable[int]) -> Iterable[StepTimeline]:
    for index in indices:
        yield timeline(cfg.master_seed, index, cfg.horizon)
