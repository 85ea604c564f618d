"""Stopping times, segments, super-segments and annuli.

The stopping times ``s_k = k**10 * 2**(2 k**2)`` outgrow 64 bits at k = 5,
so schedules hold Python integers throughout.  A desk schedule is any
user-supplied sequence with the same structure, small enough to simulate.

Indexing: ``s_0 = 0`` is implicit; stored values are ``s_1..s_kmax`` and
segment ``j`` (1 <= j <= kmax) is the half-open step range
``[s_{j-1}, s_j)``.  Annulus ``A_k`` exists for 1 <= k <= kmax.
"""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from .errors import InputError, ScheduleError


@dataclass(frozen=True)
class ParamSchedule:
    s: tuple[int, ...]
    inner: tuple[int, ...]
    outer: tuple[int, ...]
    kind: str = field(default="desk", compare=False)

    def __post_init__(self):
        if not self.s:
            raise ScheduleError("schedule needs at least one stopping time")
        if not (len(self.s) == len(self.inner) == len(self.outer)):
            raise ScheduleError("s, inner and outer must have equal length")
        if self.s[0] < 1:
            raise ScheduleError("s_1 must be >= 1")
        for a, b in zip(self.s, self.s[1:]):
            if b <= a:
                raise ScheduleError(f"stopping times must be strictly increasing ({a} then {b})")
        for k, (lo, hi) in enumerate(zip(self.inner, self.outer), start=1):
            if not 1 <= lo <= hi:
                raise ScheduleError(f"annulus {k}: need 1 <= inner ({lo}) <= outer ({hi})")

    @property
    def k_max(self) -> int:
        return len(self.s)

    def stop(self, k: int) -> int:
        """``s_k``; ``s_0`` is 0."""
        if k == 0:
            return 0
        self._check_k(k)
        return self.s[k - 1]

    def inner_radius(self, k: int) -> int:
        self._check_k(k)
        return self.inner[k - 1]

    def outer_radius(self, k: int) -> int:
        self._check_k(k)
        return self.outer[k - 1]

    def segment(self, j: int) -> range:
        """The step indices of ``M_j``."""
        self._check_k(j)
        return range(self.stop(j - 1), self.stop(j))

    def super_segment(self, k: int) -> range:
        """The segment indices ``j`` making up ``W_k``: ``2**k <= j < 2**(k+1)``."""
        if k < 1:
            raise InputError("super-segments start at k = 1")
        return range(2**k, 2 ** (k + 1))

    def _check_k(self, k: int):
        if not 1 <= k <= self.k_max:
            raise IndexError(f"index {k} outside schedule range 1..{self.k_max}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "s": [str(v) for v in self.s],
                "inner": [str(v) for v in self.inner],
                "outer": [str(v) for v in self.outer],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ParamSchedule":
        doc = json.loads(text)
        return cls(
            s=tuple(int(v) for v in doc["s"]),
            inner=tuple(int(v) for v in doc["inner"]),
            outer=tuple(int(v) for v in doc["outer"]),
            kind=doc.get("kind", "desk"),
        )


def paper_schedule(k_max: int) -> ParamSchedule:
    """``s_k = k^10 2^(2k^2)``, ``A_k = {2^(k^2) <= |x| <= k^10 2^(2k^2)}`` for k <= k_max."""
    if k_max < 1:
        raise InputError("k_max must be >= 1")
    ks = range(1, k_max + 1)
    s = tuple(k**10 * 2 ** (2 * k * k) for k in ks)
    inner = tuple(2 ** (k * k) for k in ks)
    return ParamSchedule(s=s, inner=inner, outer=s, kind="paper")


def desk_schedule(
    s: Sequence[int],
    inner: Sequence[int] | None = None,
    outer: Sequence[int] | None = None,
) -> ParamSchedule:
    """A validated desk-scale schedule.

    ``outer`` defaults to ``s`` (annuli ending at the boundary radius) and ``inner``
    defaults to 1, i.e. ``G_k`` only excludes ending at the origin.
    """
    s = tuple(int(v) for v in s)
    inner = tuple(int(v) for v in inner) if inner is not None else (1,) * len(s)
    outer = tuple(int(v) for v in outer) if outer is not None else s
    return ParamSchedule(s=s, inner=inner, outer=outer, kind="desk")


def geometric_schedule(first: int, ratio: float, k_max: int, inner_exponent: float = 0.5) -> ParamSchedule:
    """Desk schedule with ``s_k = round(first * ratio**(k-1))`` and ``inner_k = max(1, floor(s_k**inner_exponent))``."""
    s = []
    for k in range(1, k_max + 1):
        value = max(int(round(first * ratio ** (k - 1))), s[-1] + 1 if s else 1)
        s.append(value)
    inner = [max(1, math.floor(v**inner_exponent)) for v in s]
    inner = [min(lo, hi) for lo, hi in zip(inner, s)]
    return desk_schedule(s, inner)


def segment_of(schedule: ParamSchedule, step: int) -> int:
    """The ``j`` with ``s_{j-1} <= step < s_j``."""
    if not 0 <= step < schedule.s[-1]:
        raise IndexError(f"step {step} outside [0, {schedule.s[-1]})")
    return bisect.bisect_right(schedule.s, step) + 1


def se_range(k: int, include_next: bool = True) -> range:
    """Indices of the G (and avoided-R) clauses of ``SE_k``.

    Read literally, those intersections run to ``2**(k+1)`` inclusive;
    ``include_next=False`` stops at ``2**(k+1) - 1`` like the SR clause.
    """
    upper = 2 ** (k + 1) if include_next else 2 ** (k + 1) - 1
    return range(2**k, upper + 1)


def se_last_step(schedule: ParamSchedule, k: int, include_next: bool = True) -> int:
    """The last step index a path must cover to decide ``SE_k``."""
    return schedule.stop(se_range(k, include_next)[-1])


@lru_cache(maxsize=64)
def beta(k: int) -> Fraction:
    """``prod_{2^k <= j < 2^(k+1)} (1 - 2/j)`` as an exact rational."""
    if k < 1:
        raise InputError("beta is defined for k >= 1")
    out = Fraction(1)
    for j in range(2**k, 2 ** (k + 1)):
        out *= 1 - Fraction(2, j)
    return out


def beta_closed(k: int) -> Fraction:
    a = 2**k
    return Fraction((a - 1) * (a - 2), (2 * a - 1) * (2 * a - 2))


def se_main_term(k: int) -> float:
    """``pi * beta_k * sum_{j in W_k} j^-3``, the leading term of the SE_k lower bound."""
    tail = sum(Fraction(1, j**3) for j in range(2**k, 2 ** (k + 1)))
    return math.pi * float(beta(k) * tail)


def _smallest_integer_above(x: float) -> int:
    return math.floor(x) + 1


def k_of_t(t: float) -> int:
    """Smallest integer strictly greater than ``|log2 t| + 1``."""
    if not 0 < t < 1:
        raise InputError("t must lie in (0, 1)")
    return _smallest_integer_above(abs(math.log2(t)) + 1)


def k_prime_of_t(t: float) -> int:
    """Smallest integer strictly greater than ``log2(|log2 t| + 1) + 1``."""
    if not 0 < t < 1:
        raise InputError("t must lie in (0, 1)")
    return _smallest_integer_above(math.log2(abs(math.log2(t)) + 1) + 1)


def annulus_contains(schedule: ParamSchedule, k: int, x) -> bool:
    r2 = int(x[0]) ** 2 + int(x[1]) ** 2
    return schedule.inner_radius(k) ** 2 <= r2 <= schedule.outer_radius(k) ** 2


def annulus_bounds_sq(schedule: ParamSchedule, k: int, cap: int = 2**62) -> tuple[int, int]:
    """Squared radii of ``A_k`` clipped to ``cap`` for comparison against int64 arrays.

    Clipping is exact as long as every compared |x|^2 is below ``cap``.
    """
    lo = schedule.inner_radius(k) ** 2
    hi = schedule.outer_radius(k) ** 2
    return min(lo, cap), min(hi, cap)
