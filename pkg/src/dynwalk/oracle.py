"""Exact references: lattice Dirichlet solves and exhaustive path enumeration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np
import pyamg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InputError, ResourceError, SolverError
from .walk import DIRS

RESIDUAL_TOL = 1e-12
N_MIN, N_MAX = 2, 1024
_DIRECT_LIMIT = 60_000  # unknowns; above this use AMG-preconditioned CG
BRUTE_MAX_STEPS = 10
TWO_TIME_MAX_STEPS = 5


@dataclass(frozen=True)
class HitProbField:
    """Probability of reaching ``target`` before leaving ``{|x| < radius}``.

    ``grid[x + radius - 1, y + radius - 1]`` holds the value at ``(x, y)``;
    cells outside the open ball are 0.
    """

    radius: int
    target: frozenset
    grid: np.ndarray = field(repr=False)
    residual: float

    def value(self, x) -> float:
        px, py = int(x[0]), int(x[1])
        if px * px + py * py >= self.radius**2:
            return 0.0
        return float(self.grid[px + self.radius - 1, py + self.radius - 1])

    def items(self) -> Iterable[tuple[int, int, float]]:
        """``(x, y, value)`` for every lattice point in the open ball, row-major."""
        n = self.radius
        for i in range(2 * n - 1):
            x = i - n + 1
            for k in range(2 * n - 1):
                y = k - n + 1
                if x * x + y * y < n * n:
                    yield x, y, float(self.grid[i, k])

    def to_csv(self) -> str:
        lines = ["x,y,value"]
        lines += [f"{x},{y},{v!r}" for x, y, v in self.items()]
        return "\n".join(lines) + "\n"


def _ball(n: int):
    r = np.arange(-n + 1, n)
    X, Y = np.meshgrid(r, r, indexing="ij")
    return X, Y, X * X + Y * Y < n * n


def harmonic_residual(grid: np.ndarray, interior: np.ndarray, target_mask: np.ndarray) -> float:
    """Max ``|v(x) - mean of 4 neighbours|`` over interior non-target cells (exterior counts as 0)."""
    padded = np.pad(np.where(interior, grid, 0.0), 1)
    avg = 0.25 * (padded[2:, 1:-1] + padded[:-2, 1:-1] + padded[1:-1, 2:] + padded[1:-1, :-2])
    free = interior & ~target_mask
    if not free.any():
        return 0.0
    return float(np.abs(grid - avg)[free].max())


def _symmetric(target: frozenset) -> bool:
    """Whether ``target`` is invariant under the eight symmetries of the square lattice."""
    return all(
        (sx * a, sy * b) in target and (sx * b, sy * a) in target
        for a, b in target
        for sx in (1, -1)
        for sy in (1, -1)
    )


def _canonical(x, y):
    ax, ay = np.abs(x), np.abs(y)
    return np.maximum(ax, ay), np.minimum(ax, ay)


def _solve_spd(A, rhs) -> np.ndarray:
    if rhs.size == 0:
        return np.zeros(0)
    if rhs.size <= _DIRECT_LIMIT:
        return spla.spsolve(A.tocsc(), rhs)
    ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric")
    return ml.solve(rhs, tol=1e-14, maxiter=200, accel="cg")


def _operator(cells_x, cells_y, index_of, is_target, inside):
    """``I - P`` restricted to the unknown cells, plus the right-hand side from target neighbours.

    ``index_of(x, y)`` gives the unknown's row (or -1), ``is_target`` and
    ``inside`` are boolean lookups over neighbour coordinates.
    """
    count = cells_x.size
    me = np.arange(count)
    rows, cols = [], []
    rhs = np.zeros(count)
    for dx, dy in DIRS:
        qx, qy = cells_x + dx, cells_y + dy
        ok = inside(qx, qy)
        hit = np.zeros(count, dtype=bool)
        hit[ok] = is_target(qx[ok], qy[ok])
        rhs += 0.25 * hit
        nb = np.full(count, -1)
        free = ok & ~hit
        nb[free] = index_of(qx[free], qy[free])
        rows.append(me[free])
        cols.append(nb[free])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    A = sp.identity(count, format="csr") - sp.csr_matrix((np.full(rows.size, 0.25), (rows, cols)), shape=(count, count))
    return A.tocsr(), rhs


def solve_hit_before_exit(n: int, target=((0, 0),)) -> HitProbField:
    """Solve the discrete Dirichlet problem on the open ball of radius ``n``.

    The value is 1 on ``target``, 0 outside the ball, and equals the mean of
    its four neighbours everywhere else.  A target set invariant under the
    lattice symmetries (such as the origin) is solved on the wedge
    ``0 <= y <= x``; scaling each row by its orbit size keeps the folded
    system symmetric.  The residual is always checked on the full grid.
    """
    if not N_MIN <= n <= N_MAX:
        raise ResourceError(f"radius {n} outside supported range [{N_MIN}, {N_MAX}]")
    target = frozenset((int(a), int(b)) for a, b in target)
    X, Y, inside = _ball(n)
    off = n - 1
    tmask = np.zeros_like(inside)
    for a, b in target:
        if a * a + b * b >= n * n:
            raise InputError(f"target point {(a, b)} is outside the ball")
        tmask[a + off, b + off] = True
    n2 = n * n

    def in_ball(x, y):
        return x * x + y * y < n2

    grid = np.zeros(inside.shape)
    if _symmetric(target):
        wedge = inside & (Y >= 0) & (Y <= X) & ~tmask
        wx, wy = X[wedge], Y[wedge]
        index = np.full((n, n), -1, dtype=np.int64)
        index[wx, wy] = np.arange(wx.size)

        def index_of(x, y):
            return index[_canonical(x, y)]

        def is_target(x, y):
            return tmask[x + off, y + off]

        A, rhs = _operator(wx, wy, index_of, is_target, in_ball)
        orbit = np.where(wx == 0, 1, np.where((wy == 0) | (wy == wx), 4, 8)).astype(float)
        sol = _solve_spd((sp.diags(orbit) @ A).tocsr(), orbit * rhs)
        free = inside & ~tmask
        grid[free] = sol[index_of(X[free], Y[free])]
    else:
        unknown = inside & ~tmask
        full_index = np.full(inside.shape, -1, dtype=np.int64)
        full_index[unknown] = np.arange(int(unknown.sum()))
        A, rhs = _operator(
            X[unknown], Y[unknown],
            lambda x, y: full_index[x + off, y + off],
            lambda x, y: tmask[x + off, y + off],
            in_ball,
        )
        grid[unknown] = _solve_spd(A, rhs)
    grid[tmask] = 1.0
    residual = harmonic_residual(grid, inside, tmask)
    if not residual <= RESIDUAL_TOL:
        raise SolverError(f"residual {residual:.3e} above tolerance {RESIDUAL_TOL:.0e} at n={n}")
    return HitProbField(n, target, grid, residual)


@lru_cache(maxsize=32)
def _origin_field(n: int) -> HitProbField:
    return solve_hit_before_exit(n)


def hit_probability(x, n: int) -> float:
    """Cached origin-target value at ``x``."""
    return _origin_field(n).value(x)


def escape_probability(n: int) -> float:
    """Probability that a walk from (1, 0) leaves the radius-``n`` ball before hitting the origin."""
    return 1.0 - _origin_field(n).value((1, 0))


@dataclass(frozen=True)
class EscapeFit:
    radii: tuple[int, ...]
    slope: float
    intercept: float
    r_squared: float

    @property
    def slope_rel_error(self) -> float:
        return abs(self.slope - 2 / math.pi) / (2 / math.pi)


def fit_escape(radii: Iterable[int]) -> EscapeFit:
    """Least-squares line of ``1/escape_probability(n)`` against ``ln n``."""
    radii = tuple(radii)
    x = np.log(np.array(radii, dtype=float))
    y = np.array([1.0 / escape_probability(n) for n in radii])
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    return EscapeFit(radii, float(slope), float(intercept), 1.0 - ss_res / ss_tot)


@dataclass(frozen=True)
class BandReport:
    n: int
    min_C: float
    worst_point: tuple[int, int]


def lemma31_band_check(n: int, fitted_C: float | None = None) -> BandReport:
    """Smallest C with ``(L - log|x| - C)/L <= v(x) <= (L - log|x| + C)/L`` on ``0 < |x| < n``.

    Logs are base 2 and ``L = log2 n``.  ``fitted_C`` is accepted for
    symmetry with reports that carry a regression intercept; it does not
    change the computation.
    """
    field_ = _origin_field(n)
    X, Y, inside = _ball(n)
    mask = inside & ((X != 0) | (Y != 0))
    L = math.log2(n)
    logx = 0.5 * np.log2((X * X + Y * Y)[mask].astype(float))
    gap = np.abs(field_.grid[mask] * L - (L - logx))
    worst = int(np.argmax(gap))
    return BandReport(n, float(gap[worst]), (int(X[mask][worst]), int(Y[mask][worst])))


def radial_profile(n: int) -> list[float]:
    """Max of the origin-target field over lattice points with ``|x| = r`` exactly, r = 1..n-1."""
    field_ = _origin_field(n)
    X, Y, inside = _ball(n)
    r2 = X * X + Y * Y
    out = []
    for r in range(1, n):
        on = inside & (r2 == r * r)
        out.append(float(field_.grid[on].max()))
    return out


# --- exhaustive enumeration -------------------------------------------------

PathPredicate = Callable[[np.ndarray], np.ndarray]
PairPredicate = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ExactEventProb:
    steps: int
    start: tuple[int, int]
    predicate: str
    count: int

    @property
    def denominator(self) -> int:
        return 4**self.steps

    @property
    def probability(self) -> Fraction:
        return Fraction(self.count, self.denominator)


def all_paths(m: int, start=(0, 0), lo: int = 0, hi: int | None = None) -> np.ndarray:
    """Positions of enumerated paths ``lo..hi-1`` among the 4**m continuations (shape (hi-lo, m+1, 2))."""
    hi = 4**m if hi is None else hi
    ids = np.arange(lo, hi, dtype=np.int64)
    codes = ((ids[:, None] >> (2 * np.arange(m, dtype=np.int64))[None, :]) & 3).astype(np.int8)
    steps = DIRS[codes]
    out = np.zeros((hi - lo, m + 1, 2), dtype=np.int64)
    np.cumsum(steps, axis=1, out=out[:, 1:])
    out += np.asarray(start, dtype=np.int64)
    return out


def _code_table(m: int) -> np.ndarray:
    ids = np.arange(4**m, dtype=np.int64)
    return ((ids[:, None] >> (2 * np.arange(m, dtype=np.int64))[None, :]) & 3).astype(np.int8)


def brute_force(m: int, start, predicate: PathPredicate, name: str = "") -> ExactEventProb:
    """Count the continuations of length ``m`` from ``start`` satisfying ``predicate``.

    ``predicate`` receives a batch of paths (shape (B, m+1, 2)) and returns a
    boolean array of length B.
    """
    if not 0 <= m <= BRUTE_MAX_STEPS:
        raise ResourceError(f"{m} steps exceeds the enumeration budget of {BRUTE_MAX_STEPS}")
    total = 4**m
    chunk = 4**8
    count = 0
    for lo in range(0, total, chunk):
        hi = min(total, lo + chunk)
        count += int(np.count_nonzero(predicate(all_paths(m, start, lo, hi))))
    return ExactEventProb(m, (int(start[0]), int(start[1])), name, count)


@dataclass(frozen=True)
class ExactTwoTimeProb:
    """Exact probability of an event of the walk at times 0 and t.

    Between times 0 and t each step is left alone with probability
    ``e^-t``; otherwise (some ring in ``(0, t]``) its value at t is a fresh
    uniform direction.  Per step, an equal pair of directions then has
    weight ``e^-t/4 + (1 - e^-t)/16`` and an unequal pair
    ``(1 - e^-t)/16``.  ``counts[s]`` is the number of satisfying path pairs
    that agree on exactly ``s`` steps.
    """

    steps: int
    t: float
    counts: tuple[int, ...]

    @property
    def probability(self) -> float:
        q = -math.expm1(-self.t)
        same = (1 - q) / 4 + q / 16
        diff = q / 16
        m = self.steps
        return math.fsum(c * same**s * diff ** (m - s) for s, c in enumerate(self.counts))


def brute_force_two_time(
    m: int,
    start_0,
    start_t,
    t: float,
    predicate: PairPredicate,
) -> ExactTwoTimeProb:
    """Enumerate all ``16**m`` pairs of length-``m`` continuations at times 0 and t."""
    if not 0 <= m <= TWO_TIME_MAX_STEPS:
        raise ResourceError(f"{m} steps exceeds the two-time budget of {TWO_TIME_MAX_STEPS}")
    if t < 0:
        raise InputError("t must be non-negative")
    codes = _code_table(m)
    paths_0 = all_paths(m, start_0)
    paths_t = all_paths(m, start_t)
    n = 4**m
    counts = np.zeros(m + 1, dtype=np.int64)
    rows_per_chunk = max(1, 4**8 // n)
    for lo in range(0, n, rows_per_chunk):
        a = np.arange(lo, min(n, lo + rows_per_chunk))
        ia = np.repeat(a, n)
        ib = np.tile(np.arange(n), a.size)
        ok = np.asarray(predicate(paths_0[ia], paths_t[ib]), dtype=bool)
        same = (codes[ia[ok]] == codes[ib[ok]]).sum(axis=1)
        counts += np.bincount(same, minlength=m + 1)
    return ExactTwoTimeProb(m, float(t), tuple(int(c) for c in counts))


def window_return_probability(n: int, window_start: int) -> float:
    """P(S_m = 0 for some ``window_start <= m <= n``) for simple random walk from the origin.

    Exact dynamic programming over the position distribution, killing mass
    at the origin from step ``window_start`` on.
    """
    if not 0 <= window_start <= n:
        raise InputError("need 0 <= window_start <= n")
    size = 2 * n + 3
    p = np.zeros((size, size))
    c = n + 1
    p[c, c] = 1.0
    hit = 0.0
    for m in range(0, n + 1):
        if m >= window_start:
            hit += p[c, c]
            p[c, c] = 0.0
        if m == n:
            break
        q = np.zeros_like(p)
        q[1:, :] += p[:-1, :]
        q[:-1, :] += p[1:, :]
        q[:, 1:] += p[:, :-1]
        q[:, :-1] += p[:, 1:]
        p = 0.25 * q
    return hit
