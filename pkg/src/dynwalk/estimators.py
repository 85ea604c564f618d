"""Monte Carlo estimators for hitting, segment and two-time events.

Trial ``r`` of an experiment with master seed ``m`` simulates the walk
with seed ``streams.trial_seeds(m, r)``, i.e. exactly the walk that
``WalkConfig(master_seed=int(trial_seeds(m, [r])[0]))`` describes.
Trials are processed in fixed-size blocks; counts are summed, so results
do not depend on the number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np

from . import events, oracle, streams
from . import schedule as sch
from .errors import EstimatorRefused, InputError, ResourceError
from .walk import DIRS, codes_at, positions_from_codes

Z95 = 1.959963984540054
MAX_STEPS_PER_TRIAL = 10**7
_BLOCK_CELLS = 2**21
_MAX_BLOCK = 8192
_ENUMERATE_ANNULUS_UP_TO = 800


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise InputError("trials must be positive")
    p = successes / trials
    denom = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    spread = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - spread)
    hi = 1.0 if successes == trials else min(1.0, center + spread)
    return min(lo, p), max(hi, p)


@dataclass(frozen=True)
class McEstimate:
    trials: int
    successes: int
    estimate: float
    ci_low: float
    ci_high: float
    reference: float | None = None
    z: float | None = None
    label: str = ""

    @classmethod
    def from_counts(cls, successes: int, trials: int, reference: float | None = None, label: str = ""):
        if not 0 <= successes <= trials:
            raise InputError("need 0 <= successes <= trials")
        lo, hi = wilson_interval(successes, trials)
        est = successes / trials
        z = None
        if reference is not None:
            reference = float(reference)
            se = math.sqrt(max(reference * (1 - reference), 0.0) / trials)
            if se > 1e-15:
                z = (est - reference) / se
            else:
                z = 0.0 if abs(est - reference) <= 1e-12 else math.inf
        return cls(trials, successes, est, lo, hi, reference, z, label)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)

    def agrees(self, value: float, factor: float = 3.0) -> bool:
        """``|estimate - value| <= factor * Wilson half-width``."""
        return abs(self.estimate - float(value)) <= factor * self.half_width

    def with_reference(self, reference: float | None) -> "McEstimate":
        return McEstimate.from_counts(self.successes, self.trials, reference, self.label)

    CSV_FIELDS = ("lemma", "params", "trials", "successes", "estimate", "ci_low", "ci_high", "reference", "z")

    def csv_row(self, lemma: str, params: str) -> list:
        return [lemma, params, self.trials, self.successes, repr(self.estimate), repr(self.ci_low),
                repr(self.ci_high), "" if self.reference is None else repr(self.reference),
                "" if self.z is None else repr(self.z)]

    def to_dict(self) -> dict:
        return {
            "label": self.label, "trials": self.trials, "successes": self.successes,
            "estimate": self.estimate, "ci_low": self.ci_low, "ci_high": self.ci_high,
            "reference": self.reference, "z": self.z,
        }


# --- experiment plumbing ----------------------------------------------------


@dataclass(frozen=True)
class ExperimentSpec:
    """What to simulate per trial.

    The step window comes from ``j`` (segment ``M_j`` plus its end point),
    ``k`` (super-segment ``W_k`` through its last G clause), ``M`` (steps
    0..end of ``SE_M``) or ``steps`` (steps 0..steps).  ``start`` chooses
    the position at the window's first step: ``"origin"`` simulates from
    step 0 instead, ``"fixed"`` uses ``start_point`` (default: the point
    ``(inner radius, 0)`` of the conditioning annulus), ``"annulus"`` draws
    uniformly from the conditioning annulus' lattice points.  When ``t`` is
    set, each trial also yields the path at time ``t``.
    """

    lemma: str
    trials: int
    master_seed: int = 0
    schedule: sch.ParamSchedule | None = None
    j: int | None = None
    k: int | None = None
    M: int | None = None
    steps: int | None = None
    t: float | None = None
    start: str = "origin"
    start_point: tuple[int, int] | None = None
    include_next: bool = True
    reference: float | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise InputError("trials must be >= 1")
        if self.start not in ("origin", "fixed", "annulus"):
            raise InputError(f"unknown start mode {self.start!r}")
        if sum(v is not None for v in (self.j, self.k, self.M, self.steps)) != 1:
            raise InputError("give exactly one of j, k, M, steps")
        if self.steps is None and self.schedule is None:
            raise InputError("j, k and M need a schedule")
        if self.t is not None and self.t < 0:
            raise InputError("t must be non-negative")

    def window(self) -> tuple[int, int, int | None]:
        """``(first_step, last_step, conditioning annulus index or None)``."""
        s = self.schedule
        if self.j is not None:
            first, last, ann = s.stop(self.j - 1), s.stop(self.j), self.j - 1
        elif self.k is not None:
            first = s.stop(2**self.k - 1)
            last = sch.se_last_step(s, self.k, self.include_next)
            ann = 2**self.k - 1
        elif self.M is not None:
            first, last, ann = 0, (sch.se_last_step(s, self.M, self.include_next) if self.M else 0), None
        else:
            first, last, ann = 0, self.steps, None
        if self.start == "origin":
            return 0, last, None
        if ann is None and self.start == "annulus":
            raise InputError("annulus start needs a conditioning annulus (segment j >= 2 or super-segment k)")
        if ann == 0:
            raise InputError("annulus A_0 does not exist; use start='origin' for segment 1")
        return first, last, ann

    def fixed_point(self, ann: int | None) -> tuple[int, int]:
        if self.start_point is not None:
            p = (int(self.start_point[0]), int(self.start_point[1]))
            if ann is not None and not sch.annulus_contains(self.schedule, ann, p):
                raise InputError(f"start {p} is not in annulus A_{ann}")
            return p
        if ann is None:
            raise InputError("fixed start without an annulus needs start_point")
        return (self.schedule.inner_radius(ann), 0)


@dataclass(frozen=True)
class TrialBatch:
    trial_ids: np.ndarray
    seeds: np.ndarray
    step0: int
    paths_0: np.ndarray
    paths_t: np.ndarray | None
    t: float | None

    def __len__(self):
        return len(self.trial_ids)


@lru_cache(maxsize=16)
def _annulus_points(inner: int, outer: int) -> np.ndarray:
    r = np.arange(-outer, outer + 1)
    X, Y = np.meshgrid(r, r, indexing="ij")
    r2 = X * X + Y * Y
    keep = (r2 >= inner * inner) & (r2 <= outer * outer)
    return np.stack([X[keep], Y[keep]], axis=1)


def sample_annulus(seeds: np.ndarray, inner: int, outer: int, slot: int) -> np.ndarray:
    """Uniform lattice points of ``{inner <= |x| <= outer}``, one per seed.

    Draws come from stream index 0 of each seed; ``slot`` separates
    independent samples (e.g. the time-0 and time-t start points).
    """
    base = streams.stream_base(seeds, 0)
    if outer <= _ENUMERATE_ANNULUS_UP_TO:
        pts = _annulus_points(inner, outer)
        u = streams.to_unit(streams.draw(base, slot))
        pick = np.minimum((u * len(pts)).astype(np.int64), len(pts) - 1)
        return pts[pick]
    out = np.zeros((len(seeds), 2), dtype=np.int64)
    todo = np.arange(len(seeds))
    attempt = 0
    width = 2 * outer + 1
    lo2, hi2 = inner * inner, outer * outer
    while todo.size:
        b = base[todo]
        c = 1000 + 4 * attempt + 2 * slot
        x = (streams.to_unit(streams.draw(b, c)) * width).astype(np.int64) - outer
        y = (streams.to_unit(streams.draw(b, c + 1)) * width).astype(np.int64) - outer
        r2 = x * x + y * y
        ok = (r2 >= lo2) & (r2 <= hi2)
        out[todo[ok], 0] = x[ok]
        out[todo[ok], 1] = y[ok]
        todo = todo[~ok]
        attempt += 1
    return out


def _starts(spec: ExperimentSpec, seeds: np.ndarray, ann: int | None, slot: int) -> np.ndarray:
    if spec.start == "origin":
        return np.zeros((len(seeds), 2), dtype=np.int64)
    if spec.start == "fixed":
        return np.tile(np.array(spec.fixed_point(ann), dtype=np.int64), (len(seeds), 1))
    s = spec.schedule
    return sample_annulus(seeds, s.inner_radius(ann), s.outer_radius(ann), slot)


def _make_batch(spec: ExperimentSpec, lo: int, hi: int) -> TrialBatch:
    first, last, ann = spec.window()
    ids = np.arange(lo, hi)
    seeds = streams.trial_seeds(spec.master_seed, ids)
    idx = np.arange(first + 1, last + 1)
    paths_0 = positions_from_codes(codes_at(seeds, idx, 0.0), _starts(spec, seeds, ann, 0))
    paths_t = None
    if spec.t is not None:
        paths_t = positions_from_codes(codes_at(seeds, idx, spec.t), _starts(spec, seeds, ann, 1))
    return TrialBatch(ids, seeds, first, paths_0, paths_t, spec.t)


def _blocks(trials: int, length: int):
    size = int(min(_MAX_BLOCK, max(1, _BLOCK_CELLS // (length + 1))))
    return [(lo, min(trials, lo + size)) for lo in range(0, trials, size)]


def run_counts(spec: ExperimentSpec, evaluate: Callable[[TrialBatch], dict], workers: int = 1) -> dict:
    """Sum per-trial boolean outcomes over all trials of ``spec``."""
    first, last, _ = spec.window()
    if last - first > MAX_STEPS_PER_TRIAL:
        raise ResourceError(f"{last - first} steps per trial exceeds {MAX_STEPS_PER_TRIAL}")

    def one(bounds):
        flags = evaluate(_make_batch(spec, *bounds))
        return {key: int(np.count_nonzero(val)) for key, val in flags.items()}

    blocks = _blocks(spec.trials, last - first)
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, blocks))
    else:
        parts = [one(b) for b in blocks]
    total: dict = {}
    for part in parts:
        for key, val in part.items():
            total[key] = total.get(key, 0) + val
    return total


def estimate_event(spec: ExperimentSpec, detector: Callable[[TrialBatch], np.ndarray], workers: int = 1) -> McEstimate:
    """Fraction of trials on which ``detector`` (batch -> bool array) fires."""
    counts = run_counts(spec, lambda batch: {"hit": detector(batch)}, workers)
    return McEstimate.from_counts(counts.get("hit", 0), spec.trials, spec.reference, spec.lemma)


# --- single-time hitting ----------------------------------------------------


def estimate_hit_before_exit(x, n: int, trials: int, master_seed: int = 0) -> McEstimate:
    """P(walk from ``x`` reaches the origin before ``|S| >= n``), with the Dirichlet value as reference."""
    px, py = int(x[0]), int(x[1])
    r2 = px * px + py * py
    if not 0 < r2 < n * n:
        raise InputError(f"need 0 < |x| < n, got x={x}, n={n}")
    reference = oracle.hit_probability((px, py), n)
    hits = 0
    n2 = n * n
    for lo in range(0, trials, 1 << 16):
        ids = np.arange(lo, min(trials, lo + (1 << 16)))
        seeds = streams.trial_seeds(master_seed, ids)
        pos = np.tile(np.array([px, py], dtype=np.int64), (len(ids), 1))
        step = 1
        while seeds.size:
            code = streams.to_direction(streams.draw(streams.stream_base(seeds, step), 0))
            pos += DIRS[code]
            d2 = pos[:, 0] ** 2 + pos[:, 1] ** 2
            home = d2 == 0
            hits += int(home.sum())
            alive = ~home & (d2 < n2)
            seeds, pos = seeds[alive], pos[alive]
            step += 1
    return McEstimate.from_counts(hits, trials, reference, f"hit-before-exit x={px},{py} n={n}")


def estimate_max_excursion(n: int, m: float, trials: int, master_seed: int = 0) -> McEstimate:
    """P(some ``n' < n`` has ``|S_n'| > m sqrt(n)``)."""
    bound2 = m * m * n

    def excursion(batch):
        pts = batch.paths_0
        return ((pts[..., 0] ** 2 + pts[..., 1] ** 2) > bound2).any(axis=1)

    spec = ExperimentSpec("max-excursion", trials, master_seed, steps=max(n - 1, 0))
    return replace(estimate_event(spec, excursion), label=f"max-excursion n={n} m={m}")


def estimate_disc_hit(N: int, M: int, trials: int, master_seed: int = 0) -> McEstimate:
    """P(walk started at ``(M, 0)`` has ``|S| <= 1`` at some step in ``(0, N)``)."""

    def disc(batch):
        pts = batch.paths_0[:, 1:]
        return ((pts[..., 0] ** 2 + pts[..., 1] ** 2) <= 1).any(axis=1)

    spec = ExperimentSpec("disc-hit", trials, master_seed, steps=max(N - 1, 0),
                          start="fixed", start_point=(M, 0))
    return replace(estimate_event(spec, disc), label=f"disc-hit N={N} M={M}")


# --- segment lemmas ---------------------------------------------------------


@dataclass(frozen=True)
class SegmentLemmaReport:
    j: int
    R: McEstimate
    SR: McEstimate
    G: McEstimate


def _segment_evaluator(schedule, j):
    def evaluate(batch):
        hit_d, hit_o, g = events.segment_flags(batch.paths_0, batch.step0, schedule, j)
        return {"R": hit_d, "SR": hit_d & ~hit_o, "G": g}

    return evaluate


def exact_segment_events(schedule, j: int, start, origin_start: bool = False) -> dict:
    """Exhaustive R/SR/G probabilities for segment ``j`` (window length <= 10)."""
    first = 0 if origin_start else schedule.stop(j - 1)
    m = schedule.stop(j) - first
    out = {}
    for name in ("R", "SR", "G"):
        def pred(paths, name=name):
            hit_d, hit_o, g = events.segment_flags(paths, first, schedule, j)
            return {"R": hit_d, "SR": hit_d & ~hit_o, "G": g}[name]

        out[name] = oracle.brute_force(m, start, pred, name).probability
    return out


def estimate_segment_lemmas(
    schedule: sch.ParamSchedule,
    j: int,
    trials: int,
    master_seed: int = 0,
    start: str = "fixed",
    start_point=None,
    workers: int = 1,
) -> SegmentLemmaReport:
    """R_j, SR_j and G_j frequencies for walks entering segment ``j`` at the given start.

    Exact references are attached when the window is short enough to
    enumerate (at most 10 steps) and the start is deterministic.
    """
    spec = ExperimentSpec(f"segment j={j}", trials, master_seed, schedule, j=j,
                          start=start, start_point=start_point)
    counts = run_counts(spec, _segment_evaluator(schedule, j), workers)
    first, last, ann = spec.window()
    refs = {}
    if start != "annulus" and last - first <= oracle.BRUTE_MAX_STEPS:
        point = (0, 0) if start == "origin" else spec.fixed_point(ann)
        refs = {k: float(v) for k, v in exact_segment_events(schedule, j, point, start == "origin").items()}
    return SegmentLemmaReport(
        j,
        *(McEstimate.from_counts(counts[name], trials, refs.get(name), f"{name}_{j}") for name in ("R", "SR", "G")),
    )


# --- two-time estimates -----------------------------------------------------


@dataclass(frozen=True)
class JointEvent:
    name: str
    marginal_0: McEstimate
    marginal_t: McEstimate
    joint: McEstimate
    ratio: float
    ratio_low: float
    ratio_high: float


@dataclass(frozen=True)
class JointReport:
    t: float
    events: dict = field(default_factory=dict)


def correlation_ratio(n_a: int, n_b: int, n_ab: int, trials: int) -> tuple[float, float, float]:
    """``p_ab / (p_a p_b)`` with a log-scale delta-method 95% interval."""
    if min(n_a, n_b, n_ab) == 0:
        ratio = 0.0 if n_a and n_b else math.nan
        return ratio, 0.0, math.inf
    pa, pb, pab = n_a / trials, n_b / trials, n_ab / trials
    ratio = pab / (pa * pb)
    var = (1 - pab) / pab - (1 - pa) / pa - (1 - pb) / pb + 2 * pab / (pa * pb) - 2
    sd = math.sqrt(max(var, 0.0) / trials)
    return ratio, ratio * math.exp(-Z95 * sd), ratio * math.exp(Z95 * sd)


def _joint_evaluator(schedule, j=None, k=None, include_next=True):
    def evaluate(batch):
        out = {}
        if j is not None:
            for tag, paths in (("0", batch.paths_0), ("t", batch.paths_t)):
                hit_d, hit_o, _ = events.segment_flags(paths, batch.step0, schedule, j)
                out["R" + tag] = hit_d
                out["SR" + tag] = hit_d & ~hit_o
            names = ("R", "SR")
        else:
            for tag, paths in (("0", batch.paths_0), ("t", batch.paths_t)):
                out["SE" + tag] = events.se_flags(paths, batch.step0, schedule, k, include_next)[0]
            names = ("SE",)
        for name in names:
            out[name + "J"] = out[name + "0"] & out[name + "t"]
        return out

    return evaluate


def exact_joint_events(schedule, t: float, j=None, k=None, start_0=(0, 0), start_t=(0, 0),
                       origin_start=False, include_next=True) -> dict:
    """Exhaustive two-time probabilities (window of at most 5 steps); maps name -> (p0, pt, joint)."""
    if j is not None:
        first, last = schedule.stop(j - 1), schedule.stop(j)
    else:
        first, last = schedule.stop(2**k - 1), sch.se_last_step(schedule, k, include_next)
    if origin_start:
        first = 0
    m = last - first

    def flags(paths):
        if j is not None:
            hit_d, hit_o, _ = events.segment_flags(paths, first, schedule, j)
            return {"R": hit_d, "SR": hit_d & ~hit_o}
        return {"SE": events.se_flags(paths, first, schedule, k, include_next)[0]}

    names = ("R", "SR") if j is not None else ("SE",)
    out = {}
    for name in names:
        joint = oracle.brute_force_two_time(m, start_0, start_t, t, lambda a, b: flags(a)[name] & flags(b)[name])
        p0 = oracle.brute_force(m, start_0, lambda a: flags(a)[name]).probability
        pt = oracle.brute_force(m, start_t, lambda a: flags(a)[name]).probability
        out[name] = (float(p0), float(pt), joint.probability)
    return out


def estimate_joint(
    schedule: sch.ParamSchedule,
    t: float,
    trials: int,
    j: int | None = None,
    k: int | None = None,
    master_seed: int = 0,
    start: str = "fixed",
    start_point=None,
    include_next: bool = True,
    workers: int = 1,
) -> JointReport:
    """Marginal and joint frequencies of R_j/SR_j (or SE_k) at times 0 and t from one clocked walk."""
    if (j is None) == (k is None):
        raise InputError("give exactly one of j or k")
    spec = ExperimentSpec(f"joint t={t}", trials, master_seed, schedule, j=j, k=k, t=t,
                          start=start, start_point=start_point, include_next=include_next)
    counts = run_counts(spec, _joint_evaluator(schedule, j, k, include_next), workers)
    first, last, ann = spec.window()
    refs = {}
    if start != "annulus" and last - first <= oracle.TWO_TIME_MAX_STEPS:
        point = (0, 0) if start == "origin" else spec.fixed_point(ann)
        refs = exact_joint_events(schedule, t, j, k, point, point, start == "origin", include_next)
    report = JointReport(float(t))
    for name in (("R", "SR") if j is not None else ("SE",)):
        n0, nt, nj = counts[name + "0"], counts[name + "t"], counts[name + "J"]
        r0, rt, rj = refs.get(name, (None, None, None))
        ratio, lo, hi = correlation_ratio(n0, nt, nj, trials)
        report.events[name] = JointEvent(
            name,
            McEstimate.from_counts(n0, trials, r0, f"{name}(0)"),
            McEstimate.from_counts(nt, trials, rt, f"{name}(t)"),
            McEstimate.from_counts(nj, trials, rj, f"{name}(0,t)"),
            ratio, lo, hi,
        )
    return report


# --- resampling decorrelation ----------------------------------------------


@dataclass(frozen=True)
class DecorrelationReport:
    n: int
    window_start: int
    resampled: int
    fixed_path_hits: bool
    conditional: McEstimate
    unconditional: McEstimate


def _window_hits(positions: np.ndarray, window_start: int) -> np.ndarray:
    w = positions[:, window_start:]
    return ((w[..., 0] == 0) & (w[..., 1] == 0)).any(axis=1)


_DECOR_TAG = 0xDEC0
_UNCOND_TAG = 0x0C0D


def estimate_resample_decorrelation(
    n: int,
    window_start: int,
    resampled_set_size: int,
    trials: int,
    path_seed: int = 0,
    master_seed: int = 0,
) -> DecorrelationReport:
    """Return probability in steps ``window_start..n`` after re-randomizing part of a fixed path.

    The time-0 path (steps 1..n) is fixed by ``path_seed``.  Each trial picks
    a uniform subset of ``resampled_set_size`` step indices and redraws
    them.  The unconditional estimate runs fresh walks; its reference is
    the exact probability from dynamic programming.
    """
    if not 0 <= resampled_set_size <= n:
        raise InputError("need 0 <= resampled_set_size <= n")
    if not 0 <= window_start <= n:
        raise InputError("need 0 <= window_start <= n")
    fixed = codes_at([streams.as_seed(path_seed)], np.arange(1, n + 1), 0.0)[0]
    fixed_hit = bool(_window_hits(positions_from_codes(fixed)[None], window_start)[0])
    exact = oracle.window_return_probability(n, window_start)
    hits = 0
    uncond = 0
    decor_master = streams.derive(master_seed, _DECOR_TAG)
    uncond_master = streams.derive(master_seed, _UNCOND_TAG)
    idx = np.arange(1, n + 1)
    for lo, hi in _blocks(trials, n):
        ids = np.arange(lo, hi)
        base = streams.stream_base(streams.trial_seeds(decor_master, ids)[:, None], idx[None, :])
        ranks = streams.draw(base, 1)
        chosen = np.argsort(ranks, axis=1, kind="stable")[:, :resampled_set_size]
        mask = np.zeros((len(ids), n), dtype=bool)
        np.put_along_axis(mask, chosen, True, axis=1)
        codes = np.where(mask, streams.to_direction(streams.draw(base, 0)), fixed[None, :])
        hits += int(_window_hits(positions_from_codes(codes), window_start).sum())
        fresh = codes_at(streams.trial_seeds(uncond_master, ids), idx, 0.0)
        uncond += int(_window_hits(positions_from_codes(fresh), window_start).sum())
    label = f"return n={n} window={window_start} resampled={resampled_set_size}"
    return DecorrelationReport(
        n, window_start, resampled_set_size, fixed_hit,
        McEstimate.from_counts(hits, trials, None, "conditional " + label),
        McEstimate.from_counts(uncond, trials, exact, "unconditional " + label),
    )


def decorrelation_trend(
    n: int, window_start: int, sizes, paths: int = 20, trials: int = 2000, master_seed: int = 0
) -> dict:
    """Mean over ``paths`` fixed paths of ``|conditional - exact unconditional|`` per subset size."""
    exact = oracle.window_return_probability(n, window_start)
    out = {}
    for size in sizes:
        gaps = []
        for p in range(paths):
            rep = estimate_resample_decorrelation(
                n, window_start, size, trials, path_seed=streams.derive(master_seed, p), master_seed=master_seed + p
            )
            gaps.append(abs(rep.conditional.estimate - exact))
        out[size] = float(np.mean(gaps))
    return out


# --- second-moment ratio -----------------------------------------------------


@dataclass(frozen=True)
class FmtRatio:
    M: int
    t: float
    ratio: float
    ci_low: float
    ci_high: float
    joint: McEstimate
    marginal: McEstimate


def estimate_fmt_ratio(
    schedule: sch.ParamSchedule,
    M: int,
    t: float,
    trials: int,
    master_seed: int = 0,
    include_next: bool = True,
    floor: float = 1e-3,
    workers: int = 1,
) -> FmtRatio:
    """``P(E_M(0) & E_M(t)) / P(E_M(0))**2`` where ``E_M = SE_1 & ... & SE_M``.

    Refuses when the estimated ``P(E_M(0))`` is below ``floor``.  The
    interval uses the delta method on the log ratio, for which the
    variance reduces to ``(1 - p_joint) / (p_joint * trials)``.
    """
    spec = ExperimentSpec(f"fmt M={M}", trials, master_seed, schedule, M=M, t=t, include_next=include_next)

    def evaluate(batch):
        e0 = events.intersection_flags(batch.paths_0, 0, schedule, M, include_next)
        et = events.intersection_flags(batch.paths_t, 0, schedule, M, include_next)
        return {"E0": e0, "EJ": e0 & et}

    counts = run_counts(spec, evaluate, workers)
    marginal = McEstimate.from_counts(counts["E0"], trials, None, f"E_{M}(0)")
    joint = McEstimate.from_counts(counts["EJ"], trials, None, f"E_{M}(0,t)")
    if marginal.estimate < floor:
        raise EstimatorRefused(
            f"P(E_{M}(0)) estimated at {marginal.estimate:.2e} ({marginal.successes}/{trials}), "
            f"below the floor {floor:.0e}"
        )
    p0, pj = marginal.estimate, joint.estimate
    if pj == 0:
        return FmtRatio(M, float(t), 0.0, 0.0, math.inf, joint, marginal)
    ratio = pj / (p0 * p0)
    sd = math.sqrt((1 - pj) / (pj * trials))
    return FmtRatio(M, float(t), ratio, ratio * math.exp(-Z95 * sd), ratio * math.exp(Z95 * sd), joint, marginal)
