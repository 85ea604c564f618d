"""Command-line front end: ``dynwalk <command> [options]``.

Every output starts with a provenance record (package version, seed,
trials, and a hash of the resolved configuration). CSV output carries it
as ``#`` comment lines and JSON output as a ``provenance`` key.  Exit
codes: 2 usage or input error, 3 numerical failure or refused estimate,
4 resource cap.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, estimators, oracle, search
from . import schedule as sch
from .errors import EstimatorRefused, InputError, PredicateError, ResourceError, ScheduleError, SolverError
from .walk import WalkConfig, timeline

EXIT_USAGE, EXIT_NUMERIC, EXIT_RESOURCE = 2, 3, 4

# Fallbacks for options left unset on the command line and in --config.
DEFAULTS = {
    "trials": 10_000,
    "start": "fixed",
    "horizon": 1.0,
    "seeds": 1,
    "pred": "true",
    "n": None,
    "m0": 0,
    "h": 1,
    "M": 1,
    "window": 0,
    "floor": 1e-3,
    "ngrid": "8:48:8",
    "L": "odd-rows",
    "nmax": 512,
    "format": "csv",
    "workers": 1,
}
_NOT_HASHED = {"workers", "output", "config", "func"}


class Table:
    """One CSV block / JSON list of records."""

    def __init__(self, name: str, header, rows):
        self.name = name
        self.header = list(header)
        self.rows = [list(r) for r in rows]

    def records(self):
        return [dict(zip(self.header, r)) for r in self.rows]


def _point(text: str) -> tuple[int, int]:
    try:
        x, y = text.split(",")
        return int(x), int(y)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected x,y, got {text!r}") from exc


def _load_schedule(source: str | None) -> sch.ParamSchedule:
    if source is None:
        raise InputError("this command needs --schedule (paper:K or a JSON file)")
    if source.startswith("paper:"):
        return sch.paper_schedule(int(source.split(":", 1)[1]))
    return sch.ParamSchedule.from_json(Path(source).read_text())


def _jsonable(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, Fraction):
        return str(value)
    return value


def _render(args, tables: list[Table]) -> str:
    prov = provenance(args)
    if args.format == "json":
        doc = {"provenance": prov, "tables": {t.name: t.records() for t in tables}}
        return json.dumps(doc, default=_jsonable, indent=1) + "\n"
    buf = io.StringIO()
    buf.write(f"# dynwalk {prov['version']} command={prov['command']}\n")
    buf.write(f"# seed={prov['seed']} trials={prov['trials']} config_sha256={prov['config_sha256']}\n")
    writer = csv.writer(buf, lineterminator="\n")
    for i, table in enumerate(tables):
        if i:
            buf.write("\n")
        buf.write(f"# table={table.name}\n")
        writer.writerow(table.header)
        writer.writerows([[_fmt(v) for v in row] for row in table.rows])
    return buf.getvalue()


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return _jsonable(value)


def resolved_config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_HASHED}


def provenance(args) -> dict:
    cfg = resolved_config(args)
    digest = hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()
    return {
        "version": __version__,
        "command": args.command,
        "seed": args.seed,
        "trials": getattr(args, "trials", None),
        "config_sha256": digest[:16],
    }


# --- commands ---------------------------------------------------------------


def cmd_schedule(args) -> list[Table]:
    tables = []
    if args.paper or args.desk:
        if args.paper:
            if args.kmax is None or not 1 <= args.kmax <= 16:
                raise InputError("--paper needs 1 <= --kmax <= 16")
            s = sch.paper_schedule(args.kmax)
        else:
            s = _load_schedule(args.desk)
        rows = [(k, str(s.stop(k)), str(s.inner_radius(k)), str(s.outer_radius(k))) for k in range(1, s.k_max + 1)]
        tables.append(Table("schedule", ("k", "s_k", "inner", "outer"), rows))
    if args.beta:
        rows = []
        for k in args.beta:
            if k < 1:
                raise InputError("--beta needs k >= 1")
            b = sch.beta(k)
            rows.append((k, str(b), float(b)))
        tables.append(Table("beta", ("k", "beta", "beta_decimal"), rows))
    if args.K:
        tables.append(Table("K", ("t", "K", "K_prime"), [(t, sch.k_of_t(t), sch.k_prime_of_t(t)) for t in args.K]))
    if not tables:
        raise InputError("schedule: give --paper/--desk, --beta or --K")
    return tables


def cmd_oracle(args) -> list[Table]:
    tables = []
    if args.query:
        if args.n is None:
            raise InputError("--query needs --n")
        field_ = oracle.solve_hit_before_exit(args.n)
        tables.append(Table("hit_probability", ("n", "x", "y", "value", "residual"),
                            [(args.n, x, y, field_.value((x, y)), field_.residual) for x, y in args.query]))
    if args.field:
        if args.n is None:
            raise InputError("--field needs --n")
        field_ = oracle.solve_hit_before_exit(args.n)
        tables.append(Table("field", ("x", "y", "value"), list(field_.items())))
    if args.fit_escape:
        radii = [2**e for e in range(3, 64) if 2**e <= args.nmax]
        fit = oracle.fit_escape(radii)
        tables.append(Table("escape_fit", ("radii", "slope", "intercept", "r2", "slope_rel_error"),
                            [(" ".join(map(str, radii)), fit.slope, fit.intercept, fit.r_squared, fit.slope_rel_error)]))
        tables.append(Table("escape", ("n", "escape_probability"),
                            [(n, oracle.escape_probability(n)) for n in radii]))
    if args.band:
        rows = []
        for n in args.band:
            rep = oracle.lemma31_band_check(n)
            rows.append((n, rep.min_C))
        tables.append(Table("band", ("n", "min_C"), rows))
    if not tables:
        raise InputError("oracle: give --query, --field, --fit-escape or --band")
    return tables


def _estimate_rows(items) -> Table:
    return Table("estimates", estimators.McEstimate.CSV_FIELDS, [est.csv_row(lemma, params) for lemma, params, est in items])


def cmd_estimate(args) -> list[Table]:
    lemma, trials, seed = args.lemma, args.trials, args.seed
    if lemma == "hit-before-exit":
        if args.x is None or args.n is None:
            raise InputError("hit-before-exit needs --x and --n")
        est = estimators.estimate_hit_before_exit(args.x, args.n, trials, seed)
        return [_estimate_rows([(lemma, f"x={args.x[0]},{args.x[1]} n={args.n}", est)])]
    if lemma == "segment":
        s = _load_schedule(args.schedule)
        rep = estimators.estimate_segment_lemmas(s, args.j, trials, seed, args.start, args.x, args.workers)
        return [_estimate_rows([(name, f"j={args.j} start={args.start}", getattr(rep, name)) for name in ("R", "SR", "G")])]
    if lemma == "joint":
        s = _load_schedule(args.schedule)
        rep = estimators.estimate_joint(s, args.t, trials, j=args.j, k=args.k, master_seed=seed,
                                        start=args.start, start_point=args.x, workers=args.workers)
        where = f"j={args.j}" if args.j is not None else f"k={args.k}"
        items, ratios = [], []
        for name, ev in rep.events.items():
            params = f"{where} t={args.t} start={args.start}"
            items += [(f"{name}(0)", params, ev.marginal_0), (f"{name}(t)", params, ev.marginal_t),
                      (f"{name}(0,t)", params, ev.joint)]
            ratios.append((name, params, ev.ratio, ev.ratio_low, ev.ratio_high))
        return [_estimate_rows(items), Table("ratios", ("event", "params", "ratio", "ci_low", "ci_high"), ratios)]
    if lemma == "decorrelation":
        if args.n is None or args.size is None:
            raise InputError("decorrelation needs --n and --size")
        rep = estimators.estimate_resample_decorrelation(args.n, args.window, args.size, trials, seed, seed)
        params = f"n={args.n} window={args.window} size={args.size}"
        return [_estimate_rows([("conditional", params, rep.conditional), ("unconditional", params, rep.unconditional)])]
    if lemma == "fmt":
        s = _load_schedule(args.schedule)
        rep = estimators.estimate_fmt_ratio(s, args.M, args.t, trials, seed, floor=args.floor, workers=args.workers)
        params = f"M={args.M} t={args.t}"
        return [_estimate_rows([("E_M(0)", params, rep.marginal), ("E_M(0,t)", params, rep.joint)]),
                Table("ratios", ("event", "params", "ratio", "ci_low", "ci_high"),
                      [("fmt", params, rep.ratio, rep.ci_low, rep.ci_high)])]
    if lemma == "max-excursion":
        est = estimators.estimate_max_excursion(args.n, args.m, trials, seed)
        return [_estimate_rows([(lemma, f"n={args.n} m={args.m}", est)])]
    if lemma == "disc-hit":
        est = estimators.estimate_disc_hit(args.n, int(args.m), trials, seed)
        return [_estimate_rows([(lemma, f"N={args.n} M={int(args.m)}", est)])]
    raise InputError(f"unknown lemma {lemma!r}")


def _sweep_predicate(args):
    if args.pred == "true":
        return args.n, lambda view: True
    if args.pred == "false":
        return args.n, lambda view: False
    if args.pred == "avoid-origin":
        return args.n, lambda view: not ((view.positions[1:] == 0).all(axis=1)).any()
    if args.pred == "exceptional":
        return args.n, search.exceptional_predicate(args.n, args.m0, args.h)
    raise InputError(f"unknown predicate {args.pred!r}")


def cmd_sweep(args) -> list[Table]:
    seeds = [args.seed] if args.seeds == 1 else [int(s) for s in search.streams.trial_seeds(args.seed, np.arange(args.seeds))]
    results = []
    for seed in seeds:
        cfg = WalkConfig(master_seed=seed, horizon=max(1.0, args.horizon))
        if args.pred == "nested":
            results.append(search.nested_intersection(cfg, _load_schedule(args.schedule), args.M))
        else:
            if args.n is None:
                raise InputError("sweep needs --n")
            n, pred = _sweep_predicate(args)
            results.append(search.sweep(cfg, n, pred))
    summary = Table("sweeps", ("seed", "n", "event_count", "total_measure", "intervals"),
                    [(r.seed, r.n, r.event_count, r.total_measure, json.dumps([[a, b] for a, b in r.intervals]))
                     for r in results])
    if args.format == "json":
        summary = Table("sweeps", ("seed", "n", "event_count", "total_measure", "intervals"),
                        [(r.seed, r.n, r.event_count, r.total_measure, [[a, b] for a, b in r.intervals]) for r in results])
    return [summary]


def cmd_avoid(args) -> list[Table]:
    spec = search.AvoidanceSpec(args.L, search.parse_grid(args.ngrid), args.seeds, args.seed, search.WITNESSES.get(args.L))
    rep = search.run_avoidance(spec)
    return [
        Table("decay", ("n", "fraction", "seeds", "survivors"), [(r.n, r.fraction, r.seeds, r.survivors) for r in rep.rows]),
        Table("fit", ("forbidden", "slope", "intercept", "r2", "complete"),
              [(rep.forbidden, rep.slope, rep.intercept, rep.r2, int(rep.complete))]),
    ]


def cmd_gen(args) -> list[Table]:
    if args.n is None or args.n < 1:
        raise InputError("gen needs --n >= 1")
    rows = []
    for i in range(1, args.n + 1):
        tl = timeline(args.seed, i, args.horizon)
        rows.append((i, 0.0, tl.initial.dx, tl.initial.dy))
        rows += [(i, time, d.dx, d.dy) for time, d in tl.events]
    return [Table("timelines", ("index", "time", "dx", "dy"), rows)]


# --- argument handling ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides DYNWALK_SEED and --config)")
    common.add_argument("--config", default=None, help="JSON file of option defaults")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--output", "-o", default=None, help="write here instead of stdout")
    common.add_argument("--workers", type=int, default=None)

    parser = argparse.ArgumentParser(prog="dynwalk", description="Dynamical random walk experiments.")
    parser.add_argument("--version", action="version", version=f"dynwalk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedule", parents=[common], help="stopping times, annuli, beta_k, K(t)")
    p.add_argument("--paper", action="store_true")
    p.add_argument("--desk", default=None, metavar="JSON")
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument("--beta", type=int, action="append", default=None, metavar="K")
    p.add_argument("--K", type=float, action="append", default=None, metavar="T")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("oracle", parents=[common], help="hit-before-exit Dirichlet solves")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--query", type=_point, action="append", default=None, metavar="X,Y")
    p.add_argument("--field", action="store_true")
    p.add_argument("--fit-escape", action="store_true")
    p.add_argument("--nmax", type=int, default=None)
    p.add_argument("--band", type=int, action="append", default=None, metavar="N")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("estimate", parents=[common], help="Monte Carlo lemma estimates")
    p.add_argument("--lemma", required=True,
                   choices=("hit-before-exit", "segment", "joint", "decorrelation", "fmt", "max-excursion", "disc-hit"))
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--schedule", default=None, help="paper:K or a schedule JSON file")
    p.add_argument("--x", type=_point, default=None, metavar="X,Y", help="start point")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--m", type=float, default=None)
    p.add_argument("--j", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--start", choices=("origin", "fixed", "annulus"), default=None)
    p.add_argument("--size", type=int, default=None, help="resampled subset size")
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--floor", type=float, default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", parents=[common], help="maximal intervals of t where a predicate holds")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--pred", choices=("true", "false", "avoid-origin", "exceptional", "nested"), default=None)
    p.add_argument("--m0", type=int, default=None)
    p.add_argument("--h", type=int, default=None)
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--schedule", default=None)
    p.add_argument("--seeds", type=int, default=None, help="number of derived walk seeds")
    p.add_argument("--horizon", type=float, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("avoid", parents=[common], help="forbidden-set avoidance decay")
    p.add_argument("--L", choices=sorted(search.FORBIDDEN_SETS), default=None)
    p.add_argument("--ngrid", default=None, help="start:stop:step (inclusive) or a comma list")
    p.add_argument("--seeds", type=int, default=None)
    p.set_defaults(func=cmd_avoid)

    p = sub.add_parser("gen", parents=[common], help="per-step clock timelines")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.set_defaults(func=cmd_gen)
    return parser


def resolve(args) -> argparse.Namespace:
    """Fill unset options from --config, then DEFAULTS; apply seed precedence."""
    config = {}
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(config, dict):
            raise InputError("config file must hold a JSON object")
    env_seed = os.environ.get("DYNWALK_SEED")
    if args.seed is None:
        if env_seed not in (None, ""):
            try:
                args.seed = int(env_seed)
            except ValueError as exc:
                raise InputError(f"DYNWALK_SEED must be an integer, got {env_seed!r}") from exc
        else:
            args.seed = int(config.get("seed", 0))
    for key, value in vars(args).copy().items():
        if value is None:
            if key in config:
                setattr(args, key, config[key])
            elif key in DEFAULTS:
                setattr(args, key, DEFAULTS[key])
    if args.workers < 1:
        raise InputError("--workers must be >= 1")
    return args


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = resolve(args)
        text = _render(args, args.func(args))
    except (InputError, ScheduleError, IndexError, PredicateError) as exc:
        print(f"dynwalk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, EstimatorRefused) as exc:
        print(f"dynwalk: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ResourceError as exc:
        print(f"dynwalk: resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
