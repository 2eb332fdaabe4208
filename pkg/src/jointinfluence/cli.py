"""Command-line interface: ``jim build|fit|simulate|predict|trace|report``.

Every option may also be given in a flat TOML file passed with
``--config``; keys use the option name with underscores
(``max_iters = 5000``). Command-line flags override the file.

Exit codes: 0 success, 2 input or parse error, 3 numerical or stability
error, 4 empty result.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .estimation import FitConfig, FitResult, fit
from .exceptions import (
    CapExceededError,
    ConvergenceError,
    DomainError,
    EmptyResultError,
    InsufficientDataError,
    JIMError,
    StabilityError,
)
from .forecasting import (
    METHODS,
    MODEL_METHODS,
    ForecastConfig,
    bin_counts,
    compare_methods,
    run_task,
    split_bin,
)
from .ingestion import (
    DEFAULT_THRESHOLD,
    SimilarityConfig,
    build_joint_dataset,
    read_dataset,
    read_events,
    read_queries,
    tokenize,
    write_dataset,
)
from .intensity import (
    compensator,
    influence_summary,
    intensity_at_points,
    intensity_trace,
    spectral_radius,
)
from .simulation import GENERATOR, SimConfig, simulate

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("jointinfluence")

EXIT_INPUT, EXIT_NUMERIC, EXIT_EMPTY = 2, 3, 4


class InputError(JIMError):
    pass


def _g(v, digits=10):
    return format(float(v), f".{digits}g")


def _require(*paths):
    for p in paths:
        if p is not None and not os.path.exists(p):
            raise InputError(f"no such file: {p}")


def _outdir(path):
    if path:
        os.makedirs(path, exist_ok=True)
    return path or "."


# -- build --------------------------------------------------------------------

def cmd_build(args) -> int:
    _require(args.events, args.queries)
    events = read_events(args.events)
    queries = read_queries(args.queries)
    qterms = [tokenize(q.text) for q in queries]
    cfg = SimilarityConfig.from_queries(qterms, k1=args.k1, b=args.b,
                                        use_body=args.use_body)
    ds = build_joint_dataset(events, queries, cfg, args.threshold)
    write_dataset(args.out, ds.sequence, ds.texts)
    seq = ds.sequence
    print(f"{'event':>6}  {'queries':>8}  {'avg_sim':>8}  title")
    for j, e in enumerate(ds.events):
        m = seq.events == j
        avg = seq.marks[m].mean() if m.any() else 0.0
        print(f"{e.id:>6}  {int(m.sum()):>8}  {avg:>8.4f}  {e.title}")
    print(f"total {len(seq)} queries kept of {len(queries)}, "
          f"avg similarity {seq.marks.mean():.4f}, "
          f"window [{seq.t_start:g}, {seq.t_end:g}] h")
    return 0


# -- fit ----------------------------------------------------------------------

def _fit_config(args, variant="JIM") -> FitConfig:
    kw = dict(max_iters=args.max_iters, tolerance=args.tolerance,
              restarts=args.restarts, reg_weight=args.reg_weight,
              stability_margin=args.stability_margin,
              two_stage=not args.single_stage, seed=args.seed)
    if variant == "IIM-approx":
        return FitConfig.iim(**kw)
    return FitConfig(shared_alpha=variant == "JIM-G", **kw)


def _training_part(seq, fraction, bin_width=1.0):
    if fraction >= 1.0:
        return seq
    frame = bin_counts(seq, bin_width)
    b = split_bin(frame, fraction)
    return seq.before(frame.t0 + b * bin_width)


def _print_model(params):
    s = influence_summary(params)
    print("alpha          " + " ".join(_g(v, 6) for v in params.alpha))
    print("eta            " + " ".join(_g(v, 6) for v in params.eta))
    print("avg influence  " + " ".join(_g(v, 6) for v in s.avg_influence))
    print(f"spectral radius {s.spectral_radius:.6g}")
    print(f"direct {s.direct_mean:.6g}  indirect {s.indirect_mean:.6g}")


def cmd_fit(args) -> int:
    _require(args.dataset)
    seq, _, _ = read_dataset(args.dataset)
    variant = "IIM-approx" if args.diagonal_mic else \
        "JIM-G" if args.shared_alpha else "JIM"
    train = _training_part(seq, args.train_fraction)
    result = fit(train, _fit_config(args, variant))
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(result.to_json())
    print(f"variant {result.variant}  objective {result.objective:.12g}  "
          f"iterations {result.iterations}  converged {str(result.converged).lower()}")
    _print_model(result.params)
    return 0


def _load_model(path) -> FitResult:
    _require(path)
    with open(path, encoding="utf-8") as fh:
        try:
            return FitResult.from_json(fh.read())
        except (ValueError, KeyError, TypeError) as exc:
            raise InputError(f"{path}: bad model file ({exc})") from exc


# -- simulate -----------------------------------------------------------------

def cmd_simulate(args) -> int:
    model = _load_model(args.model)
    r = spectral_radius(model.params.mic)
    if r >= 1:
        raise StabilityError(f"spectral radius {r:.6g} >= 1; refusing to simulate")
    seq = simulate(model.params, SimConfig(args.t_start, args.t_end, args.seed,
                                           args.max_points))
    write_dataset(args.out, seq, [f"event {d}" for d in seq.events],
                  extra_header={"generator": GENERATOR, "seed": args.seed})
    counts = seq.counts()
    print(f"simulated {len(seq)} points over [{args.t_start:g}, {args.t_end:g}] h; "
          f"per event " + " ".join(str(int(c)) for c in counts))
    return 0


# -- predict ------------------------------------------------------------------

def _parse_list(text, conv=str):
    if isinstance(text, (list, tuple)):
        return [conv(v) for v in text]
    return [conv(v.strip()) for v in str(text).split(",") if v.strip()]


def cmd_predict(args) -> int:
    _require(args.dataset, args.model)
    seq, texts, _ = read_dataset(args.dataset)
    tasks = _parse_list(args.tasks, int)
    methods = _parse_list(args.methods)
    for m in methods:
        if m not in METHODS:
            raise InputError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    for t in tasks:
        if t not in (1, 2, 3, 4, 5):
            raise InputError(f"unknown task {t}")
    fcfg = ForecastConfig(bin_width=args.bin_width,
                          split_fraction=args.split_fraction,
                          ar_order=args.ar_order, rbo_p=args.rbo_p,
                          decay_half_life=args.decay_half_life,
                          query_top_n=args.query_top_n)

    models = {}
    if "JIM" in methods and args.model:
        models["JIM"] = _load_model(args.model).params
        if models["JIM"].k != seq.k:
            raise InputError(f"model has k={models['JIM'].k}, dataset k={seq.k}")
    train = None
    for m in methods:
        if m in MODEL_METHODS and m not in models:
            if train is None:
                train = _training_part(seq, fcfg.split_fraction, fcfg.bin_width)
            log.info("fitting %s on the training span", m)
            models[m] = fit(train, _fit_config(args, m)).params

    out = _outdir(args.out_dir)
    runs = {}
    rows = []
    summary = []
    for task in tasks:
        for m in methods:
            run = run_task(task, m, seq, texts, models.get(m), fcfg)
            runs[(task, m)] = run
            rows.extend(run.rows)
            for metric, value, n in run.summary:
                summary.append({"task": task, "method": m, "metric": metric,
                                "value": float(_g(value, 12)), "n_bins": n})
        compare = _parse_list(args.compare) if args.compare else []
        if len(compare) == 2 and all((task, c) in runs for c in compare):
            a, b = runs[(task, compare[0])], runs[(task, compare[1])]
            for metric, res in compare_methods(a, b):
                summary.append({"task": task,
                                "method": f"{compare[0]} vs {compare[1]}",
                                "metric": f"wilcoxon_{metric}",
                                "value": float(_g(res.statistic, 12)),
                                "n_bins": res.n,
                                "significant": res.significant})

    with open(os.path.join(out, "predictions.csv"), "w", newline="",
              encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin", "method", "task", "channel_or_query",
                    "predicted", "actual"])
        for b, m, t, c, p, a in rows:
            w.writerow([b, m, t, c, _g(p), _g(a)])
    with open(os.path.join(out, "metrics.json"), "w", encoding="utf-8",
              newline="\n") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    for s in summary:
        extra = f"  significant={s['significant']}" if "significant" in s else ""
        print(f"task {s['task']}  {s['method']:<14} {s['metric']:<22} "
              f"{s['value']:.6g}  (n={s['n_bins']}){extra}")
    return 0


# -- trace --------------------------------------------------------------------

def cmd_trace(args) -> int:
    model = _load_model(args.model)
    _require(args.dataset)
    seq, _, _ = read_dataset(args.dataset)
    if model.params.k != seq.k:
        raise InputError(f"model has k={model.params.k}, dataset k={seq.k}")
    tr = intensity_trace(model.params, seq, args.grid_step)
    frame = bin_counts(seq, 1.0)
    hours = frame.bin_of(tr.times)
    k = seq.k
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(["time"] + [f"event_{j}" for j in range(k)]
                          + [f"count_{j}" for j in range(k)]) + "\n")
        for t, vals, h in zip(tr.times, tr.values, hours):
            fh.write(",".join([_g(t)] + [_g(v) for v in vals]
                              + [str(int(c)) for c in frame.series[h]]) + "\n")
    print(f"wrote {tr.times.size} rows to {args.out}")
    return 0


# -- report -------------------------------------------------------------------

def cmd_report(args) -> int:
    model = _load_model(args.model)
    p = model.params
    out = _outdir(args.out_dir)
    s = influence_summary(p)
    _print_model(p)
    with open(os.path.join(out, "influence.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["event", "eta", "alpha", "avg_influence", "rho", "mu",
                    "phi", "psi", "self_excitation"])
        for j in range(p.k):
            w.writerow([j] + [_g(v) for v in (p.eta[j], p.alpha[j],
                                               s.avg_influence[j], p.rho[j],
                                               p.mu[j], p.phi[j], p.psi[j],
                                               p.mic[j, j])])
    with open(os.path.join(out, "mic.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["influenced"] + [f"from_{i}" for i in range(p.k)])
        for j in range(p.k):
            w.writerow([j] + [_g(v) for v in p.mic[j]])
    if args.dataset:
        _require(args.dataset)
        seq, _, _ = read_dataset(args.dataset)
        _report_marks(p, seq, out, args.mark_bins)
        _report_fit(p, seq, out)
    print(f"wrote report CSVs to {out}")
    return 0


def _report_marks(p, seq, out, nbins):
    from .core import pareto_pdf
    with open(os.path.join(out, "marks.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["event", "bin_lo", "bin_hi", "empirical_density", "pareto_density"])
        for j in range(p.k):
            x = seq.marks[seq.events == j]
            if x.size == 0:
                continue
            dens, edges = np.histogram(x, bins=nbins, density=True)
            for lo, hi, d in zip(edges[:-1], edges[1:], dens):
                w.writerow([j, _g(lo), _g(hi), _g(d),
                            _g(pareto_pdf(p.rho[j], p.mu[j], 0.5 * (lo + hi)))])


def _report_fit(p, seq, out):
    lam = intensity_at_points(p, seq) if len(seq) else np.zeros((0, p.k))
    with open(os.path.join(out, "fit_vs_frequency.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["event", "observed_count", "expected_count",
                    "mean_intensity_at_own_points"])
        for j in range(p.k):
            m = seq.events == j
            mean_l = lam[m, j].mean() if m.any() else 0.0
            w.writerow([j, int(m.sum()), _g(compensator(p, seq, j)), _g(mean_l)])


# -- argument parsing ---------------------------------------------------------

def _add_fit_options(p):
    p.add_argument("--max-iters", type=int, default=20_000)
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--reg-weight", type=float, default=1.0)
    p.add_argument("--stability-margin", type=float, default=0.99)
    p.add_argument("--single-stage", action="store_true",
                   help="search mark parameters jointly with the rest")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="flat TOML file with option defaults")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("-v", "--verbose", action="store_true")
        p.set_defaults(func=func)
        return p

    p = add("build", cmd_build, "score queries against events; write the joint dataset")
    p.add_argument("--events", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--k1", type=float, default=1.2)
    p.add_argument("--b", type=float, default=0.75)
    p.add_argument("--use-body", action="store_true")

    p = add("fit", cmd_fit, "fit the model to a joint dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--shared-alpha", action="store_true", help="JIM-G: one decay rate")
    p.add_argument("--diagonal-mic", action="store_true",
                   help="IIM-approx: diagonal MIC, shared eta and alpha, identity impact")
    p.add_argument("--train-fraction", type=float, default=1.0)
    _add_fit_options(p)

    p = add("simulate", cmd_simulate, "simulate a dataset from a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--t-start", type=float, default=0.0)
    p.add_argument("--t-end", type=float, default=1000.0)
    p.add_argument("--max-points", type=int, default=10_000_000)

    p = add("predict", cmd_predict, "run forecasting tasks and write metrics")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", help="fitted JIM model; fitted on the training span if omitted")
    p.add_argument("--tasks", default="1,2")
    p.add_argument("--methods", default="NF,AR,ARD,VAR,IIM-approx,JIM,JIM-G")
    p.add_argument("--compare", default="JIM-G,NF",
                   help="two methods to compare with the Wilcoxon test")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--bin-width", type=float, default=1.0)
    p.add_argument("--split-fraction", type=float, default=0.8)
    p.add_argument("--ar-order", type=int, default=3)
    p.add_argument("--rbo-p", type=float, default=0.9)
    p.add_argument("--decay-half-life", type=float, default=24.0)
    p.add_argument("--query-top-n", type=int, default=50)
    _add_fit_options(p)

    p = add("trace", cmd_trace, "intensity trace next to hourly counts (CSV)")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--grid-step", type=float, default=1.0)
    p.add_argument("--out", required=True)

    p = add("report", cmd_report, "parameter summaries and goodness-of-fit CSVs")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--mark-bins", type=int, default=30)
    return parser


def _apply_config(parser, argv):
    # Load --config (if any) as subparser defaults, then re-parse so flags win.
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    _require(known.config)
    with open(known.config, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise InputError(f"{known.config}: {exc}") from exc
    sub = next(a for a in parser._actions
               if isinstance(a, argparse._SubParsersAction))
    subp = sub.choices.get(known.command)
    if subp is None:
        return
    dests = {a.dest for a in subp._actions}
    unknown = sorted(set(doc) - dests)
    if unknown:
        raise InputError(f"{known.config}: unknown keys {', '.join(unknown)}")
    subp.set_defaults(**doc)
    for a in subp._actions:
        if a.dest in doc:
            a.required = False


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except EmptyResultError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (StabilityError, ConvergenceError, CapExceededError,
            FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, DomainError, InsufficientDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
