"""Command-line front end: ingest corpora, run every analysis, emit tables.

Commands: fit, bootstrap, compare, generate, metrics, evolve, residuals,
asymptotics.  Machine-readable results go to standard output (JSON) and,
when an output directory is set, to plot-ready table files; progress and
warnings go to standard error.  Exit codes: 0 success, 2 usage error,
3 ingest failure, 4 compute failure.

The output directory comes from --out or the THREADLIK_OUT environment
variable, worker count from --jobs or THREADLIK_JOBS; flags win.  A seed
is mandatory for generate and bootstrap (anything randomized must be
replayable); the other commands default to seed 0.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .attractiveness import ModelSpec, Variant
from .asymptotics import (
    correction_cap,
    degree_bound_sequences,
    monte_carlo_degree_mean,
    write_comparison_csv,
)
from .dataset_io import DatasetFormatError, IngestResult, read_dataset, write_dataset
from .estimation import FitConfig, FitResult, bootstrap_fit, fit, residual_experiment
from .generator import GenConfig, generate_dataset
from .metrics import (
    compare_reports,
    evolution_trace,
    log_binned_depth_table,
    structure_report,
)
from .model_compare import compare_models

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INGEST = 3
EXIT_COMPUTE = 4

ENV_OUT = "THREADLIK_OUT"
ENV_JOBS = "THREADLIK_JOBS"

_ALL_VARIANTS = (Variant.FM, Variant.NO_ALPHA, Variant.NO_TAU, Variant.NO_BIAS)


class _UsageError(Exception):
    pass


class _IngestFailure(Exception):
    pass


def _progress(message: str) -> None:
    print(message, file=sys.stderr, flush=True)


def _emit_json(obj) -> None:
    print(json.dumps(obj, indent=2))


def _str_keys(hist) -> dict:
    return {str(k): v for k, v in sorted(hist.items())}


def _table_format(args) -> str:
    return args.format or "csv"


def _resolve_out(args) -> Path | None:
    out = args.out if args.out is not None else os.environ.get(ENV_OUT)
    if not out:
        return None
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _resolve_jobs(args) -> int:
    if args.jobs is not None:
        if args.jobs < 1:
            raise _UsageError("--jobs must be >= 1")
        return args.jobs
    env = os.environ.get(ENV_JOBS)
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise _UsageError(f"{ENV_JOBS} must be an integer, got {env!r}") from None
        if jobs < 1:
            raise _UsageError(f"{ENV_JOBS} must be >= 1")
        return jobs
    return os.cpu_count() or 1


def _ingest(path, strict: bool) -> IngestResult:
    try:
        result = read_dataset(path, strict=strict)
    except (DatasetFormatError, OSError) as exc:
        raise _IngestFailure(str(exc)) from None
    if result.n_skipped:
        _progress(f"skipped {result.n_skipped} malformed lines in {path}")
        for issue in result.issues[:10]:
            _progress(f"  line {issue.line_number}: {issue.message}")
    return result


def _select_variants(model: str) -> tuple[Variant, ...]:
    if model == "all":
        return _ALL_VARIANTS
    return (Variant.parse(model),)


def _fit_config(args, *, seed_default: int = 0) -> FitConfig:
    kwargs = {}
    if getattr(args, "replicates", None) is not None:
        kwargs["bootstrap_replicates"] = args.replicates
    if getattr(args, "sample_size", None) is not None:
        kwargs["sample_size"] = args.sample_size
    kwargs["rng_seed"] = args.seed if args.seed is not None else seed_default
    try:
        return FitConfig(**kwargs)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None


def _spec_from_args(args) -> ModelSpec:
    variant = Variant.parse(args.model)
    if args.beta is not None and args.log_beta is not None:
        raise _UsageError("give --beta or --log-beta, not both")
    beta = 0.0
    if args.beta is not None:
        beta = args.beta
    elif args.log_beta is not None:
        beta = math.exp(args.log_beta)
    try:
        return ModelSpec(
            variant=variant,
            alpha=args.alpha if args.alpha is not None else 0.0,
            tau=args.tau if args.tau is not None else 1.0,
            beta=beta,
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from None


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise _UsageError(f"{flag} expects comma-separated integers") from None
    if not values or any(v < 1 for v in values):
        raise _UsageError(f"{flag} expects positive integers")
    return values


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _write_fit_outputs(out: Path | None, fr: FitResult, fmt: str) -> None:
    if out is None:
        return
    _write_json(out / f"fit_{fr.variant.value}.json", fr.summary_dict())
    if fr.replicates is not None:
        if fmt == "csv":
            fr.replicates_to_csv(out / f"bootstrap_{fr.variant.value}.csv")
        else:
            _write_json(
                out / f"bootstrap_{fr.variant.value}.json",
                [
                    {
                        "replicate": r.replicate,
                        "variant": r.variant,
                        "alpha": r.alpha,
                        "tau": r.tau,
                        "beta": r.beta,
                        "neg_log_lik": r.neg_log_lik,
                        "converged": r.converged,
                    }
                    for r in fr.replicates
                ],
            )


def cmd_fit(args) -> int:
    result = _ingest(args.input, not args.lenient)
    out = _resolve_out(args)
    config = _fit_config(args)
    summary = {}
    for variant in _select_variants(args.model):
        _progress(f"fitting {variant.value} on {result.dataset.n_threads} threads")
        fr = fit(result.dataset, variant, config)
        summary[variant.value] = fr.summary_dict()
        _write_fit_outputs(out, fr, _table_format(args))
    _emit_json(summary)
    return EXIT_OK


def cmd_bootstrap(args) -> int:
    result = _ingest(args.input, not args.lenient)
    out = _resolve_out(args)
    jobs = _resolve_jobs(args)
    config = _fit_config(args)
    summary = {}
    for variant in _select_variants(args.model):
        _progress(
            f"bootstrapping {variant.value}: {config.bootstrap_replicates} replicates"
        )
        fr = bootstrap_fit(result.dataset, variant, config, jobs=jobs)
        summary[variant.value] = fr.summary_dict()
        _write_fit_outputs(out, fr, _table_format(args))
    _emit_json(summary)
    return EXIT_OK


def cmd_compare(args) -> int:
    result = _ingest(args.input, not args.lenient)
    out = _resolve_out(args)
    jobs = _resolve_jobs(args)
    config = _fit_config(args)
    _progress("comparing all four variants")
    report, fits = compare_models(result.dataset, config, jobs=jobs)
    if out is not None:
        if _table_format(args) == "csv":
            report.export_csv(out)
        else:
            _write_json(out / "compare.json", report.to_json_dict())
        for fr in fits.values():
            _write_fit_outputs(out, fr, _table_format(args))
    _emit_json(
        {
            "report": report.to_json_dict(),
            "fits": {name: fr.summary_dict() for name, fr in fits.items()},
        }
    )
    return EXIT_OK


def cmd_generate(args) -> int:
    spec = _spec_from_args(args)
    jobs = _resolve_jobs(args)
    out = _resolve_out(args) or Path(".")
    if (args.sizes is None) == (args.sizes_from is None):
        raise _UsageError("give exactly one of --sizes or --sizes-from")
    if args.sizes is not None:
        sizes = _parse_int_list(args.sizes, "--sizes")
        if args.count is not None and args.count != len(sizes):
            raise _UsageError("--count conflicts with the number of explicit --sizes")
        cfg = GenConfig(count=len(sizes), rng_seed=args.seed, sizes=sizes)
    else:
        if args.count is None:
            raise _UsageError("--count is required with --sizes-from")
        hist = _ingest(args.sizes_from, not args.lenient).dataset.size_histogram()
        cfg = GenConfig(count=args.count, rng_seed=args.seed, size_histogram=hist)
    _progress(f"generating {cfg.count} threads from {spec.variant.value}")
    data = generate_dataset(spec, cfg, jobs=jobs)
    path = out / ("synthetic.csv" if args.format == "csv" else "synthetic.jsonl")
    write_dataset(data, path)
    _emit_json({"path": str(path), "threads": data.n_threads, "nodes": data.n_nodes})
    return EXIT_OK


def cmd_metrics(args) -> int:
    result = _ingest(args.input, not args.lenient)
    out = _resolve_out(args)
    report = structure_report(result.dataset)
    summary: dict = {
        "n_threads": report.n_threads,
        "n_nodes": report.n_nodes,
        "degree_support": len(report.degree_histogram),
        "size_support": len(report.size_histogram),
    }
    if out is not None:
        if _table_format(args) == "csv":
            report.export_csv(out, stem="structure")
            _write_depth_bins(out / "structure_depth_binned.csv", report)
        else:
            _write_json(out / "structure.json", _report_json(report))
    if args.synthetic is not None:
        synth = structure_report(_ingest(args.synthetic, not args.lenient).dataset)
        divergence = compare_reports(report, synth)
        summary["tv"] = dict(divergence.tv)
        if out is not None:
            if _table_format(args) == "csv":
                synth.export_csv(out, stem="synthetic_structure")
                divergence.export_csv(out)
            else:
                _write_json(out / "synthetic_structure.json", _report_json(synth))
                _write_json(out / "divergence.json", divergence.to_json_dict())
    _emit_json(summary)
    return EXIT_OK


def _report_json(report) -> dict:
    return {
        "n_threads": report.n_threads,
        "n_nodes": report.n_nodes,
        "degree_histogram": _str_keys(report.degree_histogram),
        "subtree_size_histogram": _str_keys(report.subtree_size_histogram),
        "size_histogram": _str_keys(report.size_histogram),
        "size_ccdf": [[v, c] for v, c in report.size_ccdf],
        "degree_ccdf": [[v, c] for v, c in report.degree_ccdf],
        "depth_by_size": [
            {
                "size": r.size,
                "mean_depth": r.mean_depth,
                "max_depth": r.max_depth,
                "n_threads": r.n_threads,
            }
            for r in report.depth_by_size
        ],
    }


def _write_depth_bins(path: Path, report) -> None:
    rows = log_binned_depth_table(report)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_lo", "bin_hi", "mean_depth", "max_depth", "n_threads"])
        for r in rows:
            w.writerow([r["bin_lo"], r["bin_hi"], r["mean_depth"], r["max_depth"], r["n_threads"]])


def cmd_evolve(args) -> int:
    result = _ingest(args.input, not args.lenient)
    out = _resolve_out(args)
    trace = evolution_trace(result.dataset)
    summary: dict = {"max_size": trace.max_size, "markers": _markers_json(trace)}
    if out is not None:
        trace.to_csv(out / "evolution.csv")
    if args.synthetic is not None:
        synth = evolution_trace(_ingest(args.synthetic, not args.lenient).dataset)
        summary["synthetic_markers"] = _markers_json(synth)
        if out is not None:
            synth.to_csv(out / "synthetic_evolution.csv")
    _emit_json(summary)
    return EXIT_OK


def _markers_json(trace) -> dict:
    return {
        str(size): {"mean_width": w, "mean_depth": d, "alive": a}
        for size, (w, d, a) in sorted(trace.markers.items())
    }


def cmd_residuals(args) -> int:
    out = _resolve_out(args)
    jobs = _resolve_jobs(args)
    config = _fit_config(args)
    counts = _parse_int_list(args.thread_counts, "--thread-counts")
    if args.experiments < 1:
        raise _UsageError("--experiments must be >= 1")
    all_rows = []
    summary: dict = {}
    for variant in _select_variants(args.model):
        _progress(
            f"recovery experiment for {variant.value}: "
            f"{args.experiments} runs x {counts} threads"
        )
        table = residual_experiment(
            variant, args.experiments, counts, config=config, jobs=jobs
        )
        all_rows.extend(table.rows)
        for v, n, param in table.groups():
            summary.setdefault(v, {}).setdefault(str(n), {})[param] = {
                "median": table.median(v, n, param),
                "iqr": table.spread(v, n, param),
            }
        if out is not None:
            table.to_csv(out / f"residuals_{variant.value}.csv")
            _write_quantiles(out / f"residual_quantiles_{variant.value}.csv", table)
    _emit_json(summary)
    return EXIT_OK


def _write_quantiles(path: Path, table) -> None:
    rows = table.quantile_rows()
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = list(rows[0])
        w.writerow(header)
        for row in rows:
            w.writerow([row[c] for c in header])


def cmd_asymptotics(args) -> int:
    out = _resolve_out(args)
    jobs = _resolve_jobs(args)
    if args.alpha is None or args.alpha <= 0:
        raise _UsageError("--alpha must be given and positive")
    if args.tau is None or not 0 < args.tau < 1:
        raise _UsageError("--tau must be given, strictly inside (0, 1)")
    bounds = degree_bound_sequences(args.alpha, args.tau, args.beta, args.k, args.t_max)
    scaled = bounds.scaled_lower
    summary: dict = {
        "k": args.k,
        "t_max": args.t_max,
        "correction": bounds.correction,
        "correction_cap": correction_cap(args.tau),
        "scaled_lower_final": float(scaled[-1]),
    }
    curve = None
    if args.replicates > 0:
        seed = args.seed if args.seed is not None else 0
        _progress(f"simulating {args.replicates} threads of {args.t_max} nodes")
        spec = ModelSpec.full(args.alpha, args.tau, args.beta)
        curve = monte_carlo_degree_mean(
            spec, args.k, args.t_max, args.replicates, rng_seed=seed, jobs=jobs
        )
        lower, upper = bounds.value_at(curve.t)
        inside = np.mean((curve.mean >= lower) & (curve.mean <= upper))
        summary["empirical_fraction_within_bounds"] = float(inside)
    if out is not None:
        if curve is not None:
            write_comparison_csv(out / "degree_bounds.csv", bounds, curve)
        else:
            _write_bounds_csv(out / "degree_bounds.csv", bounds)
    _emit_json(summary)
    return EXIT_OK


def _write_bounds_csv(path: Path, bounds, points: int = 200) -> None:
    grid = np.unique(np.geomspace(bounds.k, bounds.t_max, points).astype(np.int64))
    lower, upper = bounds.value_at(grid)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "lower", "upper", "scaled_lower"])
        for i, t in enumerate(grid):
            w.writerow([int(t), lower[i], upper[i], lower[i] * math.sqrt(bounds.k / t)])


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--out", help="output directory for table files")
    sub.add_argument("--jobs", type=int, help="worker processes (default: all cores)")
    sub.add_argument("--format", choices=("csv", "json"), default=None,
                     help="table file format (default csv; generate writes the"
                          " dataset as JSON-lines unless csv is requested)")


def _add_ingest_flags(sub: argparse.ArgumentParser) -> None:
    mode = sub.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="lenient", action="store_false", default=False,
                      help="abort on the first malformed line (default)")
    mode.add_argument("--lenient", dest="lenient", action="store_true",
                      help="skip malformed lines and report them")


def _add_fit_flags(sub: argparse.ArgumentParser, *, seed_required: bool) -> None:
    sub.add_argument("--sample-size", type=int, help="threads per fit or resample")
    sub.add_argument("--replicates", type=int, help="bootstrap replicate count")
    sub.add_argument("--seed", type=int, required=seed_required,
                     help="RNG seed" + ("" if seed_required else " (default 0)"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="threadlik",
        description="Fit, simulate, and compare preferential-attachment thread models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="maximum-likelihood fit on a corpus")
    p.add_argument("input", help="dataset file (JSON lines or CSV)")
    p.add_argument("--model", default="fm",
                   choices=("fm", "no-alpha", "no-tau", "no-bias", "all"))
    _add_fit_flags(p, seed_required=False)
    _add_ingest_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bootstrap", help="bootstrap spread of a fit")
    p.add_argument("input")
    p.add_argument("--model", default="fm",
                   choices=("fm", "no-alpha", "no-tau", "no-bias", "all"))
    _add_fit_flags(p, seed_required=True)
    _add_ingest_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("compare", help="fit all variants, LRT + ANOVA/Tukey")
    p.add_argument("input")
    _add_fit_flags(p, seed_required=False)
    _add_ingest_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("generate", help="sample a synthetic corpus")
    p.add_argument("--model", default="fm",
                   choices=("fm", "no-alpha", "no-tau", "no-bias"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--log-beta", type=float)
    p.add_argument("--count", type=int, help="number of threads")
    p.add_argument("--sizes", help="comma-separated explicit thread sizes")
    p.add_argument("--sizes-from", help="corpus whose size histogram to sample")
    p.add_argument("--seed", type=int, required=True)
    _add_ingest_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("metrics", help="structural histograms of a corpus")
    p.add_argument("input")
    p.add_argument("--synthetic", help="second corpus to compare against")
    _add_ingest_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("evolve", help="width-depth growth trajectories")
    p.add_argument("input")
    p.add_argument("--synthetic", help="second corpus to compare against")
    _add_ingest_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("residuals", help="parameter-recovery experiment")
    p.add_argument("--model", default="fm",
                   choices=("fm", "no-alpha", "no-tau", "no-bias", "all"))
    p.add_argument("--experiments", type=int, default=20)
    p.add_argument("--thread-counts", default="50,500,5000")
    p.add_argument("--seed", type=int)
    p.set_defaults(sample_size=None, replicates=None)
    _add_common(p)
    p.set_defaults(func=cmd_residuals)

    p = sub.add_parser("asymptotics", help="expected-degree envelopes and simulation")
    p.add_argument("--alpha", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--t-max", type=int, default=10000)
    p.add_argument("--replicates", type=int, default=0,
                   help="Monte-Carlo replicates (0 = envelopes only)")
    p.add_argument("--seed", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_asymptotics)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _IngestFailure as exc:
        print(f"ingest error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except Exception as exc:  # compute failures get their own exit code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
