"""Command-line driver for the full pipeline.

Subcommands: synth, fit, evaluate, sweep, compare, project, select. Reports
go to stdout as a table and to files as JSON (plus optional per-class CSV);
the projection scatter is written as SVG. Every subcommand is deterministic
given its flags and input files.

Exit codes: 0 success, 2 usage/validation, 3 data error, 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .abstain import calibrate_eta, decide_batch, fit_model, load_model, save_model
from .cluster import DbscanParams
from .dataio import SynthSpec, load_matrix, save_matrix, synthesize
from .errors import DensegapError, ValidationError
from .featsel import fit_selector, shift_nonnegative
from .metrics import (
    SelectiveReport,
    SweepReport,
    align_labels,
    compare_selection,
    evaluate,
    sweep,
    sweep_to_csv,
)
from .projection import project_2d, render_scatter


def _rate(token: str) -> float:
    """Accept fractions ("0.1") and percents ("10%"), normalized to fractions."""
    token = token.strip()
    try:
        value = float(token[:-1]) / 100.0 if token.endswith("%") else float(token)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a rate: {token!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"rate {token!r} outside [0, 1]")
    return value


def _rate_list(text: str) -> list[float]:
    tokens = [t for t in text.split(",") if t.strip()]
    if not tokens:
        raise argparse.ArgumentTypeError("empty rates list")
    return [_rate(t) for t in tokens]


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="generator seed (used by synth)")
    common.add_argument("--force", action="store_true", help="allow an output path to overwrite an input path")
    common.add_argument("--format", choices=("csv", "fmx"), default=None, help="matrix output format (default: by file suffix)")
    common.add_argument("--quiet", action="store_true", help="suppress the stdout table/summary")

    parser = argparse.ArgumentParser(
        prog="densegap",
        description="Selective prediction via per-class density centroids and distance-gap abstention.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic labeled matrix")
    p.add_argument("--classes", type=_positive_int, default=3)
    p.add_argument("--informative", type=_positive_int, default=8, help="class-dependent dimensions")
    p.add_argument("--noise", type=int, default=0, help="label-independent dimensions (half constant, half uniform)")
    p.add_argument("--per-class", type=_positive_int, default=100, dest="per_class")
    p.add_argument("--spread", type=float, default=1.0, help="per-class isotropic std")
    p.add_argument("--separation", type=_positive_float, default=10.0, help="minimum distance between class centers")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", parents=[common], help="fit selector + centroids, calibrate eta, save the model")
    p.add_argument("train")
    p.add_argument("--calib", default=None, help="calibration matrix (default: the training matrix)")
    p.add_argument("--rate", type=_rate, default=0.0, help="target abstention rate for eta calibration")
    p.add_argument("--k", type=_positive_int, default=None, help="retain the top-k chi-square features")
    p.add_argument("--eps", type=_positive_float, default=None, help="DBSCAN radius (default: k-distance heuristic)")
    p.add_argument("--min-pts", type=_positive_int, default=4, dest="min_pts")
    p.add_argument("--shift-min", action="store_true", dest="shift_min",
                   help="shift negative columns up before chi-square scoring")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", parents=[common], help="decide a labeled matrix with a saved model and report")
    p.add_argument("model")
    p.add_argument("test")
    p.add_argument("-o", "--output", default=None, help="report JSON path")
    p.add_argument("--csv", default=None, help="per-class CSV path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", parents=[common], help="abstention-rate sweep: calibrate, decide, evaluate per rate")
    p.add_argument("train")
    p.add_argument("calib")
    p.add_argument("test")
    p.add_argument("--rates", type=_rate_list, default=[0.0, 0.1, 0.2, 0.3], help="comma list; percents allowed")
    p.add_argument("--k", type=_positive_int, default=None)
    p.add_argument("--eps", type=_positive_float, default=None)
    p.add_argument("--min-pts", type=_positive_int, default=4, dest="min_pts")
    p.add_argument("--shift-min", action="store_true", dest="shift_min")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", parents=[common], help="sweep with and without chi-square selection, side by side")
    p.add_argument("train")
    p.add_argument("calib")
    p.add_argument("test")
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--rates", type=_rate_list, default=[0.0, 0.1, 0.2, 0.3])
    p.add_argument("--eps", type=_positive_float, default=None)
    p.add_argument("--min-pts", type=_positive_int, default=4, dest="min_pts")
    p.add_argument("--shift-min", action="store_true", dest="shift_min")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("project", parents=[common], help="2-D principal-direction scatter plot (SVG)")
    p.add_argument("matrix")
    p.add_argument("--model", default=None, help="render abstained samples hollow")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("select", parents=[common], help="standalone chi-square scoring to JSON")
    p.add_argument("matrix")
    p.add_argument("--k", type=_positive_int, default=None, help="default: 1024 clamped to d")
    p.add_argument("--shift-min", action="store_true", dest="shift_min")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_select)

    return parser


def _guard_clobber(args, inputs, outputs) -> None:
    resolved = {Path(p).resolve() for p in inputs if p}
    for out in outputs:
        if out and Path(out).resolve() in resolved and not args.force:
            raise ValidationError(f"output {out} would overwrite an input; pass --force to allow")


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _pct(v) -> str:
    return "-" if v is None else f"{100.0 * v:.2f}%"


def _report_table(report: SweepReport) -> str:
    names = [cm.name for cm in report.rows[0].per_class] if report.rows else []
    header = ["rate", "achieved", "accuracy"]
    for name in names:
        header += [f"sens:{name}", f"ppv:{name}"]
    header.append("caught")
    lines = [header]
    for row in report.rows:
        cells = [_pct(row.target_rate), _pct(row.achieved_rate), _pct(row.retained_accuracy)]
        for cm in row.per_class:
            cells += [_pct(cm.sensitivity), _pct(cm.ppv)]
        cells.append(_pct(row.mistaken_caught_fraction))
        lines.append(cells)
    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(line, widths)) for line in lines)


def _write_json(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _emit_sweep(args, report: SweepReport) -> None:
    _say(args, _report_table(report))
    if args.output:
        _write_json(report.to_dict(), args.output)
    if args.csv:
        Path(args.csv).write_text(sweep_to_csv(report), encoding="utf-8")


def _params_from(args) -> DbscanParams | None:
    return DbscanParams(eps=args.eps, min_pts=args.min_pts) if args.eps is not None else None


def cmd_synth(args) -> int:
    _guard_clobber(args, [], [args.output])
    spec = SynthSpec(
        class_count=args.classes,
        informative_dims=args.informative,
        noise_dims=args.noise,
        samples_per_class=args.per_class,
        cluster_spread=args.spread,
        centroid_separation=args.separation,
        seed=args.seed,
    )
    matrix = synthesize(spec)
    save_matrix(matrix, args.output, args.format)
    _say(args, f"wrote {matrix.n}x{matrix.d} matrix ({len(matrix.class_names)} classes) to {args.output}")
    return 0


def cmd_fit(args) -> int:
    _guard_clobber(args, [args.train, args.calib], [args.output])
    train = load_matrix(args.train)
    calib = load_matrix(args.calib) if args.calib else train
    score = shift_nonnegative(train) if args.shift_min else None
    model = fit_model(train, params=_params_from(args), k=args.k, score_matrix=score)
    cal = calibrate_eta(model, calib, args.rate)
    model = model.with_eta(cal.eta)
    save_model(model, args.output)
    _say(
        args,
        f"eta={cal.eta:.6g} achieved={cal.achieved_rate:.4f} target={cal.target_rate:.4f} "
        f"(eps={model.params.eps:.6g}, min_pts={model.params.min_pts})",
    )
    return 0


def cmd_evaluate(args) -> int:
    _guard_clobber(args, [args.model, args.test], [args.output, args.csv])
    model = load_model(args.model)
    test = load_matrix(args.test)
    decisions = decide_batch(model, test)
    report = evaluate(decisions, align_labels(test, model.class_names), model.class_names)
    wrapped = SweepReport(
        rows=(report,), dataset_meta={"n": test.n, "d": test.d, "class_counts": test.class_counts()}
    )
    _say(args, _report_table(wrapped))
    if args.output:
        _write_json(report.to_dict(), args.output)
    if args.csv:
        Path(args.csv).write_text(sweep_to_csv(wrapped), encoding="utf-8")
    return 0


def cmd_sweep(args) -> int:
    _guard_clobber(args, [args.train, args.calib, args.test], [args.output, args.csv])
    train = load_matrix(args.train)
    score = shift_nonnegative(train) if args.shift_min else None
    model = fit_model(train, params=_params_from(args), k=args.k, score_matrix=score)
    report = sweep(model, load_matrix(args.calib), load_matrix(args.test), args.rates)
    _emit_sweep(args, report)
    return 0


def cmd_compare(args) -> int:
    _guard_clobber(args, [args.train, args.calib, args.test], [args.output, args.csv])
    train = load_matrix(args.train)
    score = shift_nonnegative(train) if args.shift_min else None
    comparison = compare_selection(
        train,
        load_matrix(args.calib),
        load_matrix(args.test),
        args.k,
        args.rates,
        params=_params_from(args),
        score_matrix=score,
    )
    _say(args, "without selection:")
    _say(args, _report_table(comparison.without_selection))
    _say(args, f"with selection (k={args.k}):")
    _say(args, _report_table(comparison.with_selection))
    if args.output:
        _write_json(comparison.to_dict(), args.output)
    if args.csv:
        Path(args.csv).write_text(
            "without_selection\n" + sweep_to_csv(comparison.without_selection)
            + "with_selection\n" + sweep_to_csv(comparison.with_selection),
            encoding="utf-8",
        )
    return 0


def cmd_project(args) -> int:
    _guard_clobber(args, [args.matrix, args.model], [args.output])
    matrix = load_matrix(args.matrix)
    projection = project_2d(matrix.values)
    abstained = None
    if args.model:
        model = load_model(args.model)
        abstained = np.array([d.abstained for d in decide_batch(model, matrix)], dtype=bool)
    render_scatter(matrix, projection, args.output, abstained=abstained)
    _say(args, f"wrote scatter of {matrix.n} samples to {args.output}")
    return 0


def cmd_select(args) -> int:
    _guard_clobber(args, [args.matrix], [args.output])
    matrix = load_matrix(args.matrix)
    if args.shift_min:
        matrix = shift_nonnegative(matrix)
    k = args.k if args.k is not None else min(1024, matrix.d)
    selector = fit_selector(matrix, k)
    doc = selector.to_dict()
    if args.output:
        _write_json(doc, args.output)
    top = selector.retained_indices()[:8]
    _say(args, f"retained {selector.k}/{selector.d_original} features; best indices: {list(map(int, top))}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DensegapError as exc:
        print(f"densegap: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"densegap: io error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
