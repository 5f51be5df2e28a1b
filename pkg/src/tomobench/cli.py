"""Command line interface.

Subcommands:
  estimate   run one estimator on a dataset CSV + design JSON
  predict    evaluate a closed-form risk formula
  bench      run/reproduce Monte-Carlo experiments (run, predict, reproduce)
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import asymptotics, bench
from ._linalg import matrix_to_json
from .design import MeasurementDesign
from .estimators import (
    DEFAULT_CONFIG,
    covariance_estimate,
    estimate_gls,
    estimate_ls,
    estimate_ml,
    estimate_pls,
    estimate_posgls,
    estimate_posls,
    estimate_tgls,
    estimate_tls,
    pool_batches,
)
from .sampling import frequencies, load_dataset

METHODS = ("ls", "gls", "tls", "tgls", "posls", "posgls", "ml", "pls")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tomobench")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate a state from a counts dataset")
    est.add_argument("--method", required=True, choices=METHODS)
    est.add_argument(
        "--data",
        required=True,
        action="append",
        help="dataset CSV (repeat 5 times for tls/tgls batches)",
    )
    est.add_argument("--design", required=True, help="design JSON file")
    est.add_argument("--out", required=True, help="output JSON file")

    pred = sub.add_parser("predict", help="evaluate a closed-form prediction")
    _add_predict_args(pred)

    ben = sub.add_parser("bench", help="Monte-Carlo benchmarking")
    bsub = ben.add_subparsers(dest="bench_command", required=True)
    run = bsub.add_parser("run", help="run an experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    bpred = bsub.add_parser("predict", help="same as top-level predict")
    _add_predict_args(bpred)
    rep = bsub.add_parser("reproduce", help="reproduce a figure as a data table")
    rep.add_argument("--figure", required=True, choices=bench.FIGURES)
    rep.add_argument("--out", default=None)
    rep.add_argument("--trials", type=int, default=None)
    rep.add_argument("--d", type=int, default=None)
    rep.add_argument("--shots", type=int, default=None, help="total sample count N")
    rep.add_argument("--m", type=int, default=None)
    rep.add_argument("--seed", type=int, default=0)
    rep.add_argument("--workers", type=int, default=1)

    args = parser.parse_args(argv)
    if args.command == "estimate":
        return _cmd_estimate(args)
    if args.command == "predict":
        return _cmd_predict(args)
    if args.bench_command == "run":
        return _cmd_bench_run(args)
    if args.bench_command == "predict":
        return _cmd_predict(args)
    return _cmd_reproduce(args)


def _add_predict_args(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--formula",
        required=True,
        choices=(
            "ls_frobenius",
            "ls_operator",
            "ls_trace",
            "pls_frobenius",
            "pls_bures",
            "pls_operator_lower",
            "pls_trace_lower",
            "ml_bures_mixed",
            "epsilon",
            "block_variances",
        ),
    )
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--N", type=float, default=None, dest="n_samples")


def _cmd_estimate(args) -> int:
    from .sampling import CountsDataset

    design = MeasurementDesign.from_json(json.loads(Path(args.design).read_text()))
    datasets = [
        CountsDataset(counts=ds.counts, m=ds.m, design=design)
        for ds in (load_dataset(p) for p in args.data)
    ]
    cfg = DEFAULT_CONFIG
    pooled = datasets[0] if len(datasets) == 1 else pool_batches(datasets)
    f = frequencies(pooled)
    out = {"method": args.method}
    if args.method == "ls":
        result = estimate_ls(f, design).matrix
    elif args.method == "pls":
        result = estimate_pls(f, design).matrix
    elif args.method == "gls":
        cov = covariance_estimate(f, design, pooled.m, cfg)
        result = estimate_gls(f, design, cov).matrix
    elif args.method in ("tls", "tgls"):
        fit = (estimate_tls if args.method == "tls" else estimate_tgls)(
            datasets, design, "frobenius", cfg
        )
        result = fit.state.matrix
        out["threshold_constant"] = fit.threshold_constant
    elif args.method in ("posls", "posgls", "ml"):
        if args.method == "posls":
            fit = estimate_posls(f, design, cfg)
        elif args.method == "posgls":
            cov = covariance_estimate(f, design, pooled.m, cfg)
            fit = estimate_posgls(f, design, cov, cfg)
        else:
            fit = estimate_ml(pooled, design, cfg)
        result = fit.state.matrix
        out["iterations"] = fit.iterations
        out["converged"] = fit.converged
    out["matrix"] = matrix_to_json(result)
    Path(args.out).write_text(json.dumps(out, indent=2))
    return 0


def _cmd_predict(args) -> int:
    d, r, n = args.d, args.r, args.n_samples
    formula = args.formula
    if formula == "ls_frobenius":
        value = asymptotics.ls_risk_frobenius(d, r)
        if n:
            value /= n
    elif formula in ("ls_operator", "ls_trace"):
        value = asymptotics.ls_norm_asymptotes(d, n)[formula.split("_")[1]]
    elif formula == "pls_frobenius":
        value = asymptotics.pls_risk_frobenius(d, r, n)
    elif formula == "pls_bures":
        value = asymptotics.pls_risk_bures(d, r, n)
    elif formula in ("pls_operator_lower", "pls_trace_lower"):
        value = asymptotics.pls_norm_lower_bounds(d, r, n)[formula.split("_")[1]]
    elif formula == "ml_bures_mixed":
        value = asymptotics.ml_bures_mixed(d, n)
    elif formula == "epsilon":
        value = asymptotics.solve_epsilon(r, d)
    else:
        value = vars(asymptotics.ls_block_variances(d, r))
    payload = {"formula": formula, "d": d, "r": r, "N": n, "value": value}
    json.dump(payload, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def _cmd_bench_run(args) -> int:
    obj = json.loads(Path(args.config).read_text())
    config = bench.ExperimentConfig.from_json(obj, apply_env=True)
    report = bench.run_experiment(config)
    Path(args.out).write_text(report.to_csv())
    for estimator, metric, reason in report.skipped:
        print(f"skipped {estimator}/{metric}: {reason}", file=sys.stderr)
    return 0


def _cmd_reproduce(args) -> int:
    report = bench.reproduce_figure(
        args.figure,
        trials=args.trials,
        d=args.d,
        n_samples=args.shots,
        m=args.m,
        seed=args.seed,
        workers=args.workers,
    )
    text = report.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
