"""``dyadperm`` command line.

Exit codes: 0 success, 2 usage error, 3 invalid input, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from ._kernels import configure_threads
from .exceptions import DyadNumericalError, DyadValidationError
from .io import align_to, dumps_report, input_record, read_network, report_document
from .permutation import MRQAP_STATISTICS, QAP_STATISTICS, TIE_RULES, Strategy, run_mrqap, run_qap
from .regress import cluster_robust_variance, fit_dyadic_ols, make_design, wald_statistic
from .rng import ALGORITHM
from .simulation import ExperimentConfig, compare_statistics, run_experiment
from .ustat import ETA1_CORRECTIONS, qap_estimates, studentized_statistic

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3, 4


def _add_input_options(p):
    p.add_argument("--format", dest="fmt", choices=("matrix", "edges"), default="matrix",
                   help="network file format (default: matrix CSV)")
    p.add_argument("--n-units", type=int, default=None,
                   help="number of units for edge lists (default: inferred)")


def _add_common(p, statistics, default_stat):
    p.add_argument("--statistic", choices=statistics, default=default_stat)
    p.add_argument("--reps", type=int, default=999, help="Monte Carlo permutations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eta1-correction", choices=ETA1_CORRECTIONS, default="auto")
    p.add_argument("--ties", choices=TIE_RULES, default="inclusive")
    p.add_argument("--histogram", action="store_true",
                   help="add Freedman-Diaconis binned replicate counts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dyadperm", description="QAP and MRQAP permutation tests")
    parser.add_argument("--output", "-o", default=None, help="write the report here instead of stdout")
    parser.add_argument("--timing", action="store_true", help="record wall-clock time (breaks byte-identity)")
    sub = parser.add_subparsers(dest="command", required=True)

    q = sub.add_parser("qap", help="correlation test between two networks")
    q.add_argument("--a", required=True)
    q.add_argument("--b", required=True)
    _add_common(q, QAP_STATISTICS, "studentized")
    _add_input_options(q)

    m = sub.add_parser("mrqap", help="permutation test of focal regression coefficients")
    m.add_argument("--a", required=True, help="outcome network")
    m.add_argument("--b", required=True, nargs="+", help="focal networks")
    m.add_argument("--c", nargs="*", default=[], help="nuisance networks")
    m.add_argument("--strategy", choices=[s.value for s in Strategy], default="b")
    _add_common(m, MRQAP_STATISTICS, "wald")
    _add_input_options(m)

    f = sub.add_parser("fit", help="dyadic least squares with robust variance")
    f.add_argument("--a", required=True)
    f.add_argument("--b", required=True, nargs="+")
    f.add_argument("--c", nargs="*", default=[])
    f.add_argument("--eta1-correction", choices=ETA1_CORRECTIONS, default="auto")
    _add_input_options(f)

    s = sub.add_parser("simulate", help="run a simulation experiment from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--compare", action="store_true",
                   help="report both the unstudentized and the studentized statistic")
    s.add_argument("--histogram", action="store_true")

    sub.add_parser("version", help="print version information")
    return parser


def _load(path, args, reference=None, name=None):
    m = read_network(path, args.fmt, args.n_units)
    if reference is not None:
        m = align_to(reference, m, name or str(path))
    return m


def _design(args):
    a = _load(args.a, args)
    focal = [_load(p, args, a, p) for p in args.b]
    nuisance = [_load(p, args, a, p) for p in args.c]
    names = [Path(p).stem for p in list(args.b) + list(args.c)]
    if len(set(names)) != len(names):
        names = [f"{stem}#{k + 1}" for k, stem in enumerate(names)]
    design = make_design(a, focal, nuisance, names)
    inputs = {"a": input_record(args.a)}
    for k, p in enumerate(args.b):
        inputs[f"b{k + 1}"] = input_record(p)
    for k, p in enumerate(args.c):
        inputs[f"c{k + 1}"] = input_record(p)
    return design, inputs


def _units(m):
    return {"n": m.n, "labels": list(m.labels) if m.labels is not None else None}


def _report_dict(report, extra=None):
    out = {
        "observed": report.observed,
        "pvalue": report.pvalue,
        "alternative": report.alternative,
        "mode": report.mode,
        "n_reps": report.n_reps,
        "seed": report.seed,
        "statistic": report.statistic,
        "strategy": report.strategy,
        "ties": report.ties,
        "rng_algorithm": report.rng_algorithm,
        "eta1_correction": report.eta1_correction,
        "replicates": report.replicates,
    }
    out.update(extra or {})
    return out


def _cmd_qap(args):
    a = _load(args.a, args)
    b = _load(args.b, args, a, args.b)
    report = run_qap(a, b, args.statistic, args.reps, args.seed,
                     eta1_correction=args.eta1_correction, ties=args.ties)
    est = qap_estimates(a, b, args.eta1_correction)
    result = _report_dict(report, {"estimates": est, "units": _units(a)})
    inputs = {"a": input_record(args.a), "b": input_record(args.b)}
    return result, inputs, report.replicates if args.histogram else None


def _fit_dict(design, fit):
    names = list(fit.names)
    return {
        "names": names,
        "focal": names[: fit.p],
        "intercept": fit.intercept,
        "coef": fit.coef,
        "standard_errors": fit.standard_errors,
        "v_hat": fit.v_hat,
        "sigma_hat": fit.sigma_hat,
        "h1_phi_hat": fit.h1_phi_hat,
        "eta1_correction": fit.eta1_correction,
        "n": fit.n,
        "units": _units(design.outcome),
    }


def _cmd_mrqap(args):
    design, inputs = _design(args)
    report = run_mrqap(design, args.strategy, args.statistic, args.reps, args.seed,
                       eta1_correction=args.eta1_correction, ties=args.ties)
    fit = fit_dyadic_ols(design, args.eta1_correction)
    result = _report_dict(report, {"fit": _fit_dict(design, fit)})
    return result, inputs, report.replicates if args.histogram else None


def _cmd_fit(args):
    design, inputs = _design(args)
    fit = fit_dyadic_ols(design, args.eta1_correction)
    result = _fit_dict(design, fit)
    result["wald"] = wald_statistic(fit)
    if design.p == 1 and design.q == 0:
        result["studentized_qap"] = studentized_statistic(
            qap_estimates(design.outcome, design.focal[0], args.eta1_correction)
        )
    n = design.n
    if fit.eta1_correction == "sen":
        lz = cluster_robust_variance(design, fit)
        factor = 4 * n * n * (n - 1) / ((n - 2) * (n - 4))
        slope = factor * lz[1:, 1:]
        scale = max(float(abs(fit.v_hat).max()), 1e-300)
        result["cluster_robust"] = {
            "v_lz": lz,
            "factor": factor,
            "max_relative_difference": float(abs(slope - fit.v_hat).max()) / scale,
        }
    return result, inputs, None


def _summary_dict(summary):
    return {
        "n": summary.n,
        "reps": summary.reps,
        "statistic": summary.statistic,
        "law": summary.law,
        "reference": summary.reference,
        "ks_distance": summary.ks_distance,
        "rejection_rate_at": {repr(a): r for a, r in summary.rejection_rate_at.items()},
        "statistic_samples": summary.statistic_samples,
        "pvalues": summary.pvalues,
    }


def _cmd_simulate(args):
    with open(args.config, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DyadValidationError(f"{args.config}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise DyadValidationError(f"{args.config}: the config must be a JSON object")
    config = ExperimentConfig.from_mapping(doc)
    inputs = {"config": input_record(args.config)}
    if args.compare:
        summaries = compare_statistics(config)
        result = {"config": doc, "summaries": {k: _summary_dict(v) for k, v in summaries.items()}}
        hist = summaries[config.statistic].statistic_samples
    else:
        summary = run_experiment(config)
        result = {"config": doc, "summary": _summary_dict(summary)}
        hist = summary.statistic_samples
    return result, inputs, hist if args.histogram else None


COMMANDS = {"qap": _cmd_qap, "mrqap": _cmd_mrqap, "fit": _cmd_fit, "simulate": _cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.command == "version":
        print(f"dyadperm {__version__} (rng {ALGORITHM})")
        return EXIT_OK
    try:
        configure_threads()
        start = time.perf_counter()
        result, inputs, hist = COMMANDS[args.command](args)
        timing = {"seconds": time.perf_counter() - start} if args.timing else None
        text = dumps_report(report_document(args.command, result, inputs, hist, timing))
    except DyadNumericalError as exc:
        print(f"dyadperm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DyadValidationError, ValueError, OSError) as exc:
        print(f"dyadperm: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
