"""Command-line front end.

Subcommands: simulate, fit, equiv, verify, validate, demo.  Machine-readable
output goes to files (written all-or-nothing); standard output carries a
short human-readable summary only.

Exit codes: 0 ok, 2 invalid input, 3 I/O failure, 4 fit hit --max-iter,
5 non-monotone likelihood, 6 admissibility condition violated.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fixtures, plotting
from .equivalence import check_conditions, construct_equivalent, verify_equivalence
from .errors import (BlockMarkovError, ComplexEigenvalues, ConditionViolation,
                     NonMonotoneLikelihood)
from .inference import conventional_fit_trace, fit
from .io import (FormatError, commit_files, dumps, efrd_to_csv, fit_report_to_dict,
                 model_to_text, read_model, read_sequence, summary_to_csv)
from .markov import RNG_ALGORITHM, simulate
from .rle import decode, efrd, efrd_max_deviation, encode, error_probability

log = logging.getLogger("blockmarkov")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3
EXIT_MAX_ITER = 4
EXIT_NON_MONOTONE = 5
EXIT_CONDITION = 6

DEFAULT_LEN = 20000
DEFAULT_EFRD_M = 30


class InvalidInput(Exception):
    pass


@dataclass
class ExperimentConfig:
    models: list
    seq: Path | None = None
    length: int = DEFAULT_LEN
    seed: int | None = None
    tol: float = 1e-6
    max_iter: int = 500
    out: Path | None = None
    stationary_pi: bool = False
    oracle: bool = False
    max_len: int = 8

    def __post_init__(self):
        for p in list(self.models) + ([self.seq] if self.seq else []):
            if not Path(p).is_file():
                raise InvalidInput(f"no such file: {p}")
        if self.length < 1:
            raise InvalidInput("--len must be >= 1")
        if self.tol <= 0:
            raise InvalidInput("--tol must be > 0")
        if self.max_iter < 0:
            raise InvalidInput("--max-iter must be >= 0")


def _config(args) -> ExperimentConfig:
    models = []
    for name in ("model", "init"):
        v = getattr(args, name, None)
        if v:
            models.extend(v if isinstance(v, list) else [v])
    return ExperimentConfig(
        models=models,
        seq=getattr(args, "seq", None),
        length=getattr(args, "len", DEFAULT_LEN),
        seed=getattr(args, "seed", None),
        tol=getattr(args, "tol", 1e-6),
        max_iter=getattr(args, "max_iter", 500),
        out=getattr(args, "out", None),
        stationary_pi=getattr(args, "stationary_pi", False),
        oracle=getattr(args, "oracle", False),
        max_len=getattr(args, "max_len", 8),
    )


def _load_model(path):
    try:
        return read_model(path)
    except (FormatError, BlockMarkovError, ValueError) as exc:
        raise InvalidInput(f"{path}: invalid model: {exc}") from None


def _load_sequence(path, alphabet):
    try:
        return read_sequence(path, alphabet)
    except (FormatError, BlockMarkovError, ValueError, UnicodeDecodeError) as exc:
        raise InvalidInput(f"{path}: invalid sequence: {exc}") from None


def cmd_simulate(args) -> int:
    cfg = _config(args)
    model, _ = _load_model(cfg.models[0])
    seq = simulate(model, cfg.length, cfg.seed)
    runs = encode(seq, model.alphabet)
    body = runs.to_text() + "\n" if args.rle else seq + "\n"
    commit_files({cfg.out: body})
    if model.alphabet.is_binary:
        print(f"error probability: {error_probability(runs):.6f}")
    print(f"runs: {len(runs)}")
    print(f"symbols: {cfg.length} ({RNG_ALGORITHM}, seed {cfg.seed})")
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _config(args)
    model, initial = _load_model(cfg.models[0])
    if not model.is_block_diagonal:
        raise InvalidInput("initial model must be block-diagonal (use `equiv` to convert)")
    runs = _load_sequence(cfg.seq, model.alphabet)
    try:
        report = fit(model, runs, tol=cfg.tol, max_iter=cfg.max_iter,
                     stationary_pi=cfg.stationary_pi, initial_distribution=initial)
    except NonMonotoneLikelihood as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("trace: " + json.dumps(exc.trace), file=sys.stderr)
        return EXIT_NON_MONOTONE
    except ValueError as exc:
        raise InvalidInput(str(exc)) from None
    payload = fit_report_to_dict(report)
    if cfg.oracle:
        seq = decode(runs)
        trace, oracle_model, _ = conventional_fit_trace(model, seq, report.iterations, initial)
        d_ll = float(np.max(np.abs(np.subtract(trace, report.loglik_trace))))
        d_lam = float(np.max(np.abs(oracle_model.transition - report.final_model.transition)))
        payload["oracle"] = {"max_loglik_discrepancy": d_ll, "max_transition_discrepancy": d_lam}
        print(f"oracle: max log-likelihood discrepancy {d_ll:.3g}, "
              f"max transition discrepancy {d_lam:.3g}")
    out = Path(cfg.out)
    commit_files({
        out / "fitted.model": model_to_text(report.final_model, report.final_initial),
        out / "fit_report.json": dumps(payload),
        out / "loglik.png": plotting.trace_figure(report.loglik_trace, "fit log-likelihood"),
    })
    print(f"iterations: {report.iterations}")
    print(f"stop reason: {report.stop_reason}")
    print(f"final log-likelihood: {report.log_likelihood:.10g}")
    return EXIT_OK if report.converged else EXIT_MAX_ITER


def cmd_equiv(args) -> int:
    cfg = _config(args)
    model, _ = _load_model(cfg.models[0])
    out = Path(cfg.out)
    report = check_conditions(model)
    for e in report.entries:
        where = f" [block {e.symbol}, indices {e.indices}]" if not e.passed and e.symbol else ""
        print(f"condition {e.cond_id:>3}: {'pass' if e.passed else 'FAIL'} "
              f"(margin {e.margin:.4g}){where} {e.detail}")
    try:
        lam, W = construct_equivalent(model)
    except (ConditionViolation, ComplexEigenvalues) as exc:
        commit_files({out / "conditions.json": dumps({"version": 1, **report.to_dict()})})
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONDITION
    transform = {"version": 1, "W": [[float(x) for x in row] for row in W.matrix],
                 "eigenvalues": [[float(x) for x in ev] for ev in W.eigenvalues]}
    commit_files({
        out / "lambda.model": model_to_text(lam),
        out / "conditions.json": dumps({"version": 1, **report.to_dict()}),
        out / "transform.json": dumps(transform),
    })
    print(f"wrote {out / 'lambda.model'}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _config(args)
    if len(cfg.models) != 2:
        raise InvalidInput("verify needs exactly two --model files")
    a, _ = _load_model(cfg.models[0])
    b, _ = _load_model(cfg.models[1])
    try:
        disc = verify_equivalence(a, b, cfg.max_len)
    except BlockMarkovError as exc:
        raise InvalidInput(str(exc)) from None
    print(f"max relative likelihood discrepancy (length <= {cfg.max_len}): {disc:.3e}")
    return EXIT_OK


def _validation(measured_runs, model, seed: int, efrd_m: int) -> tuple:
    """Regenerate a same-length sequence and compare its statistics."""
    regen = simulate(model, measured_runs.total_length, seed)
    regen_runs = encode(regen, model.alphabet)
    e_meas = efrd(measured_runs)
    e_model = efrd(regen_runs)
    pe, pe_bar = error_probability(measured_runs), error_probability(regen_runs)
    stats = {
        "version": 1,
        "length": measured_runs.total_length,
        "seed": seed,
        "rng": RNG_ALGORITHM,
        "pe_measured": pe,
        "pe_model": pe_bar,
        "pe_difference": pe - pe_bar,
        "efrd_max_dev": efrd_max_deviation(e_meas, e_model),
        "efrd_max_dev_m": efrd_m,
        "efrd_max_dev_upto_m": efrd_max_deviation(e_meas, e_model, efrd_m),
        "pe_model_stationary": float(model.symbol_probabilities()[model.alphabet.index("1")]),
    }
    return regen, e_meas, e_model, stats


def cmd_validate(args) -> int:
    cfg = _config(args)
    model, _ = _load_model(cfg.models[0])
    runs = _load_sequence(cfg.seq, model.alphabet)
    try:
        regen, e_meas, e_model, stats = _validation(runs, model, cfg.seed, args.efrd_m)
    except BlockMarkovError as exc:
        raise InvalidInput(f"{type(exc).__name__}: {exc}") from None
    out = Path(cfg.out)
    commit_files({
        out / "regenerated.seq": regen + "\n",
        out / "efrd_measured.csv": efrd_to_csv(e_meas, str(cfg.seq)),
        out / "efrd_model.csv": efrd_to_csv(e_model, f"regenerated from {cfg.models[0]}"),
        out / "validation.json": dumps(stats),
        out / "efrd.png": plotting.efrd_figure({"measured": e_meas, "model": e_model}),
    })
    print(f"P_e (measured):    {stats['pe_measured']:.4f}")
    print(f"P_e (model):       {stats['pe_model']:.4f}")
    print(f"difference:        {stats['pe_difference']:+.4f}")
    print(f"EFRD max |dev| (m <= {max(e_meas.m_max, e_model.m_max)}): {stats['efrd_max_dev']:.4f}")
    print(f"EFRD max |dev| (m <= {args.efrd_m}): {stats['efrd_max_dev_upto_m']:.4f}")
    return EXIT_OK


def run_cell(cell: str, length: int, seed: int, tol: float, max_iter: int,
             stationary_pi: bool = False, efrd_m: int = DEFAULT_EFRD_M) -> dict:
    """simulate -> fit -> validate for one cell.

    The "measured" sequence is drawn from the converged fixture model with
    ``seed``; the fit starts from the initial fixture; the regenerated
    sequence uses ``seed + 1``.
    """
    truth = fixtures.load_cell(cell, "converged")
    start = fixtures.load_cell(cell, "initial")
    measured = simulate(truth, length, seed)
    runs = encode(measured, truth.alphabet)
    report = fit(start, runs, tol=tol, max_iter=max_iter, stationary_pi=stationary_pi)
    regen, e_meas, e_model, stats = _validation(runs, report.final_model, seed + 1, efrd_m)
    return {
        "cell": cell,
        "measured": measured,
        "regenerated": regen,
        "report": report,
        "efrd_measured": e_meas,
        "efrd_model": e_model,
        "stats": stats,
        "row": {
            "cell": cell,
            "pe_measured": stats["pe_measured"],
            "pe_model": stats["pe_model"],
            "efrd_max_dev": stats["efrd_max_dev_upto_m"],
            "iterations": report.iterations,
            "loglik": report.log_likelihood,
        },
    }


def cmd_demo(args) -> int:
    cfg = _config(args)
    cells = args.cells or list(fixtures.CELLS)
    jobs = [(cell, cfg.length, cfg.seed + 2 * i, cfg.tol, cfg.max_iter, cfg.stationary_pi, args.efrd_m)
            for i, cell in enumerate(cells)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_cell, *zip(*jobs)))
    else:
        results = [run_cell(*j) for j in jobs]
    out = Path(cfg.out)
    files = {}
    for res in results:
        d = out / res["cell"]
        files[d / "measured.seq"] = res["measured"] + "\n"
        files[d / "regenerated.seq"] = res["regenerated"] + "\n"
        files[d / "fitted.model"] = model_to_text(res["report"].final_model, res["report"].final_initial)
        files[d / "fit_report.json"] = dumps(fit_report_to_dict(res["report"], RNG_ALGORITHM))
        files[d / "validation.json"] = dumps(res["stats"])
        files[d / "efrd_measured.csv"] = efrd_to_csv(res["efrd_measured"], "measured")
        files[d / "efrd_model.csv"] = efrd_to_csv(res["efrd_model"], "model")
        files[d / "efrd.png"] = plotting.efrd_figure(
            {"measured": res["efrd_measured"], "model": res["efrd_model"]},
            title=res["cell"].replace("_", " "))
    rows = [r["row"] for r in results]
    files[out / "summary.csv"] = summary_to_csv(rows)
    files[out / "summary.png"] = plotting.summary_figure(rows)
    commit_files(files)
    print(f"{'cell':<14} {'P_e':>8} {'P_e model':>10} {'EFRD dev':>9} {'iter':>5} {'loglik':>12}")
    for r in rows:
        print(f"{r['cell']:<14} {r['pe_measured']:>8.4f} {r['pe_model']:>10.4f} "
              f"{r['efrd_max_dev']:>9.4f} {r['iterations']:>5d} {r['loglik']:>12.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blockmarkov", description="Block-diagonal Markov modelling of bursty error channels.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def fit_opts(sp):
        sp.add_argument("--tol", type=float, default=1e-6, help="relative log-likelihood tolerance")
        sp.add_argument("--max-iter", type=int, default=500)
        sp.add_argument("--stationary-pi", action="store_true",
                        help="re-estimate the initial distribution as the stationary vector")

    sp = sub.add_parser("simulate", help="sample an error sequence from a model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--len", type=int, default=DEFAULT_LEN)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True, help="sequence file to write")
    sp.add_argument("--rle", action="store_true", help="write sym^count tokens instead of symbols")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="modified Baum-Welch fit of a block-diagonal model")
    sp.add_argument("--init", required=True, help="initial block-diagonal model")
    sp.add_argument("--seq", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--oracle", action="store_true",
                    help="also run the per-symbol Baum-Welch and report the discrepancy")
    fit_opts(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("equiv", help="check conditions i-v and build the block-diagonal model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_equiv)

    sp = sub.add_parser("verify", help="compare two models' likelihoods on all short sequences")
    sp.add_argument("--model", action="append", required=True, help="give twice")
    sp.add_argument("--max-len", type=int, default=8)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("validate", help="EFRD and error-probability validation of a model")
    sp.add_argument("--seq", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--efrd-m", type=int, default=DEFAULT_EFRD_M,
                    help="report the EFRD deviation for m up to this value as well")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("demo", help="simulate -> fit -> validate on the six fixture cells")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--len", type=int, default=DEFAULT_LEN)
    sp.add_argument("--cells", nargs="*", choices=fixtures.CELLS)
    sp.add_argument("--jobs", type=int, default=1, help="cells fitted in parallel")
    sp.add_argument("--efrd-m", type=int, default=DEFAULT_EFRD_M)
    fit_opts(sp)
    sp.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvalidInput as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except BlockMarkovError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
