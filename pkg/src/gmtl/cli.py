"""Command-line entry point: ``gmtl <subcommand> ...``.

Errors are reported on stderr as a single ``error: <Kind>: <message>`` line
with exit status 1.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .inference import predict_table
from .io import write_scores
from .priors import (
    DEFAULT_PSEUDOCOUNT,
    BivariateBernoulliParams,
    estimate_prior,
    pair_counts,
    read_counts,
    write_counts,
)
from .shift import (
    DEFAULT_NOISE_RANGE,
    DEFAULT_SHUFFLE_RANGE,
    ShiftSpec,
    effective_sample_size,
    importance_weighted_accuracy,
    importance_weights,
    sample_shift,
)
from .synthetic import MixtureSpec, dmtl_boundary, gmtl_boundary, oracle_scores

log = logging.getLogger("gmtl")


def float_list(values) -> list[float]:
    """Accept ``--flag 0,0.5,1`` as well as ``--flag 0 0.5 1``."""
    if isinstance(values, str):
        values = [values]
    out = []
    for v in values:
        out.extend(float(x) for x in v.split(",") if x.strip())
    return out


def _add_common(p, *, alpha_grid=True):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=DEFAULT_PSEUDOCOUNT,
                   help="pseudocount added to every pair count (default: 1)")
    if alpha_grid:
        p.add_argument("--alpha-grid", nargs="+", default=None,
                       help="comma- or space-separated alphas (default: 0,0.1,...,1)")


def _add_shift_flags(p):
    p.add_argument("--shuffle-max", type=float, default=DEFAULT_SHUFFLE_RANGE[1])
    p.add_argument("--noise-max", type=float, default=DEFAULT_NOISE_RANGE[1])


def _alpha_grid(args) -> tuple[float, ...]:
    if args.alpha_grid is None:
        return harness.DEFAULT_ALPHA_GRID
    return tuple(float_list(args.alpha_grid))


def _shift_ranges(args):
    return ((DEFAULT_SHUFFLE_RANGE[0], args.shuffle_max),
            (min(DEFAULT_NOISE_RANGE[0], args.noise_max), args.noise_max))


def _write_csv(rows, header, out=None):
    writer = csv.writer(out or sys.stdout, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def cmd_estimate_prior(args):
    prior = estimate_prior(read_counts(args.counts), args.epsilon)
    rows = [(y, yp, float(prior.probs[y, yp]), float(prior.log_probs[y, yp]))
            for (y, yp) in np.ndindex(prior.shape)]
    _write_csv(rows, ("y", "y_prime", "prob", "log_prob"))


def _load(args):
    config = harness.SweepConfig(
        alpha_grid=_alpha_grid(args),
        seed=args.seed,
        epsilon=args.epsilon,
        scores_path=args.scores,
        counts_path=args.counts,
    )
    return config, *harness.load_inputs(config)


def cmd_evaluate(args):
    config, scores, prior = _load(args)
    shuffle, noise = _shift_ranges(args)
    shift = sample_shift(prior, ShiftSpec(shuffle, noise, args.seed))
    ess = effective_sample_size(
        importance_weights(prior, shift.q, scores.label_main, scores.label_aux)
    )
    rows = []
    for alpha in config.alpha_grid:
        pred = predict_table(scores, prior, alpha)
        acc = importance_weighted_accuracy(scores, pred, prior, shift.q, args.target)
        rows.append((alpha, shift.tau_vs_base, acc, ess))
    _write_csv(rows, ("alpha", "tau", "weighted_accuracy", "ess"))


def cmd_sweep(args):
    shuffle, noise = _shift_ranges(args)
    config = harness.SweepConfig(
        alpha_grid=_alpha_grid(args),
        n_shifts=args.n_shifts,
        n_bins=args.n_bins,
        seed=args.seed,
        epsilon=args.epsilon,
        shuffle_fraction_range=shuffle,
        noise_sigma_range=noise,
        target=args.target,
        scores_path=args.scores,
        counts_path=args.counts,
        out_dir=args.out_dir,
        run_id=args.run_id,
    )
    result = harness.run_sweep(config, workers=args.workers, write=False)
    run_dir = harness.write_result(result)
    print(run_dir)
    try:
        corr = harness.optimal_alpha_correlation(result)
        log.info("tau vs optimal alpha correlation: %.4f%s", corr.value,
                 " (zero variance)" if corr.zero_variance else "")
    except harness.SweepError as exc:
        log.warning("%s", exc)


def _mixture(args, cov) -> MixtureSpec:
    return MixtureSpec(
        tuple(args.means), tuple(args.variances),
        BivariateBernoulliParams(args.p, args.p_prime, cov),
    )


def cmd_boundary(args):
    rows = []
    for cov in float_list(args.cov_grid):
        spec = _mixture(args, cov)
        interval = tuple(args.interval)
        rows.append((cov, dmtl_boundary(spec, interval), gmtl_boundary(spec, args.alpha, interval)))
    _write_csv(rows, ("cov", "dmtl_boundary", "gmtl_boundary"))


def cmd_synth_scores(args):
    spec = _mixture(args, args.cov)
    test_seed, train_seed = np.random.SeedSequence(args.seed).spawn(2)
    _, table = oracle_scores(spec, args.n, test_seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_scores(out / "scores.tsv", table)
    # the prior is estimated from a separate training draw
    _, train = oracle_scores(spec, args.n_train or args.n, train_seed)
    write_counts(out / "counts.tsv", pair_counts(train.label_main, train.label_aux, (2, 2)))
    print(out)


def _add_mixture_flags(p):
    p.add_argument("--p", type=float, default=0.5, help="P(Y=1)")
    p.add_argument("--p-prime", type=float, default=0.5, help="P(Y'=1)")
    p.add_argument("--means", type=float, nargs=4, default=[0.0, 1.0, 2.0, 3.0])
    p.add_argument("--variances", type=float, nargs=4, default=[0.4, 0.4, 0.6, 0.6])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmtl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate-prior", help="smoothed p(y, y') from a counts file")
    p.add_argument("--counts", required=True)
    p.add_argument("--epsilon", type=float, default=DEFAULT_PSEUDOCOUNT)
    p.set_defaults(func=cmd_estimate_prior)

    for name, func, help_ in (
        ("evaluate", cmd_evaluate, "weighted accuracy per alpha under one sampled shift"),
        ("sweep", cmd_sweep, "full alpha sweep over sampled shifts"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--scores", required=True)
        p.add_argument("--counts", default=None,
                       help="pair counts for the prior (default: labels in --scores)")
        p.add_argument("--target", choices=("main", "aux"), default="main")
        _add_common(p)
        _add_shift_flags(p)
        p.set_defaults(func=func)
        if name == "sweep":
            p.add_argument("--n-shifts", type=int, default=500)
            p.add_argument("--n-bins", type=int, default=5)
            p.add_argument("--out-dir", default="runs")
            p.add_argument("--run-id", default=None)
            p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("boundary", help="decision boundaries of the synthetic mixture")
    p.add_argument("--cov-grid", nargs="+", default=["-0.2,-0.1,0,0.1,0.2"])
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--interval", type=float, nargs=2, default=[-5.0, 8.0])
    _add_mixture_flags(p)
    p.set_defaults(func=cmd_boundary)

    p = sub.add_parser("synth-scores", help="oracle scores and counts from the synthetic mixture")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--n-train", type=int, default=None)
    p.add_argument("--cov", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    _add_mixture_flags(p)
    p.set_defaults(func=cmd_synth_scores)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        message = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
