"""Alpha sweep over sampled prior shifts, binned by shift severity."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .inference import ScoreTable, predict_table
from .io import read_scores
from .priors import DEFAULT_PSEUDOCOUNT, JointPrior, estimate_prior, pair_counts, read_counts
from .rank import SeverityBins, severity_bins
from .shift import (
    DEFAULT_NOISE_RANGE,
    DEFAULT_SHUFFLE_RANGE,
    ShiftedPrior,
    ShiftSpec,
    cell_ratios,
    correct_mask,
    importance_ratios,
    pooled_effective_sample_size,
    pooled_weighted_accuracy,
    sample_shift,
)

log = logging.getLogger(__name__)

DEFAULT_ALPHA_GRID = tuple(round(0.1 * i, 1) for i in range(11))


class SweepError(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHA_GRID
    n_shifts: int = 500
    n_bins: int = 5
    seed: int = 0
    epsilon: float = DEFAULT_PSEUDOCOUNT
    shuffle_fraction_range: tuple[float, float] = DEFAULT_SHUFFLE_RANGE
    noise_sigma_range: tuple[float, float] = DEFAULT_NOISE_RANGE
    target: str = "main"
    scores_path: str | None = None
    counts_path: str | None = None
    out_dir: str = "runs"
    run_id: str | None = None

    def __post_init__(self):
        grid = tuple(float(a) for a in self.alpha_grid)
        object.__setattr__(self, "alpha_grid", grid)
        if not grid or grid[0] != 0.0:
            raise SweepError("alpha_grid must start at 0 (the discriminative baseline)")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise SweepError(f"alpha_grid must be strictly increasing, got {grid}")
        if grid[-1] > 1.0:
            raise SweepError(f"alpha_grid must lie in [0, 1], got {grid}")
        if self.n_shifts < 1:
            raise SweepError("n_shifts must be >= 1")
        if self.n_bins < 2:
            raise SweepError("n_bins must be >= 2")
        if self.target not in ("main", "aux"):
            raise SweepError(f"target must be 'main' or 'aux', got {self.target!r}")
        object.__setattr__(self, "shuffle_fraction_range", tuple(self.shuffle_fraction_range))
        object.__setattr__(self, "noise_sigma_range", tuple(self.noise_sigma_range))

    def shift_spec(self) -> ShiftSpec:
        return ShiftSpec(self.shuffle_fraction_range, self.noise_sigma_range, self.seed)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    def resolved_run_id(self) -> str:
        if self.run_id:
            return self.run_id
        payload = dataclasses.asdict(self)
        payload.pop("out_dir")
        digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
        return f"seed{self.seed}-{digest[:10]}"


class ReplicateResult(NamedTuple):
    replicate: int
    shift: ShiftedPrior
    ess: float
    accuracies: tuple[float, ...]


class BinSummary(NamedTuple):
    bin: int
    lo: float
    hi: float
    midpoint: float
    n_replicates: int
    optimal_alpha: float
    accuracy_optimal: float
    accuracy_dmtl: float
    gap: float
    mean_accuracy: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class SweepResult:
    config: SweepConfig
    replicates: tuple[ReplicateResult, ...]
    bins: SeverityBins
    summaries: tuple[BinSummary, ...]

    @property
    def taus(self) -> np.ndarray:
        return np.array([r.shift.tau_vs_base for r in self.replicates])

    def rows(self):
        """(replicate, tau, alpha, weighted_accuracy, ess) per replicate and alpha."""
        for r in self.replicates:
            for alpha, acc in zip(self.config.alpha_grid, r.accuracies):
                yield (r.replicate, r.shift.tau_vs_base, alpha, acc, r.ess)

    def populated(self) -> tuple[BinSummary, ...]:
        return tuple(s for s in self.summaries if s.n_replicates > 0)


def replicate_seeds(seed: int, n: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def _summarize(grid, replicates, bins: SeverityBins) -> tuple[BinSummary, ...]:
    acc = np.array([r.accuracies for r in replicates])
    out = []
    for b in range(bins.n_bins):
        members = np.flatnonzero(bins.assignments == b)
        lo, hi = float(bins.edges[b]), float(bins.edges[b + 1])
        mid = float(bins.midpoints[b])
        if len(members) == 0:
            nan = float("nan")
            out.append(BinSummary(b, lo, hi, mid, 0, nan, nan, nan, nan, ()))
            continue
        mean = tuple(math.fsum(acc[members, j]) / len(members) for j in range(len(grid)))
        best = int(np.argmax(mean))  # first maximum, i.e. the smallest alpha
        out.append(
            BinSummary(b, lo, hi, mid, len(members), grid[best], mean[best], mean[0],
                       mean[best] - mean[0], mean)
        )
    empty = [s.bin for s in out if s.n_replicates == 0]
    if empty:
        warnings.warn(f"severity bins {empty} received no replicates")
    return tuple(out)


def sweep(
    scores: ScoreTable,
    prior: JointPrior,
    config: SweepConfig,
    workers: int = 1,
) -> SweepResult:
    """Run the alpha sweep on in-memory scores against ``prior``.

    Predictions depend only on alpha and the prior, so they are computed once
    per grid point.  Importance weights depend only on the label pair, so
    each replicate reweights per-cell correct counts instead of examples.
    """
    if scores.shape != prior.shape:
        raise SweepError(f"scores shape {scores.shape} does not match prior {prior.shape}")
    grid = config.alpha_grid
    shape = prior.shape
    # any unsupported observed pair fails here, before the replicates start
    importance_ratios(prior, prior, scores.label_main, scores.label_aux)
    cell_total = pair_counts(scores.label_main, scores.label_aux, shape)
    cell_correct = []
    for a in grid:
        correct = correct_mask(scores, predict_table(scores, prior, a), config.target)
        cell_correct.append(
            pair_counts(scores.label_main[correct], scores.label_aux[correct], shape)
        )
    base_spec = config.shift_spec()
    seeds = replicate_seeds(config.seed, config.n_shifts)

    def run_one(i: int) -> ReplicateResult:
        shift = sample_shift(prior, base_spec.with_seed(seeds[i]))
        ratios = cell_ratios(prior, shift.q)
        ess = pooled_effective_sample_size(ratios, cell_total)
        accuracies = tuple(pooled_weighted_accuracy(ratios, c, cell_total) for c in cell_correct)
        return ReplicateResult(i, shift, ess, accuracies)

    if workers <= 1:
        replicates = [run_one(i) for i in range(config.n_shifts)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            replicates = list(pool.map(run_one, range(config.n_shifts)))
    replicates.sort(key=lambda r: r.replicate)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        bins = severity_bins([r.shift.tau_vs_base for r in replicates], config.n_bins)
    if bins.degenerate:
        warnings.warn("all sampled shifts have the same tau; severity bins are degenerate")
    return SweepResult(config, tuple(replicates), bins, _summarize(grid, replicates, bins))


def load_inputs(config: SweepConfig) -> tuple[ScoreTable, JointPrior]:
    if not config.scores_path:
        raise SweepError("no scores file configured")
    scores = read_scores(config.scores_path)
    if config.counts_path:
        counts = read_counts(config.counts_path, shape=scores.shape)
    else:
        counts = pair_counts(scores.label_main, scores.label_aux, scores.shape)
    return scores, estimate_prior(counts, config.epsilon)


def run_sweep(config: SweepConfig, workers: int = 1, write: bool = True) -> SweepResult:
    scores, prior = load_inputs(config)
    result = sweep(scores, prior, config, workers=workers)
    if write:
        path = write_result(result)
        log.info("wrote sweep outputs to %s", path)
    return result


class AlphaCorrelation(NamedTuple):
    value: float
    zero_variance: bool


def pearson(x, y) -> AlphaCorrelation:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = math.fsum(dx * dx), math.fsum(dy * dy)
    if sxx == 0.0 or syy == 0.0:
        return AlphaCorrelation(0.0, True)
    return AlphaCorrelation(math.fsum(dx * dy) / math.sqrt(sxx * syy), False)


def optimal_alpha_correlation(result: SweepResult) -> AlphaCorrelation:
    """Pearson correlation of bin midpoint tau against the bin's optimal alpha."""
    bins = result.populated()
    if len(bins) < 2 or result.bins.degenerate:
        raise SweepError(f"need at least 2 non-degenerate bins, got {len(bins)}")
    return pearson([b.midpoint for b in bins], [b.optimal_alpha for b in bins])


def gap_curve(result: SweepResult) -> list[tuple[float, float]]:
    return [(b.midpoint, b.gap) for b in result.populated()]


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def shifts_csv(result: SweepResult) -> str:
    return _csv_text(
        ("replicate", "shuffle_fraction", "noise_sigma", "tau", "ess"),
        ((r.replicate, r.shift.shuffle_fraction, r.shift.noise_sigma,
          r.shift.tau_vs_base, r.ess) for r in result.replicates),
    )


def sweep_csv(result: SweepResult) -> str:
    return _csv_text(("replicate", "tau", "alpha", "weighted_accuracy", "ess"), result.rows())


def bins_csv(result: SweepResult) -> str:
    header = ("bin", "tau_lo", "tau_hi", "tau_midpoint", "n_replicates", "optimal_alpha",
              "accuracy_optimal", "accuracy_alpha0", "gap")
    rows = []
    for s in result.summaries:
        rows.append(tuple(s[:5]) + tuple("" if s.n_replicates == 0 else v for v in s[5:9]))
    return _csv_text(header, rows)


def write_result(result: SweepResult) -> Path:
    config = result.config
    run_dir = Path(config.out_dir) / config.resolved_run_id()
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "sweep.csv").write_text(sweep_csv(result))
    (run_dir / "bins.csv").write_text(bins_csv(result))
    (run_dir / "shifts.csv").write_text(shifts_csv(result))
    (run_dir / "config.echo").write_text(config.to_json())
    return run_dir
