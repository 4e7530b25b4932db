"""Simulated prior probability shift and importance-weighted evaluation.

A shifted prior q(y, y') is made by shuffling a random prefix of the base
log-prior cells and adding Gaussian noise in the log domain.  Accuracy under
q is estimated from examples drawn under the base prior p with
self-normalized weights ``q(y_n, y'_n) / p(y_n, y'_n)``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .inference import ScoreTable, as_table
from .priors import JointPrior, PriorSource
from .rank import weighted_kendall_tau

DEFAULT_SHUFFLE_RANGE = (0.0, 0.5)
DEFAULT_NOISE_RANGE = (1e-12, 5.0)


class ShiftError(ValueError):
    pass


def _check_range(name, rng, upper=None):
    lo, hi = (float(v) for v in rng)
    if not (0.0 <= lo <= hi) or (upper is not None and hi > upper):
        bound = f"[0, {upper}]" if upper is not None else "[0, inf)"
        raise ShiftError(f"{name} must be a nonempty interval within {bound}, got {rng}")
    return (lo, hi)


@dataclass(frozen=True)
class ShiftSpec:
    """Ranges for the shuffle fraction and log-noise scale, plus the seed.

    A range with equal ends pins the value, e.g. ``noise_sigma_range=(0, 0)``
    gives a pure permutation.
    """

    shuffle_fraction_range: tuple[float, float] = DEFAULT_SHUFFLE_RANGE
    noise_sigma_range: tuple[float, float] = DEFAULT_NOISE_RANGE
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "shuffle_fraction_range",
            _check_range("shuffle_fraction_range", self.shuffle_fraction_range, 1.0),
        )
        object.__setattr__(
            self, "noise_sigma_range",
            _check_range("noise_sigma_range", self.noise_sigma_range),
        )

    def with_seed(self, seed: int) -> "ShiftSpec":
        return ShiftSpec(self.shuffle_fraction_range, self.noise_sigma_range, seed)


@dataclass(frozen=True, eq=False)
class ShiftedPrior:
    q: JointPrior
    shuffle_fraction: float
    noise_sigma: float
    tau_vs_base: float


def shuffle_cutoff(shuffle_fraction: float, n_cells: int) -> int:
    """Number of leading cells to shuffle, rounded half-up and clamped."""
    return int(min(max(math.floor(shuffle_fraction * n_cells + 0.5), 0), n_cells))


def shuffle_and_perturb(
    flat_log_probs: np.ndarray,
    order: np.ndarray,
    permutation: np.ndarray,
    noise: np.ndarray,
) -> np.ndarray:
    """Apply one shift to log-probabilities given all random choices.

    ``order[k]`` is the cell holding index k.  The first
    ``len(permutation)`` indices take the value at index ``permutation[k]``;
    the rest keep their own.  ``noise`` is added per cell afterwards.
    """
    flat = np.asarray(flat_log_probs, dtype=np.float64)
    order = np.asarray(order)
    cutoff = len(permutation)
    out = flat.copy()
    out[order[:cutoff]] = flat[order[np.asarray(permutation, dtype=np.int64)]]
    return out + noise


def sample_shift(base: JointPrior, spec: ShiftSpec) -> ShiftedPrior:
    if base.has_zero_cells:
        raise ShiftError("base prior has a zero-probability cell")
    rng = np.random.default_rng(spec.seed)
    shuffle_fraction = float(rng.uniform(*spec.shuffle_fraction_range))
    noise_sigma = float(rng.uniform(*spec.noise_sigma_range))
    n_cells = base.space.size
    order = rng.permutation(n_cells)
    permutation = rng.permutation(shuffle_cutoff(shuffle_fraction, n_cells))
    noise = rng.normal(0.0, noise_sigma, size=n_cells)
    shifted = shuffle_and_perturb(base.flat_log_probs(), order, permutation, noise)
    q = JointPrior(shifted.reshape(base.shape), source=PriorSource.SAMPLED_SHIFT)
    return ShiftedPrior(q, shuffle_fraction, noise_sigma, weighted_kendall_tau(base, q))


def importance_ratios(base: JointPrior, q: JointPrior, label_main, label_aux) -> np.ndarray:
    """Unnormalized q/p per example, scaled so the largest ratio is 1."""
    if base.shape != q.shape:
        raise ShiftError(f"prior shapes differ: {base.shape} vs {q.shape}")
    label_main = np.asarray(label_main)
    label_aux = np.asarray(label_aux)
    log_p = base.log_probs[label_main, label_aux]
    unsupported = np.flatnonzero(np.isneginf(log_p))
    if len(unsupported):
        i = unsupported[0]
        raise ShiftError(
            f"unsupported pair ({label_main[i]}, {label_aux[i]}): zero base probability"
        )
    log_ratio = q.log_probs - base.log_probs
    log_ratio = log_ratio - log_ratio.max()
    return np.exp(log_ratio)[label_main, label_aux]


def importance_weights(base: JointPrior, q: JointPrior, label_main, label_aux) -> np.ndarray:
    ratios = importance_ratios(base, q, label_main, label_aux)
    return ratios / math.fsum(ratios)


def effective_sample_size(weights) -> float:
    weights = np.asarray(weights, dtype=np.float64)
    return 1.0 / math.fsum(weights * weights)


def _predicted_labels(predictions, target: str) -> np.ndarray:
    arr = np.asarray([tuple(p)[:2] for p in predictions] if not isinstance(predictions, np.ndarray)
                     else predictions)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ShiftError("predictions must be (y, y') pairs")
    return arr[:, 0] if target == "main" else arr[:, 1]


def correct_mask(scores: ScoreTable, predictions, target: str = "main") -> np.ndarray:
    if target not in ("main", "aux"):
        raise ShiftError(f"target must be 'main' or 'aux', got {target!r}")
    predicted = _predicted_labels(predictions, target)
    if len(predicted) != len(scores):
        raise ShiftError(f"{len(predicted)} predictions for {len(scores)} examples")
    truth = scores.label_main if target == "main" else scores.label_aux
    return predicted == truth


def weighted_accuracy(ratios: np.ndarray, correct: np.ndarray) -> float:
    """Self-normalized estimate; summed exactly, so example order is irrelevant."""
    return math.fsum(ratios[correct]) / math.fsum(ratios)


def importance_weighted_accuracy(
    records: ScoreTable | Sequence,
    predictions,
    base: JointPrior,
    q: JointPrior,
    target: Literal["main", "aux"] = "main",
) -> float:
    scores = as_table(records)
    correct = correct_mask(scores, predictions, target)
    ratios = importance_ratios(base, q, scores.label_main, scores.label_aux)
    return weighted_accuracy(ratios, correct)


def cell_ratios(base: JointPrior, q: JointPrior) -> np.ndarray:
    """q/p per (y, y') cell, scaled so the largest is 1; zero where p is zero."""
    if base.shape != q.shape:
        raise ShiftError(f"prior shapes differ: {base.shape} vs {q.shape}")
    supported = ~np.isneginf(base.log_probs)
    log_ratio = np.where(supported, q.log_probs - np.where(supported, base.log_probs, 0.0), -np.inf)
    return np.exp(log_ratio - log_ratio[supported].max())


def _exact_dot(ratios, counts) -> float:
    """Correctly rounded sum of ratio * count, as fsum over the examples would give."""
    return float(sum(Fraction(float(r)) * int(k) for r, k in zip(ratios, counts) if k))


def pooled_weighted_accuracy(ratios: np.ndarray, cell_correct, cell_total) -> float:
    """Weighted accuracy from per-cell correct and total counts.

    Bit-identical to the per-example estimate: an example's weight depends
    only on its label pair, and both sums are rounded once.
    """
    ratios = np.ravel(ratios)
    return _exact_dot(ratios, np.ravel(cell_correct)) / _exact_dot(ratios, np.ravel(cell_total))


def pooled_effective_sample_size(ratios: np.ndarray, cell_total) -> float:
    ratios = np.ravel(ratios)
    cell_total = np.ravel(cell_total)
    return math.fsum(ratios * cell_total) ** 2 / math.fsum(ratios**2 * cell_total)


def weighted_accuracy_stderr(weights, correct) -> float:
    """Delta-method standard error of a self-normalized weighted mean."""
    weights = np.asarray(weights, dtype=np.float64)
    correct = np.asarray(correct, dtype=np.float64)
    mean = math.fsum(weights * correct)
    return math.sqrt(math.fsum(weights**2 * (correct - mean) ** 2))
