"""Weighted Kendall's tau between two priors and severity binning."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .priors import JointPrior

COMBINERS = ("additive", "multiplicative")


def _flatten(values) -> np.ndarray:
    if isinstance(values, JointPrior):
        return values.flat_log_probs()
    return np.asarray(values, dtype=np.float64).ravel()


def descending_ranks(values) -> np.ndarray:
    """0-based rank of each element, largest value first.

    Equal values are ordered by position, so ranks are always a permutation.
    """
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(-values, kind="stable")
    ranks = np.empty(len(values), dtype=np.int64)
    ranks[order] = np.arange(len(values))
    return ranks


def rank_weight(r) -> np.ndarray:
    return 1.0 / (np.asarray(r, dtype=np.float64) + 1.0)


def pair_weights(n: int, combine: str = "additive") -> np.ndarray:
    """w[i, j] for base ranks i, j; the diagonal is zero."""
    w = rank_weight(np.arange(n))
    if combine == "additive":
        out = w[:, None] + w[None, :]
    elif combine == "multiplicative":
        out = w[:, None] * w[None, :]
    else:
        raise ValueError(f"combine must be one of {COMBINERS}, got {combine!r}")
    np.fill_diagonal(out, 0.0)
    return out


def weighted_kendall_tau(p, q, combine: str = "additive") -> float:
    """Weighted rank correlation of the cells of ``q`` against ``p``.

    Cells are ranked from most to least probable; pairs are weighted by
    ``w(i) + w(j)`` (or ``w(i) * w(j)``) with ``w(r) = 1 / (r + 1)`` on the
    ranks in ``p``.  Identical rankings give exactly 1, reversed exactly -1.
    """
    a, b = _flatten(p), _flatten(q)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {np.shape(p)} vs {np.shape(q)}")
    n = a.size
    if n < 2:
        raise ValueError("need at least two cells")
    # R[i] = rank in q of the element whose rank in p is i
    R = descending_ranks(b)[np.argsort(descending_ranks(a))]
    base = np.arange(n)
    w = pair_weights(n, combine)
    sign = np.sign(base[:, None] - base[None, :]) * np.sign(R[:, None] - R[None, :])
    return math.fsum((w * sign).ravel()) / math.fsum(w.ravel())


@dataclass(frozen=True, eq=False)
class SeverityBins:
    assignments: np.ndarray
    edges: np.ndarray
    midpoints: np.ndarray
    counts: np.ndarray
    degenerate: bool = False

    @property
    def n_bins(self) -> int:
        return len(self.midpoints)


def severity_bins(taus: Sequence[float], n_bins: int = 5) -> SeverityBins:
    """Split tau values into ``n_bins`` equal-width bins over their range.

    Bins are half-open ``[lo, hi)`` except the last, which is closed, so a
    value on an interior edge lands in the bin to its right.
    """
    taus = np.asarray(taus, dtype=np.float64)
    if taus.size == 0:
        raise ValueError("no tau values to bin")
    if n_bins < 2:
        raise ValueError(f"n_bins must be >= 2, got {n_bins}")
    lo, hi = float(taus.min()), float(taus.max())
    if lo == hi:
        warnings.warn(f"all {taus.size} tau values equal {lo}; using one degenerate bin")
        return SeverityBins(
            np.zeros(taus.size, dtype=np.int64),
            np.array([lo, hi]),
            np.array([lo]),
            np.array([taus.size]),
            degenerate=True,
        )
    edges = np.linspace(lo, hi, n_bins + 1)
    assignments = np.clip(np.searchsorted(edges, taus, side="right") - 1, 0, n_bins - 1)
    return SeverityBins(
        assignments,
        edges,
        (edges[:-1] + edges[1:]) / 2,
        np.bincount(assignments, minlength=n_bins),
    )
