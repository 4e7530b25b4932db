"""Joint label priors p(y, y') over a pair of categorical targets.

Priors are stored as natural-log probability tables indexed ``[y, y']``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

DEFAULT_PSEUDOCOUNT = 1.0


class PriorError(ValueError):
    """Raised when a joint prior cannot be constructed."""


class PriorSource(str, enum.Enum):
    COUNTED = "counted"
    PARAMETRIC = "parametric"
    SAMPLED_SHIFT = "sampled-shift"


@dataclass(frozen=True)
class TargetSpace:
    """Label sets of the main and auxiliary task.

    Pairs are indexed row-major, ``index(y, y') = y * aux_cardinality + y'``,
    with indices starting at 0.
    """

    main_cardinality: int
    aux_cardinality: int

    def __post_init__(self):
        for name in ("main_cardinality", "aux_cardinality"):
            value = getattr(self, name)
            if int(value) != value or value < 2:
                raise PriorError(f"{name} must be an integer >= 2, got {value!r}")

    @property
    def size(self) -> int:
        return self.main_cardinality * self.aux_cardinality

    @property
    def shape(self) -> tuple[int, int]:
        return (self.main_cardinality, self.aux_cardinality)

    def index(self, y: int, y_prime: int) -> int:
        if not (0 <= y < self.main_cardinality and 0 <= y_prime < self.aux_cardinality):
            raise IndexError(f"pair ({y}, {y_prime}) outside target space {self.shape}")
        return y * self.aux_cardinality + y_prime

    def pair(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.size:
            raise IndexError(f"index {index} outside 0..{self.size - 1}")
        return divmod(index, self.aux_cardinality)


def _normalize_log(log_table: np.ndarray) -> np.ndarray:
    out = log_table - logsumexp(log_table)
    # a second pass removes the residual left by the first subtraction
    out = out - logsumexp(out)
    return out


@dataclass(frozen=True, eq=False)
class JointPrior:
    """Normalized joint distribution over (y, y') in the log domain."""

    log_probs: np.ndarray
    pseudocount: float = 0.0
    source: PriorSource = PriorSource.COUNTED
    space: TargetSpace = field(init=False, repr=False)

    def __post_init__(self):
        table = np.array(self.log_probs, dtype=np.float64)
        if table.ndim != 2:
            raise PriorError(f"log_probs must be a 2-d table, got shape {table.shape}")
        if np.isnan(table).any() or np.isposinf(table).any():
            raise PriorError("log_probs contains NaN or +inf")
        table = _normalize_log(table)
        table.setflags(write=False)
        object.__setattr__(self, "log_probs", table)
        object.__setattr__(self, "space", TargetSpace(*table.shape))
        object.__setattr__(self, "source", PriorSource(self.source))
        if self.pseudocount > 0 and not np.isfinite(table).all():
            raise PriorError("smoothed prior has a zero-probability cell")

    @classmethod
    def from_probs(cls, probs, **kwargs) -> "JointPrior":
        probs = np.asarray(probs, dtype=np.float64)
        if (probs < 0).any():
            raise PriorError("probabilities must be nonnegative")
        with np.errstate(divide="ignore"):
            return cls(np.log(probs), **kwargs)

    @classmethod
    def uniform(cls, main_cardinality: int, aux_cardinality: int) -> "JointPrior":
        space = TargetSpace(main_cardinality, aux_cardinality)
        return cls(np.zeros(space.shape), source=PriorSource.PARAMETRIC)

    @property
    def shape(self) -> tuple[int, int]:
        return self.log_probs.shape

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def flat_log_probs(self) -> np.ndarray:
        """Log-probabilities in canonical index order."""
        return self.log_probs.ravel()

    @property
    def has_zero_cells(self) -> bool:
        return bool(np.isneginf(self.log_probs).any())


def estimate_prior(counts, pseudocount: float = DEFAULT_PSEUDOCOUNT) -> JointPrior:
    """Additively smoothed estimate of p(y, y') from pair counts.

    Each cell gets ``(count + pseudocount) / (total + pseudocount * n_cells)``.
    """
    counts = np.asarray(counts)
    if counts.size == 0:
        raise PriorError("empty counts table")
    if counts.ndim != 2:
        raise PriorError(f"counts must be a 2-d table, got shape {counts.shape}")
    if not np.issubdtype(counts.dtype, np.number) or (counts < 0).any():
        raise PriorError("counts must be nonnegative numbers")
    if np.any(counts != np.round(counts)):
        raise PriorError("counts must be integers")
    if pseudocount < 0 or not np.isfinite(pseudocount):
        raise PriorError(f"pseudocount must be a finite nonnegative real, got {pseudocount}")
    TargetSpace(*counts.shape)
    if pseudocount == 0:
        zero = np.argwhere(counts == 0)
        if len(zero):
            y, yp = (int(v) for v in zero[0])
            raise PriorError(f"degenerate prior at ({y},{yp}): zero count with pseudocount 0")
    smoothed = counts.astype(np.float64) + pseudocount
    log_table = np.log(smoothed) - np.log(smoothed.sum())
    return JointPrior(log_table, pseudocount=float(pseudocount), source=PriorSource.COUNTED)


def pair_counts(label_main, label_aux, shape: tuple[int, int]) -> np.ndarray:
    """Count occurrences of each (y, y') pair."""
    counts = np.zeros(shape, dtype=np.int64)
    np.add.at(counts, (np.asarray(label_main), np.asarray(label_aux)), 1)
    return counts


@dataclass(frozen=True)
class BivariateBernoulliParams:
    """P(Y=1) = p, P(Y'=1) = p_prime and Cov(Y, Y') = cov."""

    p: float
    p_prime: float
    cov: float = 0.0

    def __post_init__(self):
        for name in ("p", "p_prime"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise PriorError(f"{name} must lie in (0, 1), got {value}")
        lo, hi = self.feasible_cov()
        if not lo <= self.cov <= hi:
            raise PriorError(
                f"infeasible covariance {self.cov}: feasible interval is [{lo}, {hi}]"
            )

    def feasible_cov(self) -> tuple[float, float]:
        p, q = self.p, self.p_prime
        return max(-p * q, -(1 - p) * (1 - q)), min(p * (1 - q), q * (1 - p))

    def table(self) -> np.ndarray:
        p11 = self.p * self.p_prime + self.cov
        p10 = self.p - p11
        p01 = self.p_prime - p11
        p00 = 1.0 - p11 - p10 - p01
        # rounding can push a cell at the feasibility edge slightly below 0
        return np.clip(np.array([[p00, p01], [p10, p11]]), 0.0, 1.0)


def prior_from_bernoulli(params: BivariateBernoulliParams) -> JointPrior:
    return JointPrior.from_probs(params.table(), source=PriorSource.PARAMETRIC)


def bernoulli_moments(prior: JointPrior) -> tuple[float, float, float]:
    """Recover (p, p', cov) from a 2x2 joint prior."""
    if prior.shape != (2, 2):
        raise PriorError(f"expected a 2x2 prior, got {prior.shape}")
    t = prior.probs
    p = t[1].sum()
    p_prime = t[:, 1].sum()
    return float(p), float(p_prime), float(t[1, 1] - p * p_prime)


def marginal_main(prior: JointPrior) -> np.ndarray:
    return np.exp(logsumexp(prior.log_probs, axis=1))


def marginal_aux(prior: JointPrior) -> np.ndarray:
    return np.exp(logsumexp(prior.log_probs, axis=0))


COUNTS_HEADER = ("y", "y_prime", "count")
_HEADER_LINE = "\t".join(COUNTS_HEADER)


def read_counts(path, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Read a tab-separated ``y  y_prime  count`` file into a count table.

    Pairs absent from the file count as zero. Without ``shape`` the table
    spans ``max label + 1`` in each direction.
    """
    path = Path(path)
    entries = []
    with path.open() as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != COUNTS_HEADER:
            raise PriorError(f"{path}:1: expected header {_HEADER_LINE!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            try:
                y, yp, count = (int(v) for v in fields)
            except ValueError:
                raise PriorError(f"{path}:{lineno}: malformed record {line!r}") from None
            if y < 0 or yp < 0 or count < 0:
                raise PriorError(f"{path}:{lineno}: negative value in {line!r}")
            entries.append((y, yp, count))
    if not entries:
        raise PriorError(f"{path}: empty counts file")
    if shape is None:
        shape = (max(e[0] for e in entries) + 1, max(e[1] for e in entries) + 1)
    counts = np.zeros(shape, dtype=np.int64)
    for y, yp, count in entries:
        if y >= shape[0] or yp >= shape[1]:
            raise PriorError(f"{path}: pair ({y}, {yp}) outside target space {shape}")
        counts[y, yp] += count
    return counts


def write_counts(path, counts) -> None:
    counts = np.asarray(counts)
    lines = ["\t".join(COUNTS_HEADER)]
    for (y, yp), count in np.ndenumerate(counts):
        lines.append(f"{y}\t{yp}\t{int(count)}")
    Path(path).write_text("\n".join(lines) + "\n")
