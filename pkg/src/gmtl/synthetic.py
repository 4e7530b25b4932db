"""Two binary targets causing a scalar input through a Gaussian mixture.

The component is ``k = 2*y + y'`` and ``x | y, y' ~ N(mean_k, var_k)``;
the label pair follows a bivariate Bernoulli prior whose covariance is the
knob a hidden confounder would turn.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np
from scipy.optimize import bisect
from scipy.special import logsumexp

from .inference import ScoreTable, check_alpha
from .priors import BivariateBernoulliParams, JointPrior, prior_from_bernoulli

DEFAULT_INTERVAL = (-5.0, 8.0)
BOUNDARY_XTOL = 1e-10
_SCAN_POINTS = 2601


class BoundaryError(RuntimeError):
    pass


@dataclass(frozen=True)
class MixtureSpec:
    means: tuple[float, float, float, float] = (0.0, 1.0, 2.0, 3.0)
    variances: tuple[float, float, float, float] = (0.4, 0.4, 0.6, 0.6)
    prior: BivariateBernoulliParams = field(
        default_factory=lambda: BivariateBernoulliParams(0.5, 0.5, 0.0)
    )

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        object.__setattr__(self, "variances", tuple(float(v) for v in self.variances))
        if len(self.means) != 4 or len(self.variances) != 4:
            raise ValueError("a mixture needs exactly 4 means and 4 variances")
        if min(self.variances) <= 0:
            raise ValueError(f"variances must be strictly positive, got {self.variances}")

    @classmethod
    def standard(cls, cov: float = 0.0) -> "MixtureSpec":
        return cls(prior=BivariateBernoulliParams(0.5, 0.5, cov))

    def with_cov(self, cov: float) -> "MixtureSpec":
        params = BivariateBernoulliParams(self.prior.p, self.prior.p_prime, cov)
        return MixtureSpec(self.means, self.variances, params)

    def joint_prior(self) -> JointPrior:
        return prior_from_bernoulli(self.prior)


def component(y, y_prime):
    return 2 * np.asarray(y) + np.asarray(y_prime)


class SyntheticSample(NamedTuple):
    x: float
    y: int
    y_prime: int


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    x: np.ndarray
    y: np.ndarray
    y_prime: np.ndarray

    def __len__(self) -> int:
        return len(self.x)

    def __iter__(self) -> Iterator[SyntheticSample]:
        for x, y, yp in zip(self.x, self.y, self.y_prime):
            yield SyntheticSample(float(x), int(y), int(yp))

    def __getitem__(self, i) -> SyntheticSample:
        return SyntheticSample(float(self.x[i]), int(self.y[i]), int(self.y_prime[i]))


def sample_dataset(
    spec: MixtureSpec,
    n: int,
    seed: int | np.random.SeedSequence,
    prior: JointPrior | None = None,
) -> SyntheticDataset:
    """Draw n samples; ``prior`` replaces the mixture's label prior when given."""
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    table = (prior if prior is not None else spec.joint_prior()).probs
    if table.shape != (2, 2):
        raise ValueError(f"label prior must be 2x2, got {table.shape}")
    rng = np.random.default_rng(seed)
    k = rng.choice(4, size=n, p=table.ravel() / table.sum())
    means = np.asarray(spec.means)[k]
    sd = np.sqrt(np.asarray(spec.variances))[k]
    x = rng.normal(means, sd)
    return SyntheticDataset(x, k // 2, k % 2)


def log_likelihood(spec: MixtureSpec, x) -> np.ndarray:
    """log p(x | y, y') with shape ``x.shape + (2, 2)``."""
    x = np.asarray(x, dtype=np.float64)[..., None]
    mu = np.asarray(spec.means)
    var = np.asarray(spec.variances)
    logpdf = -0.5 * (np.log(2 * np.pi * var) + (x - mu) ** 2 / var)
    return logpdf.reshape(logpdf.shape[:-1] + (2, 2))


class ExactPosteriors(NamedTuple):
    log_post_main: np.ndarray
    log_post_aux: np.ndarray
    log_joint: np.ndarray


def exact_log_posteriors(spec: MixtureSpec, x) -> ExactPosteriors:
    """Bayes posteriors over y, y' and (y, y') at x (scalar or array)."""
    with np.errstate(divide="ignore"):
        log_prior = np.log(spec.prior.table())
    unnorm = log_likelihood(spec, x) + log_prior
    log_joint = unnorm - logsumexp(unnorm, axis=(-2, -1), keepdims=True)
    return ExactPosteriors(
        logsumexp(log_joint, axis=-1),
        logsumexp(log_joint, axis=-2),
        log_joint,
    )


def _find_single_root(fn, interval) -> float:
    lo, hi = interval
    grid = np.linspace(lo, hi, _SCAN_POINTS)
    values = np.asarray(fn(grid), dtype=np.float64)
    signs = np.sign(values)
    changes = np.flatnonzero(signs[:-1] * signs[1:] < 0)
    exact = np.flatnonzero(signs == 0)
    if len(changes) + len(exact) != 1:
        brackets = ", ".join(f"f({g:.3g})={v:.3g}" for g, v in zip(grid[::200], values[::200]))
        raise BoundaryError(
            f"expected exactly one sign change on [{lo}, {hi}], "
            f"found {len(changes) + len(exact)}; bracket evaluations: {brackets}"
        )
    if len(exact):
        return float(grid[exact[0]])
    i = changes[0]
    return float(
        bisect(lambda x: float(fn(x)), grid[i], grid[i + 1],
               xtol=BOUNDARY_XTOL, rtol=4 * np.finfo(float).eps)
    )


def dmtl_boundary(spec: MixtureSpec, interval=DEFAULT_INTERVAL) -> float:
    """Where argmax_y p(y|x), with y' marginalized out, switches."""

    def diff(x):
        post = exact_log_posteriors(spec, x).log_post_main
        return np.exp(post[..., 1]) - np.exp(post[..., 0])

    return _find_single_root(diff, interval)


def gmtl_scores(spec: MixtureSpec, x, alpha: float) -> np.ndarray:
    """log p(y, y'|x) - alpha * log p(y, y') up to a constant in (y, y').

    Written as ``log p(x|y,y') + (1 - alpha) log p(y,y')`` so that
    ``alpha = 1`` stays finite even for priors with empty cells.
    """
    alpha = check_alpha(alpha)
    ll = log_likelihood(spec, x)
    if alpha == 1.0:
        return ll
    with np.errstate(divide="ignore"):
        log_prior = np.log(spec.prior.table())
    return ll + (1.0 - alpha) * log_prior


def gmtl_boundary(spec: MixtureSpec, alpha: float = 1.0, interval=DEFAULT_INTERVAL) -> float:
    """Where the y part of the joint argmax of the interpolated score switches."""

    def diff(x):
        s = gmtl_scores(spec, x, alpha)
        return s[..., 1, :].max(axis=-1) - s[..., 0, :].max(axis=-1)

    return _find_single_root(diff, interval)


def oracle_scores(spec: MixtureSpec, n: int, seed, prior: JointPrior | None = None):
    """Sample a dataset and score it with the exact per-task posteriors.

    Returns ``(dataset, ScoreTable)``.
    """
    data = sample_dataset(spec, n, seed, prior=prior)
    post = exact_log_posteriors(spec, data.x)
    width = len(str(n - 1))
    ids = tuple(f"syn-{i:0{width}d}" for i in range(n))
    return data, ScoreTable(ids, post.log_post_main, post.log_post_aux, data.y, data.y_prime)
