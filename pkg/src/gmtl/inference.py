"""Discriminative and generative joint prediction over two targets.

Per-task posteriors are combined under conditional independence,
``log p(y, y'|x) = log p(y|x) + log p(y'|x)``, and re-scored against the
joint label prior::

    argmax_{y, y'}  log p(y, y'|x) - alpha * log p(y, y')

``alpha = 0`` is the usual discriminative rule; ``alpha = 1`` divides the
prior out entirely, leaving a score proportional to p(x|y, y').
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .priors import JointPrior

POSTERIOR_ATOL = 1e-6


class InferenceError(ValueError):
    pass


def check_alpha(alpha: float) -> float:
    """Validate an interpolation weight; it must lie in [0, 1]."""
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise InferenceError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


def _check_log_posterior(name: str, values, atol: float = POSTERIOR_ATOL) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size < 2:
        raise InferenceError(f"{name} must be a vector of length >= 2")
    if np.isnan(values).any() or np.isposinf(values).any():
        raise InferenceError(f"{name} contains NaN or +inf")
    total = np.exp(values).sum()
    if abs(total - 1.0) > atol:
        raise InferenceError(f"{name} does not normalize: exp-sum is {total!r}")
    return values


@dataclass(frozen=True, eq=False)
class ScoreRecord:
    """One example's per-task log-posteriors and its ground-truth labels."""

    example_id: str
    log_post_main: np.ndarray
    log_post_aux: np.ndarray
    label_main: int
    label_aux: int

    def __post_init__(self):
        main = _check_log_posterior("log_post_main", self.log_post_main)
        aux = _check_log_posterior("log_post_aux", self.log_post_aux)
        main.setflags(write=False)
        aux.setflags(write=False)
        object.__setattr__(self, "log_post_main", main)
        object.__setattr__(self, "log_post_aux", aux)
        if not 0 <= self.label_main < main.size:
            raise InferenceError(f"{self.example_id}: label_main {self.label_main} out of range")
        if not 0 <= self.label_aux < aux.size:
            raise InferenceError(f"{self.example_id}: label_aux {self.label_aux} out of range")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.log_post_main.size, self.log_post_aux.size)


class Prediction(NamedTuple):
    y: int
    y_prime: int
    scores: np.ndarray


def joint_log_posterior(record: ScoreRecord) -> np.ndarray:
    return record.log_post_main[:, None] + record.log_post_aux[None, :]


def _check_shapes(shape: tuple[int, int], prior: JointPrior) -> None:
    if shape != prior.shape:
        raise InferenceError(f"posterior shape {shape} does not match prior shape {prior.shape}")


def rescore(joint_log_post, prior: JointPrior, alpha: float) -> np.ndarray:
    """Subtract ``alpha * log p(y, y')`` from a joint log-posterior matrix."""
    alpha = check_alpha(alpha)
    joint = np.asarray(joint_log_post, dtype=np.float64)
    _check_shapes(joint.shape, prior)
    if alpha == 0.0:
        return joint
    if prior.has_zero_cells:
        raise InferenceError("unsmoothed prior: -inf log-probability cell with alpha > 0")
    return joint - alpha * prior.log_probs


def argmax_pair(scores) -> tuple[int, int]:
    """Best (y, y'); ties go to the smallest canonical (row-major) index."""
    scores = np.asarray(scores)
    return divmod(int(np.argmax(scores)), scores.shape[1])


def score_matrix(record: ScoreRecord, prior: JointPrior, alpha: float) -> np.ndarray:
    return rescore(joint_log_posterior(record), prior, alpha)


def gmtl_predict(record: ScoreRecord, prior: JointPrior, alpha: float) -> Prediction:
    scores = score_matrix(record, prior, alpha)
    return Prediction(*argmax_pair(scores), scores)


def dmtl_predict_main(record: ScoreRecord) -> int:
    return int(np.argmax(record.log_post_main))


def predict_batch(
    records: Sequence[ScoreRecord],
    prior: JointPrior,
    alpha: float,
    workers: int = 1,
) -> list[Prediction]:
    if len(records) == 0:
        raise InferenceError("empty batch")
    alpha = check_alpha(alpha)

    def one(record):
        try:
            return gmtl_predict(record, prior, alpha)
        except InferenceError as exc:
            raise InferenceError(f"{record.example_id}: {exc}") from exc

    if workers <= 1:
        return [one(r) for r in records]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, records))


@dataclass(frozen=True, eq=False)
class ScoreTable:
    """Column-oriented view of many ScoreRecords, used by the vectorized paths."""

    example_ids: tuple[str, ...]
    log_post_main: np.ndarray
    log_post_aux: np.ndarray
    label_main: np.ndarray
    label_aux: np.ndarray

    def __post_init__(self):
        n = len(self.example_ids)
        for name in ("log_post_main", "log_post_aux"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2 or arr.shape[0] != n:
                raise InferenceError(f"{name} must have shape (n_examples, k)")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name in ("label_main", "label_aux"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            if arr.shape != (n,):
                raise InferenceError(f"{name} must have shape (n_examples,)")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if n == 0:
            raise InferenceError("empty score table")

    @classmethod
    def from_records(cls, records: Sequence[ScoreRecord]) -> "ScoreTable":
        if len(records) == 0:
            raise InferenceError("empty batch")
        shape = records[0].shape
        for r in records:
            if r.shape != shape:
                raise InferenceError(f"{r.example_id}: shape {r.shape} differs from {shape}")
        return cls(
            tuple(r.example_id for r in records),
            np.stack([r.log_post_main for r in records]),
            np.stack([r.log_post_aux for r in records]),
            np.array([r.label_main for r in records]),
            np.array([r.label_aux for r in records]),
        )

    def __len__(self) -> int:
        return len(self.example_ids)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.log_post_main.shape[1], self.log_post_aux.shape[1])

    def records(self) -> list[ScoreRecord]:
        return [
            ScoreRecord(eid, m, a, int(lm), int(la))
            for eid, m, a, lm, la in zip(
                self.example_ids, self.log_post_main, self.log_post_aux,
                self.label_main, self.label_aux,
            )
        ]


def as_table(scores) -> ScoreTable:
    if isinstance(scores, ScoreTable):
        return scores
    return ScoreTable.from_records(list(scores))


def predict_table(table: ScoreTable, prior: JointPrior, alpha: float) -> np.ndarray:
    """Vectorized gmtl_predict; returns an (n, 2) integer array of pairs."""
    alpha = check_alpha(alpha)
    _check_shapes(table.shape, prior)
    scores = table.log_post_main[:, :, None] + table.log_post_aux[:, None, :]
    if alpha > 0.0:
        if prior.has_zero_cells:
            raise InferenceError("unsmoothed prior: -inf log-probability cell with alpha > 0")
        scores = scores - alpha * prior.log_probs
    flat = np.argmax(scores.reshape(len(table), -1), axis=1)
    return np.stack(np.divmod(flat, table.shape[1]), axis=1)
