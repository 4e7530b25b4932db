"""Scores file reading and writing.

One example per line, tab-separated, natural-log posteriors as
comma-separated reals::

    example_id  log_post_main  log_post_aux  label_main  label_aux
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .inference import InferenceError, ScoreTable, _check_log_posterior

SCORES_HEADER = ("example_id", "log_post_main", "log_post_aux", "label_main", "label_aux")


class ParseError(ValueError):
    pass


def _vector(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")], dtype=np.float64)


def read_scores(path) -> ScoreTable:
    path = Path(path)
    ids, main, aux, lab_main, lab_aux = [], [], [], [], []
    with path.open() as fh:
        header = tuple(fh.readline().rstrip("\n").split("\t"))
        if header != SCORES_HEADER:
            raise ParseError(f"{path}:1: expected header {'|'.join(SCORES_HEADER)}, got {header}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != len(SCORES_HEADER):
                raise ParseError(f"{path}:{lineno}: expected 5 fields, got {len(fields)}")
            try:
                m = _check_log_posterior("log_post_main", _vector(fields[1]))
                a = _check_log_posterior("log_post_aux", _vector(fields[2]))
                ym, ya = int(fields[3]), int(fields[4])
            except (ValueError, InferenceError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if main and (m.size != main[0].size or a.size != aux[0].size):
                raise ParseError(f"{path}:{lineno}: posterior lengths differ from line 2")
            if not (0 <= ym < m.size and 0 <= ya < a.size):
                raise ParseError(f"{path}:{lineno}: label out of range")
            ids.append(fields[0])
            main.append(m)
            aux.append(a)
            lab_main.append(ym)
            lab_aux.append(ya)
    if not ids:
        raise ParseError(f"{path}: no records")
    return ScoreTable(tuple(ids), np.stack(main), np.stack(aux),
                      np.array(lab_main), np.array(lab_aux))


def _fmt(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def write_scores(path, table: ScoreTable) -> None:
    lines = ["\t".join(SCORES_HEADER)]
    for eid, m, a, ym, ya in zip(table.example_ids, table.log_post_main, table.log_post_aux,
                                 table.label_main, table.label_aux):
        lines.append(f"{eid}\t{_fmt(m)}\t{_fmt(a)}\t{int(ym)}\t{int(ya)}")
    Path(path).write_text("\n".join(lines) + "\n")
