"""RMSE metric and key-aligned comparison reports over prediction files."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, MetricError, ParseError, ShapeError


def rmse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeError(f"prediction length {pred.shape} != truth length {truth.shape}")
    if pred.size == 0:
        raise MetricError("rmse undefined on empty input")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def load_predictions(path) -> dict[tuple[int, int, int], float]:
    """Read a `user<TAB>item<TAB>time<TAB>score` file into a key->score map."""
    out: dict[tuple[int, int, int], float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ParseError(path, line_no,
                                 f"expected 4 tab-separated fields, got {len(parts)}")
            try:
                key = (int(parts[0]), int(parts[1]), int(parts[3]))
                score = float(parts[2])
            except ValueError as exc:
                raise ParseError(path, line_no, f"non-numeric field: {exc}") from None
            if key in out:
                raise ParseError(path, line_no, f"duplicate key {key}")
            out[key] = score
    return out


def save_predictions(path, users, items, times, scores, scale=None) -> None:
    """Emit predictions; clipping to the score scale happens here, on emission."""
    scores = np.asarray(scores, dtype=np.float64)
    if scale is not None:
        scores = scale.clip(scores)
    with open(path, "w", encoding="utf-8") as fh:
        for u, i, s, t in zip(users, items, scores, times):
            fh.write(f"{int(u)}\t{int(i)}\t{repr(float(s))}\t{int(t)}\n")


def align_column(preds: dict, keys: list[tuple[int, int, int]], name: str) -> np.ndarray:
    if len(preds) != len(keys):
        extra = set(preds) - set(keys)
        missing = set(keys) - set(preds)
        offending = sorted(extra | missing)[0]
        raise AlignmentError(f"{name}: key {offending} not shared with the truth file")
    col = np.empty(len(keys))
    for n, k in enumerate(keys):
        if k not in preds:
            raise AlignmentError(f"{name}: key {k} missing")
        col[n] = preds[k]
    return col


@dataclass
class EvalReport:
    count: int
    rows: list[tuple[str, float, int]]  # (model name, rmse, count), rmse ascending

    def tsv_lines(self) -> list[str]:
        out = ["model\trmse\tcount"]
        for name, err, count in self.rows:
            out.append(f"{name}\t{err:.6f}\t{count}")
        return out


def compare(model_files: list[tuple[str, str]], truth_file) -> EvalReport:
    """One RMSE row per model against a shared truth file, sorted ascending
    (ties alphabetical). Alignment is by key, not line order."""
    truth_map = load_predictions(truth_file)
    if not truth_map:
        raise MetricError("truth file holds no records")
    keys = list(truth_map.keys())
    truth = np.array([truth_map[k] for k in keys])
    rows = []
    for name, path in model_files:
        col = align_column(load_predictions(path), keys, name)
        rows.append((name, rmse(col, truth), len(keys)))
    rows.sort(key=lambda r: (r[1], r[0]))
    return EvalReport(len(keys), rows)
