"""Evaluation metrics and the link formation / dissolution protocols.

Ratio predictions are scored with the same full-row binary cross-entropy
the model trains on; volumes with MAE and MAPE; ranking questions with the
Mann-Whitney AUC (ties count half).  Senders the predictor cannot cover and
targets a metric cannot use are never silently dropped -- every result
carries explicit used/excluded counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from .graph import SnapshotSeries

LOG_EPS = 1e-12


@dataclass
class MetricResult:
    value: float
    n_used: int
    n_excluded: int
    detail: dict = field(default_factory=dict)


def _dense_row(row, n_nodes: int) -> np.ndarray:
    if isinstance(row, dict):
        out = np.zeros(n_nodes)
        for j, v in row.items():
            out[j] = v
        return out
    out = np.asarray(row, dtype=float)
    if out.shape != (n_nodes,):
        raise ValueError(f"row has shape {out.shape}, expected ({n_nodes},)")
    return out


def metric_bce(
    pred_rows: dict,
    true_rows: dict,
    n_nodes: int,
    support: str = "union",
    eps: float = LOG_EPS,
) -> MetricResult:
    """Mean full-row binary cross-entropy over senders with an observed row.

    Senders in true_rows but missing from pred_rows (cold starts, typically)
    are excluded and counted.  support="union" iterates only destinations
    where either row is positive; "full" iterates all of them.  The two give
    the same value -- where both rows are zero the term is log(1) = 0 -- so
    the choice is about cost on sparse rows, not semantics.
    """
    if support not in ("union", "full"):
        raise ValueError(f"unknown support mode {support!r}")
    if not true_rows:
        raise ValueError("no observed rows to score against")
    used = 0
    excluded = 0
    total = 0.0
    for i in sorted(true_rows):
        if i not in pred_rows:
            excluded += 1
            continue
        y = _dense_row(true_rows[i], n_nodes)
        p = _dense_row(pred_rows[i], n_nodes)
        if support == "union":
            cols = np.nonzero((y > 0) | (p > 0))[0]
            y = y[cols]
            p = p[cols]
        term = y * np.log(np.clip(p, eps, None)) + (1.0 - y) * np.log(
            np.clip(1.0 - p, eps, None)
        )
        total += term.sum()
        used += 1
    if used == 0:
        raise ValueError("every observed sender was missing a prediction")
    return MetricResult(value=-total / used, n_used=used, n_excluded=excluded)


def metric_mae(pred: dict, true: dict) -> MetricResult:
    """Mean absolute error over targets with a prediction; the rest are counted."""
    if not true:
        raise ValueError("no targets")
    keys = [k for k in sorted(true) if k in pred]
    if not keys:
        raise ValueError("no predicted targets")
    errors = [abs(pred[k] - true[k]) for k in keys]
    return MetricResult(
        value=float(np.mean(errors)), n_used=len(keys), n_excluded=len(true) - len(keys)
    )


def metric_mape(pred: dict, true: dict) -> MetricResult:
    """Mean absolute percentage error (as a fraction, not percent).

    Zero targets cannot be scored this way; they are excluded and counted
    together with targets that have no prediction.
    """
    if not true:
        raise ValueError("no targets")
    keys = [k for k in sorted(true) if k in pred and true[k] != 0]
    if not keys:
        raise ValueError("no scorable targets (zero-valued or unpredicted)")
    ratios = [abs(pred[k] - true[k]) / abs(true[k]) for k in keys]
    return MetricResult(
        value=float(np.mean(ratios)), n_used=len(keys), n_excluded=len(true) - len(keys)
    )


def metric_auc(labels, scores) -> MetricResult:
    """Mann-Whitney AUC: probability a positive outranks a negative, ties half.

    Computed from average ranks, so the result is exactly the pairwise
    count -- no approximation.
    """
    labels = np.asarray(labels, dtype=bool)
    scores = np.asarray(scores, dtype=float)
    if labels.shape != scores.shape or labels.ndim != 1:
        raise ValueError("labels and scores must be equal-length vectors")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0:
        raise ValueError("no positive examples in the candidate set")
    if n_neg == 0:
        raise ValueError("no negative examples in the candidate set")
    ranks = scipy.stats.rankdata(scores)
    rank_sum = ranks[labels].sum()
    value = (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    return MetricResult(value=float(value), n_used=labels.size, n_excluded=0)


def threshold_renormalize(row: np.ndarray, epsilon: float) -> tuple[np.ndarray, int]:
    """Zero out entries below epsilon and rescale the rest to unit mass.

    On a probability row (total mass at most 1) surviving entries only grow,
    so applying the operation twice changes nothing.  When everything falls
    below the threshold the zero row comes back along with the count of
    removed entries; callers treat that as an empty prediction.
    """
    row = np.asarray(row, dtype=float)
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    keep = row >= epsilon
    removed = int(np.count_nonzero((~keep) & (row > 0)))
    kept = np.where(keep, row, 0.0)
    mass = kept.sum()
    if mass <= 0:
        return np.zeros_like(row), removed
    return kept / mass, removed


def pairs_before(series: SnapshotSeries, t: int) -> set:
    """Every (src, dst) pair that appears in some snapshot strictly before t."""
    seen: set = set()
    for snap in series.snapshots[:t]:
        seen.update(snap.adjacency)
    return seen


def eval_formation(
    pred_rows: dict, series: SnapshotSeries, t: int, epsilon: float = 1e-4
) -> tuple[list, np.ndarray, np.ndarray]:
    """Candidates, labels and scores for the new-link question at month t.

    Candidates are thresholded predicted pairs the network has never shown
    before t, restricted to senders with a predicted row; the label says
    whether the pair actually appears at t, the score is the renormalized
    predicted ratio.
    """
    memory = pairs_before(series, t)
    actual = set(series.snapshots[t].adjacency)
    n = series.n_nodes
    pairs = []
    labels = []
    scores = []
    for i in sorted(pred_rows):
        row, _ = threshold_renormalize(_dense_row(pred_rows[i], n), epsilon)
        for j in np.nonzero(row > 0)[0]:
            pair = (i, int(j))
            if pair in memory:
                continue
            pairs.append(pair)
            labels.append(pair in actual)
            scores.append(row[j])
    return pairs, np.array(labels, dtype=bool), np.array(scores, dtype=float)


def eval_dissolution(
    pred_rows: dict, series: SnapshotSeries, t: int, epsilon: float = 1e-3
) -> tuple[list, np.ndarray, np.ndarray]:
    """Candidates, labels and scores for the link-drop question at month t.

    Candidates are remembered pairs whose sender has a predicted row; the
    label says whether the pair is absent at t, the score is one minus the
    thresholded predicted ratio (so a destination with no predicted mass
    scores a certain 1).
    """
    memory = pairs_before(series, t)
    actual = set(series.snapshots[t].adjacency)
    n = series.n_nodes
    pairs = []
    labels = []
    scores = []
    thresholded = {
        i: threshold_renormalize(_dense_row(pred_rows[i], n), epsilon)[0]
        for i in pred_rows
    }
    for i, j in sorted(memory):
        if i not in thresholded:
            continue
        pairs.append((i, j))
        labels.append((i, j) not in actual)
        scores.append(1.0 - thresholded[i][j])
    return pairs, np.array(labels, dtype=bool), np.array(scores, dtype=float)
