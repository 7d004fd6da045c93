"""Total outgoing volume prediction with gradient-boosted regression trees.

The target is log1p of a sender's next-month outgoing volume; features are
log1p-scaled activity lags.  Boosting is plain squared-error gradient
boosting: start from the target mean, repeatedly fit a shallow regression
tree to the residuals and add it scaled by the learning rate.  Split search
is exhaustive over midpoints between consecutive distinct feature values,
maximizing variance reduction; ties go to the lowest feature index, then
the lowest threshold, so fits are deterministic without any randomness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import SnapshotSeries

N_LAGS = 3
N_VOLUME_FEATURES = 13

VOLUME_FEATURE_NAMES = (
    ["sent_lag1", "sent_lag2", "sent_lag3"]
    + ["recv_lag1", "recv_lag2", "recv_lag3"]
    + ["net_lag1", "net_lag2", "net_lag3"]
    + ["sent_delta1", "sent_delta2"]
    + ["recv_delta1", "recv_delta2"]
)


# -- boosting ------------------------------------------------------------


def _best_split(X: np.ndarray, residuals: np.ndarray):
    """Exhaustive search for the (feature, threshold) with the largest SSE drop.

    Returns (gain, feature, threshold) or None when nothing improves.  The
    scan goes feature-ascending and threshold-ascending and only accepts a
    strictly larger gain, which implements the tie-breaking rule.
    """
    n = X.shape[0]
    total = residuals.sum()
    total_sq = (residuals**2).sum()
    parent_sse = total_sq - total * total / n
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        rs = residuals[order]
        csum = np.cumsum(rs)
        csq = np.cumsum(rs**2)
        # split after position k (1-based count on the left)
        k = np.arange(1, n)
        valid = xs[1:] != xs[:-1]
        if not np.any(valid):
            continue
        left_sse = csq[:-1] - csum[:-1] ** 2 / k
        right_cnt = n - k
        right_sum = total - csum[:-1]
        right_sse = (total_sq - csq[:-1]) - right_sum**2 / right_cnt
        gains = parent_sse - left_sse - right_sse
        gains[~valid] = -np.inf
        pos = int(np.argmax(gains))
        gain = float(gains[pos])
        if gain <= 0:
            continue
        threshold = float((xs[pos] + xs[pos + 1]) / 2.0)
        if best is None or gain > best[0]:
            best = (gain, f, threshold)
    return best


def _grow_tree(X: np.ndarray, residuals: np.ndarray, depth_left: int) -> dict:
    if depth_left == 0 or residuals.size <= 1:
        return {"value": float(residuals.mean())}
    split = _best_split(X, residuals)
    if split is None:
        return {"value": float(residuals.mean())}
    _, f, threshold = split
    mask = X[:, f] <= threshold
    return {
        "feature": int(f),
        "threshold": threshold,
        "left": _grow_tree(X[mask], residuals[mask], depth_left - 1),
        "right": _grow_tree(X[~mask], residuals[~mask], depth_left - 1),
    }


def _tree_predict(node: dict, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        current, idx = stack.pop()
        if "value" in current:
            out[idx] = current["value"]
            continue
        mask = X[idx, current["feature"]] <= current["threshold"]
        stack.append((current["left"], idx[mask]))
        stack.append((current["right"], idx[~mask]))
    return out


@dataclass
class GBDTModel:
    base: float
    learning_rate: float
    n_features: int
    trees: list = field(default_factory=list)
    train_mse: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "base": self.base,
            "learning_rate": self.learning_rate,
            "n_features": self.n_features,
            "trees": self.trees,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GBDTModel":
        model = cls(
            base=float(payload["base"]),
            learning_rate=float(payload["learning_rate"]),
            n_features=int(payload["n_features"]),
            trees=list(payload["trees"]),
        )
        return model


def gbdt_fit(
    X,
    y,
    n_rounds: int = 20000,
    learning_rate: float = 1e-4,
    max_depth: int = 4,
) -> GBDTModel:
    """Boost depth-bounded regression trees on squared error.

    Defaults follow the reference configuration for monthly transfer data;
    they are far more rounds than small problems need, so callers fitting
    toy data should pass something smaller.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise ValueError("X must be (n, d) and y (n,) with matching n")
    if X.shape[0] == 0:
        raise ValueError("cannot fit on an empty table")
    if n_rounds < 0 or learning_rate <= 0 or max_depth < 1:
        raise ValueError("bad boosting settings")
    model = GBDTModel(base=float(y.mean()), learning_rate=learning_rate, n_features=X.shape[1])
    current = np.full(y.size, model.base)
    for _ in range(n_rounds):
        residuals = y - current
        tree = _grow_tree(X, residuals, max_depth)
        if "value" in tree and tree["value"] == 0.0:
            model.train_mse.append(float((residuals**2).mean()))
            break
        model.trees.append(tree)
        current = current + learning_rate * _tree_predict(tree, X)
        model.train_mse.append(float(((y - current) ** 2).mean()))
    return model


def gbdt_predict(model: GBDTModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
    out = np.full(X.shape[0], model.base)
    for tree in model.trees:
        out += model.learning_rate * _tree_predict(tree, X)
    return out


# -- volume features -----------------------------------------------------


def volume_features(series: SnapshotSeries, sender: int, t: int) -> np.ndarray:
    """The 13 lagged-activity features for one sender-month, all on log1p scale.

    Uses months t-1, t-2, t-3: sent and received totals, their differences,
    and one-step changes of each.  Requires t >= 3.
    """
    if t < N_LAGS:
        raise ValueError(f"need {N_LAGS} months of history, t={t}")
    if t > series.n_snapshots:
        raise ValueError(f"month {t} beyond the series")
    sent = []
    received = []
    for lag in range(1, N_LAGS + 1):
        snap = series.snapshots[t - lag]
        sent.append(np.log1p(snap.out_flows()[sender]))
        received.append(np.log1p(snap.in_flows()[sender]))
    sent = np.array(sent)
    received = np.array(received)
    return np.concatenate(
        [sent, received, sent - received, -np.diff(sent), -np.diff(received)]
    )


def _active_before(series: SnapshotSeries, t: int) -> set:
    nodes: set[int] = set()
    for snap in series.snapshots[:t]:
        for i, j in snap.adjacency:
            nodes.add(i)
            nodes.add(j)
    return nodes


def volume_training_table(series: SnapshotSeries, months) -> tuple:
    """Feature matrix, log1p targets and (sender, month) row labels.

    A row exists for every month in `months` and every node that has touched
    an edge (either side) before that month; targets may be zero for nodes
    that sit the month out.
    """
    X_rows = []
    y_rows = []
    labels = []
    for t in months:
        active = _active_before(series, t)
        w = series.snapshots[t].out_flows()
        for i in sorted(active):
            X_rows.append(volume_features(series, i, t))
            y_rows.append(np.log1p(w[i]))
            labels.append((i, t))
    if not X_rows:
        raise ValueError("no trainable sender-months in the given window")
    return np.array(X_rows), np.array(y_rows), labels


@dataclass
class VolumeModel:
    gbdt: GBDTModel

    def as_dict(self) -> dict:
        return self.gbdt.as_dict()

    @classmethod
    def from_dict(cls, payload: dict) -> "VolumeModel":
        return cls(gbdt=GBDTModel.from_dict(payload))


def train_volume_model(
    series: SnapshotSeries,
    months,
    n_rounds: int = 500,
    learning_rate: float = 0.05,
    max_depth: int = 4,
) -> VolumeModel:
    X, y, _ = volume_training_table(series, months)
    return VolumeModel(
        gbdt=gbdt_fit(
            X, y, n_rounds=n_rounds, learning_rate=learning_rate, max_depth=max_depth
        )
    )


def predict_volumes(
    model: VolumeModel, series: SnapshotSeries, t: int, senders=None
) -> dict[int, float]:
    """Predicted outgoing volume per sender at month t, inverted from log scale.

    senders defaults to every node active before t.  Predictions are clamped
    at zero after the expm1 inversion.
    """
    if senders is None:
        senders = sorted(_active_before(series, t))
    senders = list(senders)
    if not senders:
        return {}
    X = np.array([volume_features(series, i, t) for i in senders])
    log_pred = gbdt_predict(model.gbdt, X)
    return {i: max(0.0, float(np.expm1(v))) for i, v in zip(senders, log_pred)}
