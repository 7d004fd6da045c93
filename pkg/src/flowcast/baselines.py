"""Pure-memory baselines for ratio and volume prediction.

These predictors look only at what a sender has already done.  The
full-history variants average over every month in which the sender was
active; the window variants use the single most recent month.  Both know
nothing about the month being predicted, which makes them immune to
leakage and a natural floor for anything learned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import SnapshotSeries, decompose


class ColdStartError(Exception):
    """Raised when a prediction is requested for a sender with no usable history."""


@dataclass
class EdgeBankState:
    """History of a series up to (and excluding) a target month.

    Built once per target month via from_series; every predictor in this
    module reads only this state, so no information from the target month
    or later can reach a prediction.
    """

    t: int
    n_nodes: int
    ratio_history: dict[int, list[dict[int, float]]] = field(default_factory=dict)
    weight_history: dict[int, list[dict[int, float]]] = field(default_factory=dict)
    volume_history: dict[int, list[float]] = field(default_factory=dict)
    last_active: dict[int, int] = field(default_factory=dict)
    seen_pairs: set = field(default_factory=set)

    @classmethod
    def from_series(cls, series: SnapshotSeries, t: int) -> "EdgeBankState":
        if not 0 <= t <= series.n_snapshots:
            raise ValueError(f"target month {t} outside [0, {series.n_snapshots}]")
        state = cls(t=t, n_nodes=series.n_nodes)
        for idx in range(t):
            snap = series.snapshots[idx]
            decomp = decompose(snap)
            for i, row in decomp.ratios.items():
                state.ratio_history.setdefault(i, []).append(dict(row))
                state.weight_history.setdefault(i, []).append(
                    {j: a for (src, j), a in snap.adjacency.items() if src == i}
                )
                state.volume_history.setdefault(i, []).append(float(decomp.w[i]))
                state.last_active[i] = idx
            state.seen_pairs.update(snap.adjacency)
        return state

    def is_cold(self, sender: int) -> bool:
        return sender not in self.last_active

    def warm_senders(self) -> list[int]:
        return sorted(self.last_active)


def _normalize(row: dict[int, float]) -> dict[int, float]:
    total = sum(row.values())
    if total <= 0:
        raise ColdStartError("history row has no mass")
    return {j: v / total for j, v in row.items() if v > 0}


def edgebank_ratio(state: EdgeBankState, sender: int, mode: str = "mean-ratios") -> dict[int, float]:
    """Predicted ratio row for a sender from its full history.

    mode="mean-ratios" averages the per-month ratio rows (a destination the
    sender skipped that month contributes 0) and renormalizes.
    mode="mean-weights" averages the raw per-month amounts instead and then
    normalizes, which weights busy months more heavily.
    """
    if state.is_cold(sender):
        raise ColdStartError(f"sender {sender} has no activity before month {state.t}")
    if mode == "mean-ratios":
        rows = state.ratio_history[sender]
    elif mode == "mean-weights":
        rows = state.weight_history[sender]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    acc: dict[int, float] = {}
    for row in rows:
        for j, v in row.items():
            acc[j] = acc.get(j, 0.0) + v
    return _normalize({j: v / len(rows) for j, v in acc.items()})


def edgebank_tw_ratio(state: EdgeBankState, sender: int) -> dict[int, float]:
    """Ratio row from the most recent month only; sender must be active at t-1."""
    if state.last_active.get(sender) != state.t - 1:
        raise ColdStartError(f"sender {sender} inactive in month {state.t - 1}")
    return _normalize(dict(state.ratio_history[sender][-1]))


def edgebank_volume(state: EdgeBankState, sender: int) -> float:
    """Mean outgoing volume over the sender's active months."""
    if state.is_cold(sender):
        raise ColdStartError(f"sender {sender} has no activity before month {state.t}")
    return float(np.mean(state.volume_history[sender]))


def edgebank_tw_volume(state: EdgeBankState, sender: int) -> float:
    """Outgoing volume in the most recent month; sender must be active at t-1."""
    if state.last_active.get(sender) != state.t - 1:
        raise ColdStartError(f"sender {sender} inactive in month {state.t - 1}")
    return float(state.volume_history[sender][-1])


def predict_ratio_rows(
    state: EdgeBankState, mode: str = "mean-ratios", window: bool = False
) -> tuple[dict[int, dict[int, float]], list[int]]:
    """Ratio rows for every sender with history; second item lists skipped senders.

    With window=True the single-month variant is used and senders inactive in
    month t-1 are skipped alongside genuinely cold ones.
    """
    rows: dict[int, dict[int, float]] = {}
    skipped = []
    for sender in range(state.n_nodes):
        try:
            if window:
                rows[sender] = edgebank_tw_ratio(state, sender)
            else:
                rows[sender] = edgebank_ratio(state, sender, mode=mode)
        except ColdStartError:
            skipped.append(sender)
    return rows, skipped


def predict_volumes(
    state: EdgeBankState, window: bool = False
) -> tuple[dict[int, float], list[int]]:
    """Volume predictions for every sender with history, plus the skipped list."""
    volumes: dict[int, float] = {}
    skipped = []
    for sender in range(state.n_nodes):
        try:
            if window:
                volumes[sender] = edgebank_tw_volume(state, sender)
            else:
                volumes[sender] = edgebank_volume(state, sender)
        except ColdStartError:
            skipped.append(sender)
    return volumes, skipped
