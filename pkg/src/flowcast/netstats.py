"""Descriptive statistics for snapshot series.

Covers the usual reconnaissance on a temporal transfer network: snapshot /
node / edge counts, average sparsity, how persistently individual pairs
recur, complementary cumulative distributions of degrees and weights on the
time-aggregated graph, and a continuous maximum-likelihood power-law fit
with KS-optimal tail selection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import SnapshotSeries


@dataclass
class NetworkSummary:
    n_snapshots: int
    n_nodes: int
    n_edges: int
    avg_sparsity: float
    avg_edge_persistence: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class PowerLawFit:
    alpha: float
    x_min: float
    ks_distance: float
    n_tail: int


def summarize(series: SnapshotSeries, pair_basis: str = "directed") -> NetworkSummary:
    """Headline statistics of a series.

    n_edges counts (pair, snapshot) entries after monthly aggregation.
    Sparsity per snapshot is the edge count over the number of possible
    node pairs excluding self-loops; persistence is the mean, over unique
    pairs, of the fraction of snapshots in which the pair appears.

    pair_basis="directed" keys pairs by (src, dst) and uses N(N-1) possible
    pairs; "undirected" collapses orientation and uses N(N-1)/2, which is how
    density is conventionally reported for undirected projections.
    """
    if series.n_snapshots == 0:
        raise ValueError("cannot summarize an empty series")
    if pair_basis not in ("directed", "undirected"):
        raise ValueError(f"unknown pair_basis {pair_basis!r}")

    n = series.n_nodes
    possible = n * (n - 1) if pair_basis == "directed" else n * (n - 1) // 2
    appearances: dict = {}
    n_edges = 0
    sparsities = []
    for snap in series.snapshots:
        pairs = set(snap.adjacency)
        if pair_basis == "undirected":
            pairs = {(min(i, j), max(i, j)) for i, j in pairs}
        n_edges += len(pairs)
        sparsities.append(len(pairs) / possible if possible else 0.0)
        for p in pairs:
            appearances[p] = appearances.get(p, 0) + 1

    if appearances:
        persistence = float(np.mean([c / series.n_snapshots for c in appearances.values()]))
    else:
        persistence = 0.0
    return NetworkSummary(
        n_snapshots=series.n_snapshots,
        n_nodes=n,
        n_edges=n_edges,
        avg_sparsity=float(np.mean(sparsities)),
        avg_edge_persistence=persistence,
    )


def ccdf(values) -> tuple[np.ndarray, np.ndarray]:
    """Empirical P(X >= x) at each distinct observed x, ascending in x."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("ccdf needs at least one value")
    xs = np.unique(values)
    sorted_vals = np.sort(values)
    # count of samples >= x via position of x in the sorted sample
    n_ge = values.size - np.searchsorted(sorted_vals, xs, side="left")
    return xs, n_ge / values.size


def aggregate_distributions(series: SnapshotSeries) -> dict:
    """Degree and weight samples of the time-aggregated network.

    Sums amounts over all snapshots, then returns positive in/out degree and
    in/out weight samples (nodes with zero in a given direction are omitted
    from that sample).
    """
    n = series.n_nodes
    agg: dict = {}
    for snap in series.snapshots:
        for key, a in snap.adjacency.items():
            agg[key] = agg.get(key, 0.0) + a
    in_deg = np.zeros(n)
    out_deg = np.zeros(n)
    in_w = np.zeros(n)
    out_w = np.zeros(n)
    for (i, j), a in agg.items():
        out_deg[i] += 1
        in_deg[j] += 1
        out_w[i] += a
        in_w[j] += a
    return {
        "in_degree": in_deg[in_deg > 0],
        "out_degree": out_deg[out_deg > 0],
        "in_weight": in_w[in_w > 0],
        "out_weight": out_w[out_w > 0],
    }


def _alpha_mle(tail: np.ndarray, x_min: float) -> float:
    return 1.0 + tail.size / np.sum(np.log(tail / x_min))


def _ks_distance(tail_sorted: np.ndarray, x_min: float, alpha: float) -> float:
    n = tail_sorted.size
    fitted = 1.0 - (tail_sorted / x_min) ** (1.0 - alpha)
    empirical_hi = np.arange(1, n + 1) / n
    empirical_lo = np.arange(0, n) / n
    return float(
        max(np.max(np.abs(fitted - empirical_hi)), np.max(np.abs(fitted - empirical_lo)))
    )


def fit_power_law(values, x_min: float | None = None, min_tail: int = 10) -> PowerLawFit:
    """Continuous power-law fit by maximum likelihood.

    alpha = 1 + n / sum(log(x_i / x_min)) over the tail x_i >= x_min.  When
    x_min is not given it is chosen from the distinct observed values (capped
    at the 90th percentile so a tail always remains) to minimize the KS
    distance between the empirical tail and the fitted CDF; candidates with
    fewer than `min_tail` samples are not considered.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0 or np.any(values <= 0):
        raise ValueError("power-law fit needs positive values")
    values = np.sort(values)

    if x_min is not None:
        tail = values[values >= x_min]
        if tail.size == 0 or np.all(tail == x_min):
            raise ValueError("no spread in the tail above the given x_min")
        alpha = _alpha_mle(tail, x_min)
        return PowerLawFit(alpha, float(x_min), _ks_distance(tail, x_min, alpha), tail.size)

    cap = np.quantile(values, 0.9)
    candidates = np.unique(values)
    candidates = candidates[candidates <= cap]
    log_values = np.log(values)
    suffix_logsum = np.concatenate([np.cumsum(log_values[::-1])[::-1], [0.0]])

    best = None
    for c in candidates:
        start = int(np.searchsorted(values, c, side="left"))
        n_tail = values.size - start
        if n_tail < min_tail:
            continue
        denom = suffix_logsum[start] - n_tail * np.log(c)
        if denom <= 0:
            continue
        alpha = 1.0 + n_tail / denom
        ks = _ks_distance(values[start:], c, alpha)
        if best is None or ks < best.ks_distance:
            best = PowerLawFit(float(alpha), float(c), ks, int(n_tail))
    if best is None:
        raise ValueError(
            f"power-law fit needs at least {min_tail} tail samples above some candidate x_min"
        )
    return best
