"""Temporal transfer graphs.

Ingests timestamped weighted edges, buckets them into UTC calendar-month
snapshots, and performs the outflow/ratio decomposition that the rest of
the library builds on: each sender's row of the monthly adjacency matrix
is factored into a total outflow w_i and a row-stochastic ratio vector.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

EDGE_CSV_HEADER = ["src", "dst", "timestamp", "amount"]

# Number of per-edge descriptors: log amount, row share, sender share of
# total volume, share of recipient inflow, share of total volume.
N_EDGE_FEATURES = 5


class ParseError(ValueError):
    """A row of an edge CSV stream could not be parsed."""


class EmptyDatasetError(ValueError):
    """No usable rows survived ingestion, or an empty edge list was given."""


@dataclass(frozen=True)
class TemporalEdge:
    """One raw transfer: src -> dst of `amount` at `timestamp` (epoch seconds, UTC)."""

    src: int
    dst: int
    timestamp: int
    amount: float


@dataclass(frozen=True)
class TransferEvent:
    """A raw transfer re-expressed at month granularity (used for neighbor recency)."""

    month: int
    src: int
    dst: int
    amount: float


class NodeUniverse:
    """Bijection between dense integer ids and the original node labels."""

    def __init__(self, labels):
        self.labels = [str(x) for x in labels]
        self.ids = {lab: i for i, lab in enumerate(self.labels)}
        if len(self.ids) != len(self.labels):
            raise ValueError("node labels are not unique")

    def __len__(self):
        return len(self.labels)

    def id_of(self, label) -> int:
        return self.ids[str(label)]

    def label_of(self, node_id: int) -> str:
        return self.labels[node_id]

    @classmethod
    def trivial(cls, n_nodes: int) -> "NodeUniverse":
        return cls(str(i) for i in range(n_nodes))


class SnapshotNetwork:
    """One calendar month of aggregated flow.

    `adjacency` maps (src, dst) to the summed positive amount for that month;
    structural zeros are absent rather than stored.
    """

    def __init__(self, index: int, n_nodes: int, adjacency: dict):
        for (i, j), a in adjacency.items():
            if not (0 <= i < n_nodes and 0 <= j < n_nodes):
                raise ValueError(f"edge ({i},{j}) outside universe of {n_nodes} nodes")
            if not (a > 0) or not math.isfinite(a):
                raise ValueError(f"non-positive or non-finite amount stored for ({i},{j})")
        self.index = index
        self.n_nodes = n_nodes
        self.adjacency = dict(adjacency)

    @property
    def n_edges(self) -> int:
        return len(self.adjacency)

    def out_flows(self) -> np.ndarray:
        w = np.zeros(self.n_nodes)
        for (i, _), a in self.adjacency.items():
            w[i] += a
        return w

    def in_flows(self) -> np.ndarray:
        v = np.zeros(self.n_nodes)
        for (_, j), a in self.adjacency.items():
            v[j] += a
        return v

    def total_volume(self) -> float:
        return float(sum(self.adjacency.values()))


@dataclass
class SnapshotSeries:
    """Contiguous, chronologically ordered monthly snapshots over one node universe."""

    snapshots: list
    universe: NodeUniverse
    start_month: tuple  # (year, month) of snapshot 0
    events: list = field(default_factory=list)

    def __post_init__(self):
        for t, snap in enumerate(self.snapshots):
            if snap.index != t:
                raise ValueError("snapshot indices must be contiguous from 0")

    @property
    def n_snapshots(self) -> int:
        return len(self.snapshots)

    @property
    def n_nodes(self) -> int:
        return len(self.universe)

    def month_label(self, t: int) -> str:
        y, m = self.start_month
        y, m = divmod((y * 12 + m - 1) + t, 12)
        return f"{y:04d}-{m + 1:02d}"


@dataclass
class FlowDecomposition:
    """Per-month factorization A_i. = w_i * R_i. with row-stochastic R.

    Rows of `ratios` exist only for senders with positive outflow; a node
    that sent nothing has no row (the factorization is undefined there).
    """

    w: np.ndarray
    ratios: dict  # sender id -> {dst id: ratio}

    def row_array(self, i: int) -> np.ndarray:
        """Dense ratio row for sender i (zeros if i has no row)."""
        out = np.zeros(len(self.w))
        for j, r in self.ratios.get(i, {}).items():
            out[j] = r
        return out


@dataclass
class IngestConfig:
    min_activity: int = 1
    date_start: str | None = None  # "YYYY-MM-DD", inclusive
    date_end: str | None = None  # "YYYY-MM-DD", inclusive
    allow_self_loops: bool = False


@dataclass
class IngestReport:
    n_rows: int = 0
    n_kept: int = 0
    dropped_non_positive: int = 0
    dropped_self_loop: int = 0
    dropped_out_of_range: int = 0
    dropped_low_activity: int = 0
    low_activity_nodes: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class IngestResult:
    edges: list
    universe: NodeUniverse
    report: IngestReport


def _parse_timestamp(text: str, line_no: int) -> int:
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        dt = datetime.strptime(text, "%Y-%m-%d").replace(tzinfo=timezone.utc)
        return int(dt.timestamp())
    except ValueError:
        raise ParseError(f"line {line_no}: bad timestamp {text!r} (want epoch seconds or YYYY-MM-DD)")


def _date_bound(text: str, end: bool) -> int:
    dt = datetime.strptime(text, "%Y-%m-%d").replace(tzinfo=timezone.utc)
    ts = int(dt.timestamp())
    return ts + 86400 if end else ts


def ingest_edges(source, config: IngestConfig | None = None) -> IngestResult:
    """Parse an edge CSV stream into validated, densely renumbered edges.

    `source` is any iterable of text lines with header src,dst,timestamp,amount.
    Rows with non-positive amounts, disallowed self-loops, or timestamps outside
    the configured date range are dropped and counted in the report; rows from
    nodes with fewer than `min_activity` appearances (as sender or recipient)
    are dropped afterwards.  Malformed rows raise ParseError with their line
    number.  Returns edges sorted by timestamp with node ids renumbered densely
    in order of first appearance.
    """
    config = config or IngestConfig()
    reader = csv.reader(source)
    report = IngestReport()

    header = next(reader, None)
    if header is None or [h.strip() for h in header] != EDGE_CSV_HEADER:
        raise ParseError(f"line 1: expected header {','.join(EDGE_CSV_HEADER)}")

    lo = _date_bound(config.date_start, end=False) if config.date_start else None
    hi = _date_bound(config.date_end, end=True) if config.date_end else None

    rows = []  # (timestamp, src_label, dst_label, amount)
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ParseError(f"line {line_no}: expected 4 fields, got {len(row)}")
        report.n_rows += 1
        src, dst = row[0].strip(), row[1].strip()
        ts = _parse_timestamp(row[2], line_no)
        try:
            amount = float(row[3])
        except ValueError:
            raise ParseError(f"line {line_no}: bad amount {row[3]!r}")
        if not math.isfinite(amount) or amount <= 0:
            report.dropped_non_positive += 1
            continue
        if src == dst and not config.allow_self_loops:
            report.dropped_self_loop += 1
            continue
        if (lo is not None and ts < lo) or (hi is not None and ts >= hi):
            report.dropped_out_of_range += 1
            continue
        rows.append((ts, src, dst, amount))

    if config.min_activity > 1:
        activity: dict = {}
        for _, src, dst, _a in rows:
            activity[src] = activity.get(src, 0) + 1
            activity[dst] = activity.get(dst, 0) + 1
        weak = {lab for lab, c in activity.items() if c < config.min_activity}
        report.low_activity_nodes = len(weak)
        kept = []
        for r in rows:
            if r[1] in weak or r[2] in weak:
                report.dropped_low_activity += 1
            else:
                kept.append(r)
        rows = kept

    if not rows:
        raise EmptyDatasetError("no edges survived ingestion")

    rows.sort(key=lambda r: r[0])
    labels: list = []
    ids: dict = {}
    for _, src, dst, _a in rows:
        for lab in (src, dst):
            if lab not in ids:
                ids[lab] = len(labels)
                labels.append(lab)
    universe = NodeUniverse(labels)
    edges = [TemporalEdge(ids[s], ids[d], ts, a) for ts, s, d, a in rows]
    report.n_kept = len(edges)
    return IngestResult(edges, universe, report)


def _year_month(ts: int) -> tuple:
    dt = datetime.fromtimestamp(ts, tz=timezone.utc)
    return dt.year, dt.month


def _month_index(ym: tuple, ym0: tuple) -> int:
    return (ym[0] - ym0[0]) * 12 + (ym[1] - ym0[1])


def build_snapshots(edges, universe: NodeUniverse | None = None) -> SnapshotSeries:
    """Bucket edges into one snapshot per UTC calendar month.

    Produces a contiguous run of months from the first to the last edge,
    including empty months in between; same-pair amounts within a month are
    summed.  The raw per-transfer event list is retained on the series for
    recency-based neighbor sampling.
    """
    if not edges:
        raise EmptyDatasetError("cannot build snapshots from an empty edge list")
    edges = sorted(edges, key=lambda e: e.timestamp)
    if universe is None:
        n_nodes = max(max(e.src, e.dst) for e in edges) + 1
        universe = NodeUniverse.trivial(n_nodes)
    ym0 = _year_month(edges[0].timestamp)
    n_months = _month_index(_year_month(edges[-1].timestamp), ym0) + 1

    adjacency = [dict() for _ in range(n_months)]
    events = []
    for e in edges:
        t = _month_index(_year_month(e.timestamp), ym0)
        key = (e.src, e.dst)
        adjacency[t][key] = adjacency[t].get(key, 0.0) + e.amount
        events.append(TransferEvent(t, e.src, e.dst, e.amount))

    snapshots = [SnapshotNetwork(t, len(universe), adj) for t, adj in enumerate(adjacency)]
    return SnapshotSeries(snapshots, universe, ym0, events)


def series_from_adjacency(adjacencies, n_nodes: int, start_month=(2020, 1)) -> SnapshotSeries:
    """Build a series directly from per-month adjacency dicts (test/fixture helper).

    Events are synthesized as one transfer per stored (src, dst, month) entry.
    """
    snapshots = [SnapshotNetwork(t, n_nodes, adj) for t, adj in enumerate(adjacencies)]
    events = [
        TransferEvent(t, i, j, a)
        for t, adj in enumerate(adjacencies)
        for (i, j), a in sorted(adj.items())
    ]
    return SnapshotSeries(snapshots, NodeUniverse.trivial(n_nodes), start_month, events)


def decompose(snapshot: SnapshotNetwork) -> FlowDecomposition:
    """Split a snapshot into per-node outflow totals and row-stochastic ratios."""
    w = snapshot.out_flows()
    ratios: dict = {}
    for (i, j), a in snapshot.adjacency.items():
        ratios.setdefault(i, {})[j] = a / w[i]
    return FlowDecomposition(w, ratios)


def recompose(w_hat, ratio_rows: dict, n_nodes: int, index: int = 0) -> SnapshotNetwork:
    """Inverse of decompose: A_ij = w_i * R_ij for senders with positive volume."""
    w_hat = np.asarray(w_hat, dtype=float)
    if w_hat.shape != (n_nodes,):
        raise ValueError(f"volume vector has shape {w_hat.shape}, want ({n_nodes},)")
    adjacency = {}
    for i, row in ratio_rows.items():
        if not (0 <= i < n_nodes):
            raise ValueError(f"sender id {i} outside universe of {n_nodes} nodes")
        if w_hat[i] <= 0:
            continue
        for j, r in row.items():
            if not (0 <= j < n_nodes):
                raise ValueError(f"destination id {j} outside universe of {n_nodes} nodes")
            if r > 0:
                adjacency[(i, j)] = w_hat[i] * r
    return SnapshotNetwork(index, n_nodes, adjacency)


def edge_features(decomp: FlowDecomposition, in_flows, total_volume: float, i: int, j: int) -> np.ndarray:
    """Five descriptors of an existing edge (i, j).

    [log1p(amount), share of sender's outflow, sender's share of total volume,
    share of recipient's inflow, share of total volume].  Only defined where
    A_ij > 0.
    """
    row = decomp.ratios.get(i, {})
    if j not in row:
        raise ValueError(f"edge ({i},{j}) absent: features are defined on existing edges only")
    amount = decomp.w[i] * row[j]
    return np.array(
        [
            math.log1p(amount),
            row[j],
            decomp.w[i] / total_volume,
            amount / in_flows[j],
            amount / total_volume,
        ]
    )


def edge_feature_table(snapshot: SnapshotNetwork) -> dict:
    """Edge-feature vectors for every edge of a snapshot, keyed by (src, dst)."""
    decomp = decompose(snapshot)
    inflow = snapshot.in_flows()
    total = snapshot.total_volume()
    return {
        (i, j): edge_features(decomp, inflow, total, i, j) for (i, j) in snapshot.adjacency
    }
