"""flowcast: forecasting who pays whom, and how much, in monthly transfer networks.

The library decomposes each monthly snapshot into per-sender outflow totals
and row-stochastic remittance ratios, predicts the two parts separately
(an attention model over temporal neighborhoods for ratios, boosted
regression trees for volumes), and recombines them into a forecast
adjacency matrix.  Memorization baselines, descriptive network statistics,
and the link formation/dissolution evaluation protocol are included.
"""

from .graph import (
    EmptyDatasetError,
    FlowDecomposition,
    IngestConfig,
    NodeUniverse,
    ParseError,
    SnapshotNetwork,
    SnapshotSeries,
    TemporalEdge,
    build_snapshots,
    decompose,
    edge_features,
    ingest_edges,
    recompose,
    series_from_adjacency,
)

__version__ = "0.1.0"
