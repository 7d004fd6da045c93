"""Structural node embeddings and the periodic time encoder.

Node positions are summarized by heat diffusion on the warmup graph: for a
random-walk Laplacian L = I - P, the column exp(-tau L) e_v describes how
mass initially placed at v spreads after time tau.  A node's embedding
concatenates, for several tau and for both edge directions, the largest
coefficients of that column plus its first three raw moments, then is
truncated or zero-padded to a fixed width.

Time deltas are encoded with learnable cosine features cos(t w + b); the
initial frequencies form a geometric ladder so different components resolve
different horizons.
"""

from __future__ import annotations

import numpy as np

from .graph import SnapshotSeries

DEFAULT_TAUS = (0.25, 0.5, 1.0)
DEFAULT_EMBED_DIM = 32


def warmup_weights(series: SnapshotSeries, k: int = 3) -> np.ndarray:
    """Dense weight matrix summed over the first k months of a series."""
    if not 1 <= k <= series.n_snapshots:
        raise ValueError(f"warmup window {k} outside [1, {series.n_snapshots}]")
    n = series.n_nodes
    W = np.zeros((n, n))
    for snap in series.snapshots[:k]:
        for (i, j), a in snap.adjacency.items():
            W[i, j] += a
    return W


def random_walk_laplacian(W: np.ndarray) -> np.ndarray:
    """I - P with P the out-degree-normalized walk matrix; zero rows of W stay zero in P."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("weight matrix must be square")
    out = W.sum(axis=1)
    P = np.divide(W, out[:, None], out=np.zeros_like(W), where=out[:, None] > 0)
    return np.eye(W.shape[0]) - P


def heat_kernel(W: np.ndarray, tau: float, order: int = 20) -> np.ndarray:
    """Truncated Taylor approximation of exp(-tau L); column v is the kernel of node v."""
    if order < 4:
        raise ValueError("taylor order below 4 is too coarse to be meaningful")
    if tau <= 0:
        raise ValueError("tau must be positive")
    L = random_walk_laplacian(W)
    n = L.shape[0]
    term = np.eye(n)
    acc = np.eye(n)
    for k in range(1, order + 1):
        term = (-tau / k) * (L @ term)
        acc = acc + term
    return acc


def _column_features(column: np.ndarray, top_m: int) -> np.ndarray:
    top = np.sort(column)[::-1][:top_m]
    if top.size < top_m:
        top = np.concatenate([top, np.zeros(top_m - top.size)])
    moments = [np.mean(column), np.mean(column**2), np.mean(column**3)]
    return np.concatenate([top, moments])


def structural_embed(
    W: np.ndarray,
    dim: int = DEFAULT_EMBED_DIM,
    taus=DEFAULT_TAUS,
    order: int = 20,
    top_m: int = 8,
) -> tuple[np.ndarray, list[int]]:
    """Heat-diffusion embeddings for every node of a weighted digraph.

    Returns (X, isolated) where X has shape (n, dim) and isolated lists nodes
    that touch no edge in W; those nodes still get a (degenerate) embedding,
    the flag just lets callers decide whether to trust it.

    For each tau, the forward-walk kernel and the reversed-edge kernel each
    contribute top_m sorted coefficients and three raw moments, in the order
    tau -> direction.  The concatenation is truncated or zero-padded to dim.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if dim < 1:
        raise ValueError("embedding dim must be positive")
    blocks = []
    for tau in taus:
        for direction in (W, W.T):
            kernel = heat_kernel(direction, tau, order=order)
            blocks.append(
                np.stack([_column_features(kernel[:, v], top_m) for v in range(n)])
            )
    X = np.concatenate(blocks, axis=1)
    if X.shape[1] >= dim:
        X = X[:, :dim]
    else:
        X = np.concatenate([X, np.zeros((n, dim - X.shape[1]))], axis=1)
    touched = set()
    for i, j in zip(*np.nonzero(W)):
        touched.add(int(i))
        touched.add(int(j))
    isolated = [v for v in range(n) if v not in touched]
    return X, isolated


def save_embeddings(path, X: np.ndarray) -> None:
    """Write embeddings as CSV (node,e0,...); floats use repr for exact round trips."""
    X = np.asarray(X, dtype=float)
    with open(path, "w") as fh:
        fh.write("node," + ",".join(f"e{k}" for k in range(X.shape[1])) + "\n")
        for v in range(X.shape[0]):
            fh.write(str(v) + "," + ",".join(repr(float(x)) for x in X[v]) + "\n")


def load_embeddings(path, expected_nodes: int | None = None) -> np.ndarray:
    """Read embeddings written by save_embeddings.

    Rows must cover node ids 0..n-1 exactly once; expected_nodes, when given,
    additionally pins what n must be.
    """
    rows: dict[int, list[float]] = {}
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        if not header or header[0] != "node":
            raise ValueError("embedding file must start with a 'node' column")
        width = len(header) - 1
        for line_no, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != width + 1:
                raise ValueError(f"line {line_no}: expected {width + 1} fields")
            v = int(parts[0])
            if v in rows:
                raise ValueError(f"duplicate node {v}")
            rows[v] = [float(x) for x in parts[1:]]
    n = len(rows)
    if expected_nodes is not None and n != expected_nodes:
        raise ValueError(f"expected {expected_nodes} nodes, file has {n}")
    if set(rows) != set(range(n)):
        missing = sorted(set(range(n)) - set(rows))[:3]
        extra = sorted(set(rows) - set(range(n)))[:3]
        raise ValueError(f"node ids not contiguous (missing {missing}, unexpected {extra})")
    return np.array([rows[v] for v in range(n)])


class TimeEncoder:
    """Cosine features of a time delta: cos(t * w + b).

    Frequencies start on the geometric ladder w_k = 10^(-2k/d) (per month)
    and phases at zero; both are plain arrays so a training loop can update
    them in place.
    """

    def __init__(self, dim: int = 16):
        if dim < 1:
            raise ValueError("time encoding dim must be positive")
        self.dim = dim
        k = np.arange(dim, dtype=float)
        self.frequencies = 1.0 / np.power(10.0, 2.0 * k / dim)
        self.phases = np.zeros(dim)

    def encode(self, deltas) -> np.ndarray:
        """Encode a scalar delta to shape (dim,) or an array of deltas to (len, dim)."""
        deltas = np.asarray(deltas, dtype=float)
        out = np.cos(deltas[..., None] * self.frequencies + self.phases)
        return out
