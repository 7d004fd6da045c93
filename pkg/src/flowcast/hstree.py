"""Hierarchical softmax over destination labels.

Predicting a ratio row means scoring every possible destination, which is
expensive with a flat softmax once the node count grows.  Labels are
instead organized into a shallow tree (depth capped at 3) by recursive
k-means on label representations; the probability of a destination is the
product of per-node child-softmax choices along its path, so a depth-1
tree reproduces the flat softmax exactly.

Label representations concatenate a node's structural embedding with the
mean feature vector of its incoming edges over the training window, so
destinations that attract similar flows share subtrees.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, concat, log_softmax
from .graph import N_EDGE_FEATURES, SnapshotSeries, edge_feature_table

MAX_TREE_DEPTH = 3


def kmeans(X: np.ndarray, k: int, rng, n_init: int = 4, max_iter: int = 100):
    """Lloyd's algorithm with k-means++ seeding and restart selection.

    Returns (centers, labels, inertia) of the restart with the lowest
    inertia.  Empty clusters are refilled with the point farthest from its
    assigned center; distance ties resolve to the lowest cluster index.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    best = None
    for _ in range(n_init):
        centers = _kmeanspp_seed(X, k, rng)
        labels = np.zeros(n, dtype=int)
        for sweep in range(max_iter):
            d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_labels = np.argmin(d2, axis=1)
            for c in range(k):
                if not np.any(new_labels == c):
                    # refill from the point worst served by its cluster, but only
                    # when moving it actually helps; identical points collapse
                    # instead, and the caller falls back to id chunks
                    own = d2[np.arange(n), new_labels]
                    worst = int(np.argmax(own))
                    if own[worst] > 0:
                        new_labels[worst] = c
                        d2[worst, :] = 0.0
            if sweep > 0 and np.array_equal(new_labels, labels):
                break
            labels = new_labels
            for c in range(k):
                members = X[labels == c]
                if members.size:
                    centers[c] = members.mean(axis=0)
        inertia = float(((X - centers[labels]) ** 2).sum())
        if best is None or inertia < best[2]:
            best = (centers, labels, inertia)
    return best


def _kmeanspp_seed(X: np.ndarray, k: int, rng) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    for _ in range(k - 1):
        d2 = np.min(
            ((X[:, None, :] - np.array(centers)[None, :, :]) ** 2).sum(axis=2), axis=1
        )
        total = d2.sum()
        if total <= 0:
            centers.append(X[rng.integers(n)])
            continue
        centers.append(X[rng.choice(n, p=d2 / total)])
    return np.array(centers)


@dataclass
class TreeNode:
    """One softmax decision: children are ("node", node_index) or ("label", label_id)."""

    children: list = field(default_factory=list)


@dataclass
class HSTree:
    nodes: list
    weights: list
    biases: list
    n_labels: int
    out_dim: int
    path_matrix: np.ndarray  # (n_labels, max_depth) indices into flat child slots
    pad_index: int
    node_offsets: np.ndarray

    @property
    def depth(self) -> int:
        return self.path_matrix.shape[1]


def build_hs_tree(
    representations: np.ndarray,
    out_dim: int,
    depth: int = MAX_TREE_DEPTH,
    branching: int | None = None,
    seed: int = 0,
    n_init: int = 4,
) -> HSTree:
    """Cluster labels into a decision tree and initialize its softmax parameters.

    branching defaults to ceil(N^(1/3)), which keeps a depth-3 tree roughly
    balanced.  Groups come from recursive k-means on the representations;
    when clustering cannot produce two non-empty groups (all representations
    identical, say) labels are split into contiguous id chunks instead so the
    tree shape never degenerates.
    """
    reps = np.asarray(representations, dtype=float)
    n_labels = reps.shape[0]
    if n_labels < 1:
        raise ValueError("need at least one label")
    if not 1 <= depth <= MAX_TREE_DEPTH:
        raise ValueError(f"depth must be in [1, {MAX_TREE_DEPTH}]")
    if branching is None:
        branching = max(2, int(np.ceil(n_labels ** (1.0 / 3.0))))
    if branching < 2:
        raise ValueError("branching must be at least 2")
    rng = np.random.default_rng(seed)
    nodes: list[TreeNode] = []

    def grow(ids: np.ndarray, remaining: int) -> int:
        idx = len(nodes)
        nodes.append(TreeNode())
        if remaining == 1 or len(ids) <= branching:
            nodes[idx].children = [("label", int(v)) for v in np.sort(ids)]
            return idx
        _, labels, _ = kmeans(reps[ids], branching, rng, n_init=n_init)
        groups = [ids[labels == c] for c in range(branching)]
        groups = [g for g in groups if len(g) > 0]
        if len(groups) < 2:
            groups = [g for g in np.array_split(np.sort(ids), branching) if len(g) > 0]
        nodes[idx].children = [("node", grow(g, remaining - 1)) for g in groups]
        return idx

    grow(np.arange(n_labels), depth)

    weights = []
    biases = []
    for node in nodes:
        k = len(node.children)
        weights.append(rng.standard_normal((k, out_dim)) / np.sqrt(out_dim))
        biases.append(np.zeros(k))

    offsets = np.cumsum([0] + [len(n.children) for n in nodes])
    paths: dict[int, list[int]] = {}

    def walk(idx: int, prefix: list[int]) -> None:
        for slot, (kind, ref) in enumerate(nodes[idx].children):
            flat = int(offsets[idx]) + slot
            if kind == "label":
                paths[ref] = prefix + [flat]
            else:
                walk(ref, prefix + [flat])

    walk(0, [])
    if set(paths) != set(range(n_labels)):
        raise AssertionError("tree does not cover every label exactly once")
    max_depth = max(len(p) for p in paths.values())
    pad = int(offsets[-1])
    matrix = np.full((n_labels, max_depth), pad, dtype=int)
    for label, p in paths.items():
        matrix[label, : len(p)] = p
    return HSTree(
        nodes=nodes,
        weights=weights,
        biases=biases,
        n_labels=n_labels,
        out_dim=out_dim,
        path_matrix=matrix,
        pad_index=pad,
        node_offsets=offsets,
    )


def hsoftmax_logprobs(tree: HSTree, Z: np.ndarray, weights=None, biases=None) -> np.ndarray:
    """Log probability of every label for each row of Z, in plain numpy.

    weights/biases default to the parameters stored on the tree; passing
    trained arrays overrides them.
    """
    weights = tree.weights if weights is None else weights
    biases = tree.biases if biases is None else biases
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    blocks = []
    for W, b in zip(weights, biases):
        logits = Z @ W.T + b
        shifted = logits - logits.max(axis=1, keepdims=True)
        blocks.append(shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True)))
    flat = np.concatenate(blocks + [np.zeros((Z.shape[0], 1))], axis=1)
    return flat[:, tree.path_matrix].sum(axis=2)


def tree_leaf_logprobs(tree: HSTree, weights, biases, Z: Tensor) -> Tensor:
    """Differentiable version of hsoftmax_logprobs for Tensor parameters.

    weights[i]/biases[i] are Tensors matching tree.nodes[i]; Z has shape
    (batch, out_dim).  Returns a (batch, n_labels) Tensor of log probabilities.
    """
    blocks = []
    for W, b in zip(weights, biases):
        logits = Z @ W.T + b.reshape(1, -1)
        blocks.append(log_softmax(logits, axis=1))
    blocks.append(Tensor(np.zeros((Z.shape[0], 1))))
    flat = concat(blocks, axis=1)
    return flat[:, tree.path_matrix].sum(axis=2)


def label_representations(
    series: SnapshotSeries, node_embeddings: np.ndarray, t_end: int
) -> np.ndarray:
    """Concat of structural embedding and mean incoming edge features before t_end.

    Nodes that never receive in [0, t_end) keep a zero feature block; the
    embedding half still separates them.
    """
    X = np.asarray(node_embeddings, dtype=float)
    n = series.n_nodes
    if X.shape[0] != n:
        raise ValueError(f"embeddings cover {X.shape[0]} nodes, series has {n}")
    if not 0 <= t_end <= series.n_snapshots:
        raise ValueError(f"t_end {t_end} outside [0, {series.n_snapshots}]")
    sums = np.zeros((n, N_EDGE_FEATURES))
    counts = np.zeros(n)
    for snap in series.snapshots[:t_end]:
        for (_, j), feats in edge_feature_table(snap).items():
            sums[j] += feats
            counts[j] += 1
    means = np.divide(sums, counts[:, None], out=np.zeros_like(sums), where=counts[:, None] > 0)
    return np.concatenate([X, means], axis=1)
