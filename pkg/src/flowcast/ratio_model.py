"""Attention model over a sender's recent transfers, predicting ratio rows.

For sender i at month t the model looks at the K most recent transfer
events touching i before t, incoming and outgoing alike.  Each event
contributes a row combining the counterparty's structural embedding
(through a ReLU), the edge's five features in that month, and a cosine
encoding of how long ago it happened; the sender itself contributes a
reference row at time offset zero.  Single-head scaled dot-product
attention pools the event rows into a summary, a two-layer readout turns
the summary plus the raw embedding into a code vector, and the
hierarchical softmax over destination labels converts that code into a
full distribution -- the predicted ratio row.

Training minimizes binary cross-entropy between predicted and observed
rows over every active sender-month in the training window, by plain SGD
through the autodiff engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, concat, softmax
from .graph import SnapshotSeries, decompose
from .hstree import HSTree, tree_leaf_logprobs
from .runconfig import named_rng

PROB_EPS = 1e-12


class TrainingDivergedError(Exception):
    """Raised when the training loss stops being finite."""


@dataclass
class RatioConfig:
    embed_dim: int = 32
    attn_dim: int = 64
    time_dim: int = 16
    hidden_dim: int = 64
    out_dim: int = 64
    n_neighbors: int = 100
    tree_depth: int = 3
    tree_branching: int | None = None
    learning_rate: float = 1e-3
    epochs: int = 50
    batch_size: int = 256
    mix_lambda: float = 0.8
    warmup_months: int = 3
    time_learnable: bool = True
    seed: int = 0

    @property
    def row_dim(self) -> int:
        # embedding block + edge-feature block + time block
        return self.embed_dim + 5 + self.time_dim


class RatioParams:
    """All learnable arrays, initialized from named substreams of one seed."""

    def __init__(self, config: RatioConfig, tree: HSTree):
        if tree.out_dim != config.out_dim:
            raise ValueError("tree out_dim does not match config")
        m, d = config.row_dim, config.attn_dim
        rng_a = named_rng(config.seed, "init.attention")
        rng_r = named_rng(config.seed, "init.readout")

        k = np.arange(config.time_dim, dtype=float)
        self.frequencies = Tensor(
            1.0 / np.power(10.0, 2.0 * k / config.time_dim), requires_grad=True
        )
        self.phases = Tensor(np.zeros(config.time_dim), requires_grad=True)
        self.w_query = Tensor(rng_a.standard_normal((m, d)) / np.sqrt(m), requires_grad=True)
        self.w_key = Tensor(rng_a.standard_normal((m, d)) / np.sqrt(m), requires_grad=True)
        self.w_value = Tensor(rng_a.standard_normal((m, d)) / np.sqrt(m), requires_grad=True)
        mix = d + config.embed_dim
        self.w_hidden = Tensor(
            rng_r.standard_normal((mix, config.hidden_dim)) / np.sqrt(mix), requires_grad=True
        )
        self.b_hidden = Tensor(np.zeros((1, config.hidden_dim)), requires_grad=True)
        self.w_out = Tensor(
            rng_r.standard_normal((config.hidden_dim, config.out_dim))
            / np.sqrt(config.hidden_dim),
            requires_grad=True,
        )
        self.b_out = Tensor(np.zeros((1, config.out_dim)), requires_grad=True)
        self.tree_weights = [Tensor(w.copy(), requires_grad=True) for w in tree.weights]
        self.tree_biases = [Tensor(b.copy(), requires_grad=True) for b in tree.biases]
        self.time_learnable = config.time_learnable

    def trainable_parameters(self) -> list[Tensor]:
        """Parameters the optimizer may update; frozen time encoders are left out."""
        params = self.all_parameters()
        if not self.time_learnable:
            params = [p for p in params if p is not self.frequencies and p is not self.phases]
        return params

    def all_parameters(self) -> list[Tensor]:
        own = [
            self.frequencies,
            self.phases,
            self.w_query,
            self.w_key,
            self.w_value,
            self.w_hidden,
            self.b_hidden,
            self.w_out,
            self.b_out,
        ]
        return own + self.tree_weights + self.tree_biases

    def state_arrays(self) -> dict:
        return {
            "frequencies": self.frequencies.data,
            "phases": self.phases.data,
            "w_query": self.w_query.data,
            "w_key": self.w_key.data,
            "w_value": self.w_value.data,
            "w_hidden": self.w_hidden.data,
            "b_hidden": self.b_hidden.data,
            "w_out": self.w_out.data,
            "b_out": self.b_out.data,
            "tree_weights": [w.data for w in self.tree_weights],
            "tree_biases": [b.data for b in self.tree_biases],
        }

    def load_state_arrays(self, state: dict) -> None:
        for name in (
            "frequencies",
            "phases",
            "w_query",
            "w_key",
            "w_value",
            "w_hidden",
            "b_hidden",
            "w_out",
            "b_out",
        ):
            tensor = getattr(self, name)
            incoming = np.asarray(state[name], dtype=float)
            if incoming.shape != tensor.data.shape:
                raise ValueError(f"{name}: shape {incoming.shape} != {tensor.data.shape}")
            tensor.data = incoming
        for attr, key in (("tree_weights", "tree_weights"), ("tree_biases", "tree_biases")):
            tensors = getattr(self, attr)
            arrays = state[key]
            if len(arrays) != len(tensors):
                raise ValueError(f"{key}: node count mismatch")
            for t, a in zip(tensors, arrays):
                a = np.asarray(a, dtype=float)
                if a.shape != t.data.shape:
                    raise ValueError(f"{key}: shape mismatch")
                t.data = a


@dataclass(frozen=True)
class NeighborEvent:
    """One past transfer touching a node, seen from that node's side."""

    month: int
    other: int
    amount: float
    src: int
    dst: int
    incoming: bool


class SeriesContext:
    """A series plus everything the model repeatedly needs from it.

    Event lists per node (both directions), per-month edge-feature tables
    and per-month decompositions are all derived lazily and cached.  Every
    accessor takes the prediction month and reads strictly earlier data.
    """

    def __init__(self, series: SnapshotSeries, embeddings: np.ndarray):
        embeddings = np.asarray(embeddings, dtype=float)
        if embeddings.shape[0] != series.n_nodes:
            raise ValueError(
                f"embeddings cover {embeddings.shape[0]} nodes, series has {series.n_nodes}"
            )
        self.series = series
        self.embeddings = embeddings
        self.events_by_node: dict[int, list] = {}
        for ev in series.events:
            self.events_by_node.setdefault(ev.src, []).append(
                NeighborEvent(ev.month, ev.dst, ev.amount, ev.src, ev.dst, incoming=False)
            )
            self.events_by_node.setdefault(ev.dst, []).append(
                NeighborEvent(ev.month, ev.src, ev.amount, ev.src, ev.dst, incoming=True)
            )
        self._feature_tables: dict[int, dict] = {}
        self._decompositions: dict[int, object] = {}

    def feature_table(self, month: int) -> dict:
        if month not in self._feature_tables:
            from .graph import edge_feature_table

            self._feature_tables[month] = edge_feature_table(self.series.snapshots[month])
        return self._feature_tables[month]

    def decomposition(self, month: int):
        if month not in self._decompositions:
            self._decompositions[month] = decompose(self.series.snapshots[month])
        return self._decompositions[month]

    def recent_events(self, node: int, t: int, k: int) -> list[NeighborEvent]:
        """The k most recent events touching node before month t.

        Recency is at month granularity; within a month larger transfers come
        first, then lower counterparty ids, with outgoing before incoming on a
        full tie, so the selection is deterministic.
        """
        past = [ev for ev in self.events_by_node.get(node, []) if ev.month < t]
        past.sort(key=lambda ev: (-ev.month, -ev.amount, ev.other, ev.incoming))
        return past[:k]

    def is_warm(self, node: int, t: int) -> bool:
        return any(ev.month < t for ev in self.events_by_node.get(node, []))

    def active_senders(self, month: int) -> list[int]:
        return sorted(self.decomposition(month).ratios)


@dataclass
class RatioModel:
    config: RatioConfig
    tree: HSTree
    params: RatioParams = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.params is None:
            self.params = RatioParams(self.config, self.tree)


def time_features(params: RatioParams, deltas: np.ndarray) -> Tensor:
    """Cosine features of month offsets; rows follow the input order."""
    deltas = np.asarray(deltas, dtype=float).reshape(-1, 1)
    freq = params.frequencies.reshape(1, -1)
    phase = params.phases.reshape(1, -1)
    return (Tensor(deltas) * freq + phase).cos()


def encode_sender(model: RatioModel, ctx: SeriesContext, sender: int, t: int) -> Tensor:
    """Code vector for one sender-month, shape (1, out_dim).

    The sender must have at least one event before t; callers route cold
    senders elsewhere.
    """
    cfg, params = model.config, model.params
    events = ctx.recent_events(sender, t, cfg.n_neighbors)
    if not events:
        raise ValueError(f"sender {sender} has no events before month {t}")
    x_rows = np.concatenate(
        [ctx.embeddings[sender : sender + 1]]
        + [ctx.embeddings[ev.other : ev.other + 1] for ev in events]
    )
    feat_rows = np.zeros((len(events) + 1, 5))
    deltas = np.zeros(len(events) + 1)
    for r, ev in enumerate(events, start=1):
        feat_rows[r] = ctx.feature_table(ev.month)[(ev.src, ev.dst)]
        deltas[r] = float(t - ev.month)

    H = concat(
        [Tensor(x_rows).relu(), Tensor(feat_rows), time_features(params, deltas)], axis=1
    )
    query = H[0:1] @ params.w_query
    keys = H[1:] @ params.w_key
    values = H[1:] @ params.w_value
    scores = (query @ keys.T) / np.sqrt(float(cfg.attn_dim))
    pooled = softmax(scores, axis=1) @ values
    hidden = (
        concat([pooled, Tensor(ctx.embeddings[sender : sender + 1])], axis=1)
        @ params.w_hidden
        + params.b_hidden
    ).relu()
    return hidden @ params.w_out + params.b_out


def batch_log_ratios(model: RatioModel, ctx: SeriesContext, samples: list) -> Tensor:
    """Log ratio rows for (sender, month) samples, shape (len(samples), n_labels)."""
    codes = concat([encode_sender(model, ctx, i, t) for (i, t) in samples], axis=0)
    return tree_leaf_logprobs(model.tree, model.params.tree_weights, model.params.tree_biases, codes)


def bce_row_loss(log_ratios: Tensor, true_rows: np.ndarray) -> Tensor:
    """Mean over samples of the full-row binary cross-entropy.

    Each destination contributes R log R-hat + (1 - R) log(1 - R-hat); the
    complement probability is clamped below at PROB_EPS before the log.
    """
    y = Tensor(np.asarray(true_rows, dtype=float))
    p = log_ratios.exp()
    complement = (1.0 - p).clip(PROB_EPS, 1.0)
    per_sample = (y * log_ratios + (1.0 - y) * complement.log()).sum(axis=1)
    return -per_sample.mean()


def training_samples(ctx: SeriesContext, months) -> list:
    """(sender, month) pairs with an observed ratio row and a nonempty history."""
    out = []
    for t in months:
        for i in ctx.active_senders(t):
            if ctx.is_warm(i, t):
                out.append((i, t))
    return out


def true_ratio_matrix(ctx: SeriesContext, samples: list) -> np.ndarray:
    n = ctx.series.n_nodes
    rows = np.zeros((len(samples), n))
    for r, (i, t) in enumerate(samples):
        for j, v in ctx.decomposition(t).ratios[i].items():
            rows[r, j] = v
    return rows


@dataclass
class TrainResult:
    epoch_losses: list[float]
    n_samples: int


def train_ratio_model(
    model: RatioModel, ctx: SeriesContext, months, progress=None
) -> TrainResult:
    """SGD over every active sender-month in `months`.

    Batches are reshuffled each epoch from a dedicated substream of the
    config seed.  Raises TrainingDivergedError as soon as a batch loss is
    not finite.
    """
    cfg = model.config
    samples = training_samples(ctx, months)
    if not samples:
        raise ValueError("no trainable sender-months in the given window")
    targets = true_ratio_matrix(ctx, samples)
    parameters = model.params.trainable_parameters()
    shuffle_rng = named_rng(cfg.seed, "train.shuffle")
    losses = []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(samples))
        total = 0.0
        for lo in range(0, len(samples), cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            batch = [samples[k] for k in idx]
            loss = bce_row_loss(batch_log_ratios(model, ctx, batch), targets[idx])
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDivergedError(
                    f"non-finite loss in epoch {epoch} (batch at offset {lo})"
                )
            for p in parameters:
                p.zero_grad()
            loss.backward()
            for p in parameters:
                if p.grad is not None:
                    p.data = p.data - cfg.learning_rate * p.grad
            total += value * len(batch)
        losses.append(total / len(samples))
        if progress is not None:
            progress(epoch, losses[-1])
    return TrainResult(epoch_losses=losses, n_samples=len(samples))


def predict_ratios(
    model: RatioModel, ctx: SeriesContext, t: int, senders=None
) -> tuple[dict[int, np.ndarray], list[int]]:
    """Predicted ratio rows at month t for warm senders; cold ones are listed.

    senders defaults to every node; each returned row is a dense probability
    vector over all nodes.
    """
    if senders is None:
        senders = range(ctx.series.n_nodes)
    warm = [i for i in senders if ctx.is_warm(i, t)]
    cold = [i for i in senders if not ctx.is_warm(i, t)]
    rows: dict[int, np.ndarray] = {}
    if warm:
        samples = [(i, t) for i in warm]
        logp = batch_log_ratios(model, ctx, samples).data
        for r, i in enumerate(warm):
            rows[i] = np.exp(logp[r])
    return rows, cold


def mix_with_history(
    model_rows: dict[int, np.ndarray],
    history_rows: dict[int, dict],
    n_nodes: int,
    mix_lambda: float = 0.8,
) -> dict[int, np.ndarray]:
    """Convex combination of history and model rows, weight mix_lambda on history.

    Senders present on only one side keep that side's row unchanged.
    """
    if not 0.0 <= mix_lambda <= 1.0:
        raise ValueError("mix_lambda must lie in [0, 1]")
    out: dict[int, np.ndarray] = {}
    for i, row in model_rows.items():
        if i in history_rows:
            hist = np.zeros(n_nodes)
            for j, v in history_rows[i].items():
                hist[j] = v
            out[i] = mix_lambda * hist + (1.0 - mix_lambda) * row
        else:
            out[i] = np.array(row, dtype=float)
    for i, sparse in history_rows.items():
        if i not in out:
            hist = np.zeros(n_nodes)
            for j, v in sparse.items():
                hist[j] = v
            out[i] = hist
    return out
