"""Train the attention ratio model on a small synthetic network.

The model embeds each sender's recent transfer events with time-aware
attention, then scores destinations through a hierarchical softmax tree
built over structural node embeddings.  This demo trains a small
configuration for a few hundred steps and compares its predicted
distribution rows against memorized history on a held-out month.
"""
import numpy as np

from flowcast.baselines import EdgeBankState, predict_ratio_rows
from flowcast.embeddings import structural_embed, warmup_weights
from flowcast.graph import decompose
from flowcast.hstree import build_hs_tree, label_representations
from flowcast.metrics import metric_bce
from flowcast.ratio_model import (
    RatioConfig,
    RatioModel,
    SeriesContext,
    mix_with_history,
    predict_ratios,
    train_ratio_model,
)
from flowcast.synth import SynthConfig, generate_series


def main() -> None:
    series, _ = generate_series(SynthConfig(n_nodes=20, n_months=14, seed=2))
    T, n = series.n_snapshots, series.n_nodes
    t_eval = T - 1
    train_months = list(range(4, t_eval))

    W = warmup_weights(series, k=3)
    X, isolated = structural_embed(W, dim=16)
    print(f"structural embeddings: {X.shape}, isolated nodes: {len(isolated)}")

    reps = label_representations(series, X, t_end=t_eval)
    tree = build_hs_tree(reps, out_dim=32, depth=2, seed=0)
    print(f"softmax tree: {len(tree.nodes)} internal nodes, depth {tree.depth}, "
          f"{tree.n_labels} labels")

    config = RatioConfig(
        embed_dim=16, attn_dim=32, hidden_dim=32, out_dim=32,
        n_neighbors=20, learning_rate=0.05, epochs=60, batch_size=64, seed=0,
    )
    model = RatioModel(config=config, tree=tree)
    ctx = SeriesContext(series, X)
    result = train_ratio_model(model, ctx, months=train_months)
    losses = result.epoch_losses
    print(f"\ntrained on months {train_months[0]}..{train_months[-1]}, "
          f"{result.n_samples} rows per epoch")
    print(f"loss: {losses[0]:.4f} -> {losses[len(losses) // 2]:.4f} "
          f"-> {losses[-1]:.4f}")

    state = EdgeBankState.from_series(series, t_eval)
    senders = state.warm_senders()
    rows, cold = predict_ratios(model, ctx, t_eval, senders=senders)
    history, _ = predict_ratio_rows(state)
    mixed = mix_with_history(rows, history, n, mix_lambda=0.8)

    truth = decompose(series.snapshots[t_eval]).ratios
    keep = [i for i in truth if i in mixed]
    for name, pred in (("model", rows), ("history", history), ("mixed", mixed)):
        bce = metric_bce({i: pred[i] for i in keep if i in pred},
                         {i: truth[i] for i in keep if i in pred}, n)
        print(f"  {name:<8} bce={bce.value:.4f} on {bce.n_used} rows")

    i = keep[0]
    dense = np.zeros(n)
    for j, v in truth[i].items():
        dense[j] = v
    top = np.argsort(mixed[i])[::-1][:4]
    print(f"\nsender {i}, month {t_eval}: top predicted destinations")
    for j in top:
        print(f"  -> {j}: predicted {mixed[i][j]:.3f}, actual {dense[j]:.3f}")


if __name__ == "__main__":
    main()
