"""Batch front end wiring the library into reproducible experiment runs.

Commands: ingest, stats, baseline, train, predict, evaluate, synth.  Each
command reads a flat dotted-key config (file values overridden by --set
pairs and dedicated flags), writes its artifacts plus a JSON run manifest
into --out, and exits nonzero with one structured error line on failure.
Identical config and seed give byte-identical artifacts; wall time is
recorded only in the manifest.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import dataio
from .baselines import EdgeBankState, predict_ratio_rows
from .baselines import predict_volumes as baseline_volumes
from .dataio import CheckpointError
from .embeddings import load_embeddings, save_embeddings, structural_embed, warmup_weights
from .graph import (
    EmptyDatasetError,
    IngestConfig,
    NodeUniverse,
    ParseError,
    SnapshotNetwork,
    SnapshotSeries,
    TransferEvent,
    build_snapshots,
    decompose,
    ingest_edges,
)
from .hstree import build_hs_tree, label_representations
from .metrics import (
    eval_dissolution,
    eval_formation,
    metric_auc,
    metric_bce,
    metric_mae,
    metric_mape,
)
from .netstats import aggregate_distributions, ccdf, fit_power_law, summarize
from .ratio_model import (
    RatioConfig,
    RatioModel,
    SeriesContext,
    TrainingDivergedError,
    mix_with_history,
    predict_ratios,
    train_ratio_model,
)
from .runconfig import parse_config_file
from .synth import SynthConfig, generate_edges
from .volume import predict_volumes, train_volume_model


class CliError(Exception):
    """User-facing failure with a single-line explanation."""


# ---------------------------------------------------------------------------
# Config schema


def _cast_bool(text: str):
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise CliError(f"expected a boolean, got {text!r}")


def _cast_floats(text: str):
    values = [float(x) for x in text.split(",") if x.strip()]
    if not values:
        raise CliError(f"expected a comma-separated float list, got {text!r}")
    return values


def _cast_opt(cast):
    def inner(text: str):
        if text.strip().lower() in ("", "none"):
            return None
        return cast(text)

    return inner


SCHEMA = {
    "ingest.min_activity": (int, 1),
    "ingest.date_start": (_cast_opt(str), None),
    "ingest.date_end": (_cast_opt(str), None),
    "stats.pair_basis": (str, "directed"),
    "stats.power_law": (_cast_bool, False),
    "stats.min_tail": (int, 10),
    "baseline.ratio_mode": (str, "mean-ratios"),
    "split.test_fraction": (float, 0.2),
    "embed.dim": (int, 32),
    "embed.tau": (_cast_floats, [0.25, 0.5, 1.0]),
    "embed.order": (int, 20),
    "embed.warmup_months": (int, 3),
    "time.dim": (int, 16),
    "time.learnable": (_cast_bool, True),
    "ratio.attn_dim": (int, 64),
    "ratio.hidden_dim": (int, 64),
    "ratio.out_dim": (int, 64),
    "ratio.neighbors": (int, 100),
    "ratio.tree_depth": (int, 3),
    "ratio.tree_branching": (_cast_opt(int), None),
    "ratio.lr": (float, 1e-3),
    "ratio.epochs": (int, 50),
    "ratio.batch": (int, 256),
    "ratio.mix_lambda": (float, 0.8),
    "ratio.mix_mode": (str, "mean"),
    "volume.rounds": (int, 300),
    "volume.lr": (float, 0.1),
    "volume.depth": (int, 4),
    "eval.support": (str, "union"),
    "eval.formation_threshold": (float, 1e-4),
    "eval.dissolution_threshold": (float, 1e-3),
    "synth.n_nodes": (int, 30),
    "synth.n_months": (int, 18),
    "synth.core_per_sender": (int, 3),
    "synth.hub_share": (float, 0.5),
    "synth.churn_share": (float, 0.1),
    "synth.signal_high": (float, 120.0),
    "synth.signal_low": (float, 2.0),
    "synth.flip_prob": (float, 0.5),
    "synth.n_guests": (int, 3),
    "synth.guest_share": (float, 0.2),
    "synth.fee_share": (float, 0.04),
    "synth.participation_prob": (float, 0.35),
    "synth.presence_amount": (float, 1.0),
    "synth.teaser_base": (float, 200.0),
    "synth.teaser_ratio": (float, 2.0),
    "synth.persistence_target": (_cast_opt(float), None),
    "synth.churn_months": (_cast_opt(int), None),
    "synth.volume_mu": (float, 3.0),
    "synth.volume_sigma": (float, 0.4),
    "synth.month_noise": (float, 0.05),
    "synth.popularity_exponent": (float, 1.5),
    "synth.start_year": (int, 2020),
    "synth.start_month": (int, 1),
}


def resolve_config(args) -> dict:
    """Defaults, then config file, then --set pairs; later sources win."""
    config = {key: default for key, (_, default) in SCHEMA.items()}

    def apply(key: str, raw: str, origin: str):
        if key not in SCHEMA:
            raise CliError(f"unknown config key {key!r} ({origin})")
        cast = SCHEMA[key][0]
        try:
            config[key] = cast(raw)
        except (ValueError, TypeError):
            raise CliError(f"bad value for {key}: {raw!r} ({origin})")

    if args.config:
        try:
            pairs = parse_config_file(args.config)
        except OSError as e:
            raise CliError(f"cannot read config file: {e}")
        except ValueError as e:
            raise CliError(f"config file: {e}")
        for key, raw in pairs.items():
            apply(key, raw, f"config file {args.config}")
    for item in args.set or []:
        if "=" not in item:
            raise CliError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        apply(key.strip(), raw.strip(), "--set")
    return config


def _config_echo(config: dict) -> dict:
    return {key: config[key] for key in sorted(config)}


# ---------------------------------------------------------------------------
# Shared helpers


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    return value


def _metric_json(result) -> dict:
    return {
        "value": result.value,
        "n_used": result.n_used,
        "n_excluded": result.n_excluded,
    }


def _open_input(path):
    try:
        return open(path, encoding="utf-8", newline="")
    except OSError as e:
        raise CliError(f"cannot read {path}: {e}")


def load_series(snapshots_path, universe_path=None) -> SnapshotSeries:
    """Rebuild a SnapshotSeries from a snapshot CSV (plus optional universe)."""
    try:
        records = dataio.read_flow_csv(snapshots_path)
    except OSError as e:
        raise CliError(f"cannot read {snapshots_path}: {e}")
    except ValueError as e:
        raise CliError(f"{snapshots_path}: {e}")
    if not records:
        raise CliError(f"{snapshots_path} holds no records")
    if universe_path:
        try:
            universe = dataio.read_universe_csv(universe_path)
        except OSError as e:
            raise CliError(f"cannot read {universe_path}: {e}")
        except ValueError as e:
            raise CliError(f"{universe_path}: {e}")
    else:
        universe = NodeUniverse.trivial(1 + max(max(i, j) for _, i, j, _ in records))
    n_months = 1 + max(t for t, _, _, _ in records)
    if min(t for t, _, _, _ in records) < 0:
        raise CliError("snapshot indices must be non-negative")
    adjacencies: list[dict] = [{} for _ in range(n_months)]
    for t, i, j, a in records:
        adjacencies[t][(i, j)] = adjacencies[t].get((i, j), 0.0) + a
    snapshots = [SnapshotNetwork(t, len(universe), adj) for t, adj in enumerate(adjacencies)]
    events = [
        TransferEvent(t, i, j, a)
        for t, adj in enumerate(adjacencies)
        for (i, j), a in sorted(adj.items())
    ]
    return SnapshotSeries(snapshots, universe, (2020, 1), events)


def test_months(n_snapshots: int, fraction: float) -> list[int]:
    """Chronological holdout: the final max(2, floor(fraction*T)) snapshots."""
    if not 0.0 < fraction < 1.0:
        raise CliError("split.test_fraction must lie in (0, 1)")
    n_test = max(2, int(fraction * n_snapshots))
    if n_test >= n_snapshots:
        raise CliError(f"cannot hold out {n_test} of {n_snapshots} snapshots")
    return list(range(n_snapshots - n_test, n_snapshots))


def _parse_months(text: str, n_snapshots: int) -> list[int]:
    try:
        months = sorted({int(x) for x in text.split(",") if x.strip()})
    except ValueError:
        raise CliError(f"--months expects comma-separated integers, got {text!r}")
    if not months:
        raise CliError("--months lists no months")
    for t in months:
        if not 0 <= t < n_snapshots:
            raise CliError(f"month {t} outside [0, {n_snapshots})")
    return months


def _history_rows(state: EdgeBankState, mode: str, ratio_mode: str):
    if mode == "mean":
        return predict_ratio_rows(state, mode=ratio_mode)[0]
    if mode == "window":
        return predict_ratio_rows(state, window=True)[0]
    if mode == "none":
        return {}
    raise CliError(f"unknown mix mode {mode!r} (want mean, window, or none)")


# ---------------------------------------------------------------------------
# Commands


def cmd_synth(args, config: dict) -> list:
    if config["synth.n_nodes"] < 10:
        raise CliError("synth.n_nodes must be at least 10")
    if config["synth.n_months"] < 6:
        raise CliError("synth.n_months must be at least 6")
    sc = SynthConfig(
        n_nodes=config["synth.n_nodes"],
        n_months=config["synth.n_months"],
        seed=args.seed,
        core_per_sender=config["synth.core_per_sender"],
        hub_share=config["synth.hub_share"],
        churn_share=config["synth.churn_share"],
        signal_amount_high=config["synth.signal_high"],
        signal_amount_low=config["synth.signal_low"],
        regime_flip_prob=config["synth.flip_prob"],
        n_guests=config["synth.n_guests"],
        guest_share=config["synth.guest_share"],
        fee_share=config["synth.fee_share"],
        participation_prob=config["synth.participation_prob"],
        presence_amount=config["synth.presence_amount"],
        teaser_base=config["synth.teaser_base"],
        teaser_ratio=config["synth.teaser_ratio"],
        persistence_target=config["synth.persistence_target"],
        churn_months=config["synth.churn_months"],
        volume_mu=config["synth.volume_mu"],
        volume_sigma=config["synth.volume_sigma"],
        month_noise=config["synth.month_noise"],
        popularity_exponent=config["synth.popularity_exponent"],
        start_year=config["synth.start_year"],
        start_month=config["synth.start_month"],
    )
    edges, truth = generate_edges(sc)
    universe = NodeUniverse(truth["labels"])
    series = build_snapshots(edges, universe)
    out = args.out
    dataio.write_edge_csv(os.path.join(out, "edges.csv"), edges, universe)
    dataio.write_universe_csv(os.path.join(out, "universe.csv"), universe)
    dataio.write_flow_csv(os.path.join(out, "snapshots.csv"), dataio.series_records(series))
    dataio.write_json(
        os.path.join(out, "truth.json"),
        {"config": _config_echo(config), "seed": args.seed, "truth": _jsonable(truth)},
    )
    return ["edges.csv", "universe.csv", "snapshots.csv", "truth.json"]


def cmd_ingest(args, config: dict) -> list:
    ic = IngestConfig(
        min_activity=config["ingest.min_activity"],
        date_start=config["ingest.date_start"],
        date_end=config["ingest.date_end"],
    )
    with _open_input(args.edges) as fh:
        result = ingest_edges(fh, ic)
    series = build_snapshots(result.edges, result.universe)
    out = args.out
    dataio.write_flow_csv(os.path.join(out, "snapshots.csv"), dataio.series_records(series))
    dataio.write_universe_csv(os.path.join(out, "universe.csv"), result.universe)
    dataio.write_json(
        os.path.join(out, "ingest_report.json"),
        {
            "config": _config_echo(config),
            "seed": args.seed,
            "report": result.report.as_dict(),
            "n_snapshots": series.n_snapshots,
            "n_nodes": series.n_nodes,
            "n_edge_entries": sum(s.n_edges for s in series.snapshots),
            "start_month": list(series.start_month),
        },
    )
    return ["snapshots.csv", "universe.csv", "ingest_report.json"]


def cmd_stats(args, config: dict) -> list:
    series = load_series(args.snapshots, args.universe)
    summary = summarize(series, pair_basis=config["stats.pair_basis"])
    distributions = aggregate_distributions(series)
    out = args.out
    artifacts = []
    for name in ("in_degree", "out_degree", "in_weight", "out_weight"):
        xs, ys = ccdf(distributions[name])
        fname = f"ccdf_{name}.csv"
        dataio.write_xy_csv(os.path.join(out, fname), xs, ys, header=(name, "ccdf"))
        artifacts.append(fname)
    payload = {
        "config": _config_echo(config),
        "seed": args.seed,
        "summary": summary.as_dict(),
    }
    if args.power_law or config["stats.power_law"]:
        fits = {}
        for name in ("in_degree", "out_degree", "in_weight", "out_weight"):
            try:
                fit = fit_power_law(distributions[name], min_tail=config["stats.min_tail"])
                fits[name] = {
                    "alpha": fit.alpha,
                    "x_min": fit.x_min,
                    "ks_distance": fit.ks_distance,
                    "n_tail": fit.n_tail,
                }
            except ValueError as e:
                fits[name] = {"error": str(e)}
        payload["power_law"] = fits
    dataio.write_json(os.path.join(out, "stats.json"), payload)
    return artifacts + ["stats.json"]


def cmd_baseline(args, config: dict) -> list:
    series = load_series(args.snapshots, args.universe)
    months = test_months(series.n_snapshots, config["split.test_fraction"])
    window = args.method == "edgebank-tw"
    skipped = {}
    out = args.out
    if args.target == "ratio":
        rows_by_month = {}
        for t in months:
            state = EdgeBankState.from_series(series, t)
            rows, skip = predict_ratio_rows(
                state, mode=config["baseline.ratio_mode"], window=window
            )
            rows_by_month[t] = rows
            skipped[t] = len(skip)
        artifact = "baseline_ratio.csv"
        dataio.write_flow_csv(
            os.path.join(out, artifact), dataio.prediction_records(rows_by_month)
        )
    else:
        volumes_by_month = {}
        for t in months:
            state = EdgeBankState.from_series(series, t)
            volumes, skip = baseline_volumes(state, window=window)
            volumes_by_month[t] = volumes
            skipped[t] = len(skip)
        artifact = "baseline_volume.csv"
        dataio.write_volume_csv(os.path.join(out, artifact), volumes_by_month)
    dataio.write_json(
        os.path.join(out, "baseline_report.json"),
        {
            "config": _config_echo(config),
            "seed": args.seed,
            "method": args.method,
            "target": args.target,
            "months": months,
            "skipped_senders": {str(t): skipped[t] for t in months},
        },
    )
    return [artifact, "baseline_report.json"]


def _ratio_config(config: dict, seed: int) -> RatioConfig:
    return RatioConfig(
        embed_dim=config["embed.dim"],
        attn_dim=config["ratio.attn_dim"],
        time_dim=config["time.dim"],
        hidden_dim=config["ratio.hidden_dim"],
        out_dim=config["ratio.out_dim"],
        n_neighbors=config["ratio.neighbors"],
        tree_depth=config["ratio.tree_depth"],
        tree_branching=config["ratio.tree_branching"],
        learning_rate=config["ratio.lr"],
        epochs=config["ratio.epochs"],
        batch_size=config["ratio.batch"],
        mix_lambda=config["ratio.mix_lambda"],
        warmup_months=config["embed.warmup_months"],
        time_learnable=config["time.learnable"],
        seed=seed,
    )


def cmd_train(args, config: dict) -> list:
    series = load_series(args.snapshots, args.universe)
    holdout = test_months(series.n_snapshots, config["split.test_fraction"])
    train_end = holdout[0]
    out = args.out
    artifacts = []
    report = {
        "config": _config_echo(config),
        "seed": args.seed,
        "test_months": holdout,
    }
    if args.model in ("ratio", "both"):
        warmup = config["embed.warmup_months"]
        months = range(warmup + 1, train_end)
        if not len(months):
            raise CliError(
                f"no ratio training months between warmup {warmup} and holdout {train_end}"
            )
        W = warmup_weights(series, warmup)
        X, isolated = structural_embed(
            W, dim=config["embed.dim"], taus=config["embed.tau"], order=config["embed.order"]
        )
        save_embeddings(os.path.join(out, "embeddings.csv"), X)
        reps = label_representations(series, X, t_end=train_end)
        rc = _ratio_config(config, args.seed)
        tree = build_hs_tree(
            reps,
            out_dim=rc.out_dim,
            depth=rc.tree_depth,
            branching=rc.tree_branching,
            seed=args.seed,
        )
        model = RatioModel(rc, tree)
        ctx = SeriesContext(series, X)
        result = train_ratio_model(model, ctx, months)
        dataio.save_ratio_checkpoint(os.path.join(out, "ratio-model.json"), model)
        artifacts += ["embeddings.csv", "ratio-model.json"]
        report["ratio"] = {
            "train_months": [months.start, months.stop],
            "n_samples": result.n_samples,
            "epoch_losses": result.epoch_losses,
            "isolated_warmup_nodes": len(isolated),
        }
    if args.model in ("volume", "both"):
        months = range(3, train_end)
        if not len(months):
            raise CliError(f"no volume training months before holdout {train_end}")
        vm = train_volume_model(
            series,
            months,
            n_rounds=config["volume.rounds"],
            learning_rate=config["volume.lr"],
            max_depth=config["volume.depth"],
        )
        dataio.save_volume_checkpoint(
            os.path.join(out, "volume-model.json"),
            vm,
            config={k: config[k] for k in ("volume.rounds", "volume.lr", "volume.depth")},
        )
        artifacts.append("volume-model.json")
        report["volume"] = {
            "train_months": [months.start, months.stop],
            "n_rounds": len(vm.gbdt.trees),
            "final_train_mse": vm.gbdt.train_mse[-1] if vm.gbdt.train_mse else None,
        }
    dataio.write_json(os.path.join(out, "train_report.json"), report)
    artifacts.append("train_report.json")
    return artifacts


def cmd_predict(args, config: dict) -> list:
    series = load_series(args.snapshots, args.universe)
    months = (
        _parse_months(args.months, series.n_snapshots)
        if args.months
        else test_months(series.n_snapshots, config["split.test_fraction"])
    )
    out = args.out
    artifacts = []
    report = {
        "config": _config_echo(config),
        "seed": args.seed,
        "months": months,
        "mix_mode": config["ratio.mix_mode"],
        "cold_senders": {},
    }
    try:
        model = dataio.load_ratio_checkpoint(args.model)
    except OSError as e:
        raise CliError(f"cannot read {args.model}: {e}")
    embeddings_path = args.embeddings or os.path.join(
        os.path.dirname(os.path.abspath(args.model)), "embeddings.csv"
    )
    try:
        X = load_embeddings(embeddings_path, expected_nodes=series.n_nodes)
    except OSError as e:
        raise CliError(f"cannot read {embeddings_path}: {e}")
    if X.shape[1] != model.config.embed_dim:
        raise CliError(
            f"embeddings have width {X.shape[1]}, model expects {model.config.embed_dim}"
        )
    ctx = SeriesContext(series, X)
    volume_model = None
    if args.volume_model:
        try:
            volume_model = dataio.load_volume_checkpoint(args.volume_model)
        except OSError as e:
            raise CliError(f"cannot read {args.volume_model}: {e}")

    ratio_rows = {}
    volume_rows = {}
    amount_rows = {}
    for t in months:
        state = EdgeBankState.from_series(series, t)
        senders = state.warm_senders()
        rows, cold = predict_ratios(model, ctx, t, senders=senders)
        history = _history_rows(state, config["ratio.mix_mode"], config["baseline.ratio_mode"])
        mixed = mix_with_history(rows, history, series.n_nodes, model.config.mix_lambda)
        ratio_rows[t] = mixed
        report["cold_senders"][str(t)] = len(cold)
        if volume_model is not None:
            volumes = predict_volumes(volume_model, series, t, senders=senders)
            volume_rows[t] = volumes
            amount_rows[t] = {
                i: volumes[i] * row for i, row in mixed.items() if i in volumes
            }
    dataio.write_flow_csv(
        os.path.join(out, "predictions_ratio.csv"), dataio.prediction_records(ratio_rows)
    )
    artifacts.append("predictions_ratio.csv")
    if volume_model is not None:
        dataio.write_volume_csv(os.path.join(out, "predictions_volume.csv"), volume_rows)
        dataio.write_flow_csv(
            os.path.join(out, "predictions_amount.csv"), dataio.prediction_records(amount_rows)
        )
        artifacts += ["predictions_volume.csv", "predictions_amount.csv"]
    dataio.write_json(os.path.join(out, "predict_report.json"), report)
    artifacts.append("predict_report.json")
    return artifacts


def _true_ratio_rows(series: SnapshotSeries, t: int) -> dict:
    return decompose(series.snapshots[t]).ratios


def cmd_evaluate(args, config: dict) -> list:
    if not (args.predictions or args.volumes or args.amounts):
        raise CliError("nothing to evaluate: pass --predictions, --volumes, or --amounts")
    series = load_series(args.snapshots, args.universe)
    out = args.out
    artifacts = []
    payload = {"config": _config_echo(config), "seed": args.seed}

    if args.predictions:
        try:
            pred_by_month = dataio.rows_from_records(dataio.read_flow_csv(args.predictions))
        except OSError as e:
            raise CliError(f"cannot read {args.predictions}: {e}")
        except ValueError as e:
            raise CliError(f"{args.predictions}: {e}")
        months = sorted(pred_by_month)
        for t in months:
            if not 0 <= t < series.n_snapshots:
                raise CliError(f"predictions refer to month {t} outside the series")
        n = series.n_nodes

        n_rows = 0
        n_off = 0
        max_err = 0.0
        for t in months:
            for i, row in pred_by_month[t].items():
                total = sum(row.values())
                err = abs(total - 1.0)
                n_rows += 1
                max_err = max(max_err, err)
                if err > 1e-9:
                    n_off += 1
        payload["row_sums"] = {"n_rows": n_rows, "n_off": n_off, "max_abs_err": max_err}

        pooled_pred = {}
        pooled_true = {}
        pooled_eb = {}
        pooled_ebtw = {}
        pooled_uniform = {}
        uniform_row = np.full(n, 1.0 / n)
        form_labels, form_scores = [], []
        diss_labels, diss_scores = [], []
        for t in months:
            true_rows = _true_ratio_rows(series, t)
            state = EdgeBankState.from_series(series, t)
            eb = predict_ratio_rows(state, mode=config["baseline.ratio_mode"])[0]
            ebtw = predict_ratio_rows(state, window=True)[0]
            for i, row in true_rows.items():
                pooled_true[(t, i)] = row
                pooled_uniform[(t, i)] = uniform_row
                if i in eb:
                    pooled_eb[(t, i)] = eb[i]
                if i in ebtw:
                    pooled_ebtw[(t, i)] = ebtw[i]
            for i, row in pred_by_month[t].items():
                pooled_pred[(t, i)] = row
            _, labels, scores = eval_formation(
                pred_by_month[t], series, t, epsilon=config["eval.formation_threshold"]
            )
            form_labels.append(labels)
            form_scores.append(scores)
            _, labels, scores = eval_dissolution(
                pred_by_month[t], series, t, epsilon=config["eval.dissolution_threshold"]
            )
            diss_labels.append(labels)
            diss_scores.append(scores)

        support = config["eval.support"]
        payload["months"] = months
        payload["bce"] = _metric_json(metric_bce(pooled_pred, pooled_true, n, support=support))
        payload["bce_edgebank"] = _metric_json(
            metric_bce(pooled_eb, pooled_true, n, support=support)
        )
        payload["bce_edgebank_tw"] = _metric_json(
            metric_bce(pooled_ebtw, pooled_true, n, support=support)
        )
        payload["bce_uniform"] = _metric_json(
            metric_bce(pooled_uniform, pooled_true, n, support=support)
        )
        form_labels = np.concatenate(form_labels)
        form_scores = np.concatenate(form_scores)
        diss_labels = np.concatenate(diss_labels)
        diss_scores = np.concatenate(diss_scores)
        # a static network yields no rankable events; record why instead of dying
        for key, labels, scores in (
            ("formation_auc", form_labels, form_scores),
            ("dissolution_auc", diss_labels, diss_scores),
        ):
            if labels.size == 0:
                payload[key] = {"error": "no candidates"}
                continue
            try:
                payload[key] = _metric_json(metric_auc(labels, scores))
            except ValueError as e:
                payload[key] = {"error": str(e)}
        if args.dump_roc:
            dataio.write_xy_csv(
                os.path.join(out, "formation_scores.csv"),
                form_labels.astype(float),
                form_scores,
                header=("label", "score"),
            )
            dataio.write_xy_csv(
                os.path.join(out, "dissolution_scores.csv"),
                diss_labels.astype(float),
                diss_scores,
                header=("label", "score"),
            )
            artifacts += ["formation_scores.csv", "dissolution_scores.csv"]

    if args.volumes:
        try:
            pred_volumes = dataio.read_volume_csv(args.volumes)
        except OSError as e:
            raise CliError(f"cannot read {args.volumes}: {e}")
        except ValueError as e:
            raise CliError(f"{args.volumes}: {e}")
        pred = {}
        true = {}
        for t in sorted(pred_volumes):
            if not 0 <= t < series.n_snapshots:
                raise CliError(f"volume predictions refer to month {t} outside the series")
            w = series.snapshots[t].out_flows()
            state = EdgeBankState.from_series(series, t)
            for i in state.warm_senders():
                true[(t, i)] = float(w[i])
            for i, v in pred_volumes[t].items():
                pred[(t, i)] = v
        payload["volume_months"] = sorted(pred_volumes)
        payload["mae_volume"] = _metric_json(metric_mae(pred, true))
        payload["mape_volume"] = _metric_json(metric_mape(pred, true))

    if args.amounts:
        try:
            pred_records = dataio.read_flow_csv(args.amounts)
        except OSError as e:
            raise CliError(f"cannot read {args.amounts}: {e}")
        except ValueError as e:
            raise CliError(f"{args.amounts}: {e}")
        pred = {}
        true = {}
        months_seen = set()
        for t, i, j, v in pred_records:
            if not 0 <= t < series.n_snapshots:
                raise CliError(f"amount predictions refer to month {t} outside the series")
            pred[(t, i, j)] = v
            months_seen.add(t)
        for t in sorted(months_seen):
            for (i, j), a in series.snapshots[t].adjacency.items():
                true[(t, i, j)] = a
        for key in pred:
            true.setdefault(key, 0.0)
        for key in true:
            pred.setdefault(key, 0.0)
        payload["amount_months"] = sorted(months_seen)
        payload["mae_amount"] = _metric_json(metric_mae(pred, true))

    dataio.write_json(os.path.join(out, "metrics.json"), payload)
    return artifacts + ["metrics.json"]


# ---------------------------------------------------------------------------
# Entry point


def _structured_error(command: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": {"command": command, "message": message}}) + "\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value config file with dotted keys")
    common.add_argument("--seed", type=int, default=0, help="run seed (default 0)")
    common.add_argument("--out", default=".", help="output directory (default .)")
    common.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override one config key; repeatable, wins over --config",
    )

    parser = argparse.ArgumentParser(
        prog="flowcast",
        description="Predict transfer-network edge ratios and volumes month by month.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a planted synthetic network")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", parents=[common], help="parse an edge CSV into snapshots")
    p.add_argument("edges", help="edge CSV (src,dst,timestamp,amount)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", parents=[common], help="summary statistics and distributions")
    p.add_argument("snapshots", help="snapshot CSV (t,src,dst,amount)")
    p.add_argument("--universe", help="node universe CSV (id,label)")
    p.add_argument("--power-law", action="store_true", help="also fit tail exponents")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("baseline", parents=[common], help="history-memorization predictions")
    p.add_argument("snapshots")
    p.add_argument("--universe")
    p.add_argument("--method", choices=["edgebank", "edgebank-tw"], required=True)
    p.add_argument("--target", choices=["ratio", "volume"], required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("train", parents=[common], help="train ratio and volume models")
    p.add_argument("snapshots")
    p.add_argument("--universe")
    p.add_argument("--model", choices=["ratio", "volume", "both"], default="both")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="predict ratios (and volumes)")
    p.add_argument("snapshots")
    p.add_argument("--universe")
    p.add_argument("--model", required=True, help="ratio model checkpoint from train")
    p.add_argument("--embeddings", help="embedding CSV (default: next to the checkpoint)")
    p.add_argument("--volume-model", help="volume model checkpoint from train")
    p.add_argument("--months", help="comma-separated months (default: the holdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[common], help="score predictions against truth")
    p.add_argument("snapshots")
    p.add_argument("--universe")
    p.add_argument("--predictions", help="ratio predictions CSV")
    p.add_argument("--volumes", help="volume predictions CSV")
    p.add_argument("--amounts", help="amount predictions CSV")
    p.add_argument("--dump-roc", action="store_true", help="dump label/score tables")
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        config = resolve_config(args)
        os.makedirs(args.out, exist_ok=True)
        artifacts = args.func(args, config)
    except CliError as e:
        _structured_error(args.command, str(e))
        return 1
    except (
        ParseError,
        EmptyDatasetError,
        CheckpointError,
        TrainingDivergedError,
        ValueError,
    ) as e:
        _structured_error(args.command, str(e))
        return 1
    except OSError as e:
        _structured_error(args.command, str(e))
        return 1
    inputs = {
        name: getattr(args, name)
        for name in ("edges", "snapshots", "universe", "model", "embeddings",
                     "volume_model", "predictions", "volumes", "amounts")
        if getattr(args, name, None)
    }
    dataio.write_manifest(
        os.path.join(args.out, f"manifest-{args.command}.json"),
        command=args.command,
        inputs=inputs,
        config=_config_echo(config),
        seed=args.seed,
        wall_time_s=time.perf_counter() - started,
        artifacts=artifacts,
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
