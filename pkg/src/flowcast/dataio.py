"""Readers and writers for the on-disk artifact formats.

CSV schemas:
    edges        src,dst,timestamp,amount
    universe     id,label
    flow tables  t,src,dst,amount      (snapshot exports and ratio/weight predictions)
    volumes      t,node,pred_volume
    xy tables    two columns, e.g. CCDF points

Model checkpoints, evaluation reports, and run manifests are JSON.  All
floats are written through their shortest round-trip representation, so
reading an artifact back restores the exact float64 values and rerunning
a command with the same config and seed reproduces the file byte for byte.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict

import numpy as np

from .graph import NodeUniverse
from .hstree import HSTree, TreeNode
from .ratio_model import RatioConfig, RatioModel
from .volume import VolumeModel

FORMAT_NAME = "flowcast-model"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Raised when a checkpoint file is malformed or of the wrong kind."""


def _fmt(x) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# CSV writers and readers


def write_edge_csv(path, edges, universe: NodeUniverse | None = None) -> None:
    """Write raw transfers in the edge format: src,dst,timestamp,amount.

    `edges` holds TemporalEdge records with integer node ids; labels come
    from `universe` when given, else the ids are written as plain text.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "dst", "timestamp", "amount"])
        for e in edges:
            src = universe.label_of(e.src) if universe is not None else str(e.src)
            dst = universe.label_of(e.dst) if universe is not None else str(e.dst)
            writer.writerow([src, dst, str(int(e.timestamp)), _fmt(e.amount)])


def write_universe_csv(path, universe: NodeUniverse) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label"])
        for i, label in enumerate(universe.labels):
            writer.writerow([str(i), label])


def read_universe_csv(path) -> NodeUniverse:
    """Read an id,label table back; ids must be exactly 0..n-1 in order."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "label"]:
            raise ValueError(f"expected header id,label, got {header}")
        labels = []
        for row in reader:
            if len(row) != 2:
                raise ValueError(f"universe row {len(labels) + 2} is malformed")
            if int(row[0]) != len(labels):
                raise ValueError(f"universe ids must be consecutive from 0, got {row[0]}")
            labels.append(row[1])
    return NodeUniverse(labels)


def series_records(series):
    """Flatten a SnapshotSeries into sorted (t, src, dst, amount) tuples."""
    for snap in series.snapshots:
        for (i, j), a in sorted(snap.adjacency.items()):
            yield snap.index, i, j, a


def prediction_records(rows_by_month: dict):
    """Flatten {month: {sender: row}} predictions into (t, src, dst, value).

    A row is either a dense array over all destinations or a sparse
    {dst: value} dict; exact zeros are skipped either way.
    """
    for t in sorted(rows_by_month):
        for i in sorted(rows_by_month[t]):
            row = rows_by_month[t][i]
            items = row.items() if isinstance(row, dict) else enumerate(np.asarray(row))
            for j, v in sorted(items):
                if v != 0.0:
                    yield t, i, int(j), float(v)


def write_flow_csv(path, records) -> None:
    """Write (t, src, dst, value) records in the snapshot CSV format."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "src", "dst", "amount"])
        for t, i, j, v in records:
            writer.writerow([str(int(t)), str(int(i)), str(int(j)), _fmt(v)])


def read_flow_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t", "src", "dst", "amount"]:
            raise ValueError(f"expected header t,src,dst,amount, got {header}")
        return [(int(t), int(i), int(j), float(v)) for t, i, j, v in reader]


def rows_from_records(records) -> dict:
    """Group flow records into {month: {sender: {dst: value}}}."""
    out: dict = {}
    for t, i, j, v in records:
        out.setdefault(t, {}).setdefault(i, {})[j] = v
    return out


def write_volume_csv(path, volumes_by_month: dict) -> None:
    """Write {month: {node: volume}} as t,node,pred_volume."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "node", "pred_volume"])
        for t in sorted(volumes_by_month):
            for i in sorted(volumes_by_month[t]):
                writer.writerow([str(int(t)), str(int(i)), _fmt(volumes_by_month[t][i])])


def read_volume_csv(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t", "node", "pred_volume"]:
            raise ValueError(f"expected header t,node,pred_volume, got {header}")
        out: dict = {}
        for t, i, v in reader:
            out.setdefault(int(t), {})[int(i)] = float(v)
        return out


def write_xy_csv(path, xs, ys, header=("x", "ccdf")) -> None:
    """Two-column table, used for CCDF points and ROC dumps."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise ValueError("column lengths differ")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for x, y in zip(xs, ys):
            writer.writerow([_fmt(x), _fmt(y)])


# ---------------------------------------------------------------------------
# JSON artifacts


def write_json(path, payload: dict) -> None:
    """Deterministic JSON dump: sorted keys, two-space indent, trailing newline."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_manifest(path, command: str, inputs: dict, config: dict, seed: int,
                   wall_time_s: float, artifacts: list) -> None:
    """Run manifest: what was run, on what, with which config and seed.

    Wall time lives only here, never inside the artifacts themselves, so
    identical config + seed still yields byte-identical outputs.
    """
    write_json(path, {
        "command": command,
        "inputs": inputs,
        "config": config,
        "seed": seed,
        "wall_time_s": wall_time_s,
        "artifacts": list(artifacts),
    })


# ---------------------------------------------------------------------------
# Model checkpoints


def _array_payload(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": [float(v) for v in a.ravel()]}


def _array_restore(payload: dict) -> np.ndarray:
    return np.asarray(payload["data"], dtype=float).reshape(payload["shape"])


def _tree_payload(tree: HSTree) -> dict:
    return {
        "n_labels": tree.n_labels,
        "out_dim": tree.out_dim,
        "pad_index": tree.pad_index,
        "children": [[[kind, int(ref)] for kind, ref in node.children] for node in tree.nodes],
        "path_matrix": [[int(v) for v in row] for row in tree.path_matrix],
        "node_offsets": [int(v) for v in tree.node_offsets],
    }


def _tree_restore(payload: dict, weights: list, biases: list) -> HSTree:
    nodes = [
        TreeNode(children=[(kind, int(ref)) for kind, ref in entry])
        for entry in payload["children"]
    ]
    return HSTree(
        nodes=nodes,
        weights=weights,
        biases=biases,
        n_labels=int(payload["n_labels"]),
        out_dim=int(payload["out_dim"]),
        path_matrix=np.asarray(payload["path_matrix"], dtype=int),
        pad_index=int(payload["pad_index"]),
        node_offsets=np.asarray(payload["node_offsets"], dtype=int),
    )


def save_ratio_checkpoint(path, model: RatioModel) -> None:
    state = model.params.state_arrays()
    params = {
        name: _array_payload(arr)
        for name, arr in state.items()
        if name not in ("tree_weights", "tree_biases")
    }
    params["tree_weights"] = [_array_payload(a) for a in state["tree_weights"]]
    params["tree_biases"] = [_array_payload(a) for a in state["tree_biases"]]
    write_json(path, {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": "ratio",
        "config": asdict(model.config),
        "tree": _tree_payload(model.tree),
        "params": params,
    })


def _check_container(payload: dict, kind: str) -> None:
    if payload.get("format") != FORMAT_NAME:
        raise CheckpointError(f"not a {FORMAT_NAME} file")
    if payload.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {payload.get('version')}")
    if payload.get("kind") != kind:
        raise CheckpointError(f"expected a {kind} checkpoint, got {payload.get('kind')!r}")


def load_ratio_checkpoint(path) -> RatioModel:
    """Rebuild a trained ratio model: config, tree topology, parameters."""
    payload = read_json(path)
    _check_container(payload, "ratio")
    config = RatioConfig(**payload["config"])
    state = {
        name: _array_restore(entry)
        for name, entry in payload["params"].items()
        if name not in ("tree_weights", "tree_biases")
    }
    state["tree_weights"] = [_array_restore(p) for p in payload["params"]["tree_weights"]]
    state["tree_biases"] = [_array_restore(p) for p in payload["params"]["tree_biases"]]
    tree = _tree_restore(payload["tree"], state["tree_weights"], state["tree_biases"])
    model = RatioModel(config, tree)
    model.params.load_state_arrays(state)
    return model


def save_volume_checkpoint(path, model: VolumeModel, config: dict | None = None) -> None:
    write_json(path, {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": "volume",
        "config": dict(config or {}),
        "model": model.as_dict(),
    })


def load_volume_checkpoint(path) -> VolumeModel:
    payload = read_json(path)
    _check_container(payload, "volume")
    return VolumeModel.from_dict(payload["model"])
