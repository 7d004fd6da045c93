"""Drive the packaged command line end to end in a temp directory.

Generates a synthetic transfer network with planted structure, trains the
ratio and volume models, predicts the held-out months, recombines the two
predictions into transfer amounts, and evaluates everything: distribution
loss against memory baselines, volume error, and AUC for edges forming
and dissolving.
"""
import json
import tempfile
from pathlib import Path

from flowcast.cli import main as cli


def run(*args) -> None:
    argv = [str(a) for a in args]
    print(f"$ flowcast {' '.join(argv)}")
    code = cli(argv)
    if code != 0:
        raise SystemExit(code)


def main() -> None:
    out = Path(tempfile.mkdtemp(prefix="flowcast-demo-"))
    print(f"working in {out}\n")

    run("synth", "--out", out, "--seed", 0, "--set", "synth.churn_months=3")
    run("train", out / "snapshots.csv", "--universe", out / "universe.csv",
        "--out", out, "--seed", 0,
        "--set", "ratio.neighbors=40", "--set", "ratio.lr=0.1",
        "--set", "ratio.epochs=150", "--set", "ratio.batch=64",
        "--set", "volume.rounds=150")
    run("predict", out / "snapshots.csv", "--universe", out / "universe.csv",
        "--out", out, "--seed", 0,
        "--model", out / "ratio-model.json",
        "--volume-model", out / "volume-model.json",
        "--set", "ratio.mix_mode=window")
    run("evaluate", out / "snapshots.csv", "--universe", out / "universe.csv",
        "--out", out,
        "--predictions", out / "predictions_ratio.csv",
        "--volumes", out / "predictions_volume.csv",
        "--amounts", out / "predictions_amount.csv")

    metrics = json.loads((out / "metrics.json").read_text())
    print(f"\nheld-out months: {metrics['months']}")
    print("\ndistribution loss (lower is better)")
    for key, label in (
        ("bce", "trained model (mixed)"),
        ("bce_edgebank", "memory baseline"),
        ("bce_edgebank_tw", "windowed memory"),
        ("bce_uniform", "uniform rows"),
    ):
        print(f"  {label:<22} {metrics[key]['value']:.4f}")

    model, uniform = metrics["bce"]["value"], metrics["bce_uniform"]["value"]
    print(f"\nimprovement over uniform: {(uniform - model) / uniform:.1%}")
    print(f"new-edge ranking auc:     {metrics['formation_auc']['value']:.4f}")
    print(f"dropped-edge ranking auc: {metrics['dissolution_auc']['value']:.4f}")
    print(f"volume mae:               {metrics['mae_volume']['value']:.2f}")
    print(f"amount mae:               {metrics['mae_amount']['value']:.2f}")
    print(f"\nall artifacts are in {out}")


if __name__ == "__main__":
    main()
