import json
import subprocess
import sys

import numpy as np
import pytest

from flowcast.cli import main
from flowcast.dataio import read_flow_csv, read_json, rows_from_records, write_flow_csv


def run(*args) -> int:
    return main([str(a) for a in args])


def run_ok(*args) -> None:
    assert run(*args) == 0


SMALL_SYNTH = [
    "synth",
    "--set", "synth.n_nodes=14",
    "--set", "synth.n_months=10",
    "--set", "synth.n_guests=2",
    "--set", "synth.churn_months=2",
]

SMALL_TRAIN = [
    "--set", "embed.dim=12",
    "--set", "ratio.attn_dim=12",
    "--set", "ratio.hidden_dim=12",
    "--set", "ratio.out_dim=12",
    "--set", "ratio.neighbors=10",
    "--set", "ratio.lr=0.05",
    "--set", "ratio.epochs=4",
    "--set", "ratio.batch=32",
    "--set", "volume.rounds=25",
]


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("fx")
    run_ok(*SMALL_SYNTH, "--seed", 3, "--out", path)
    return path


@pytest.fixture(scope="module")
def trained_dir(tmp_path_factory, fixture_dir):
    path = tmp_path_factory.mktemp("run")
    run_ok(
        "train", fixture_dir / "snapshots.csv",
        "--universe", fixture_dir / "universe.csv",
        "--out", path, "--seed", 3, *SMALL_TRAIN,
    )
    return path


class TestSynth:
    def test_writes_expected_artifacts(self, fixture_dir):
        for name in ("edges.csv", "universe.csv", "snapshots.csv", "truth.json",
                     "manifest-synth.json"):
            assert (fixture_dir / name).exists()
        truth = read_json(fixture_dir / "truth.json")
        assert truth["seed"] == 3
        assert truth["config"]["synth.n_nodes"] == 14
        assert truth["truth"]["labels"][0] == "sig_a"

    def test_same_seed_identical_csv(self, tmp_path):
        a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
        run_ok(*SMALL_SYNTH, "--seed", 5, "--out", a)
        run_ok(*SMALL_SYNTH, "--seed", 5, "--out", b)
        run_ok(*SMALL_SYNTH, "--seed", 6, "--out", c)
        assert (a / "edges.csv").read_bytes() == (b / "edges.csv").read_bytes()
        assert (a / "edges.csv").read_bytes() != (c / "edges.csv").read_bytes()

    def test_rejects_too_small_networks(self, tmp_path, capsys):
        assert run("synth", "--out", tmp_path, "--set", "synth.n_nodes=9") == 1
        assert "synth.n_nodes" in capsys.readouterr().err
        assert run("synth", "--out", tmp_path, "--set", "synth.n_months=5") == 1
        assert "synth.n_months" in capsys.readouterr().err

    def test_persistence_target_hits_measured_value(self, tmp_path):
        out = tmp_path / "steady"
        run_ok(
            "synth", "--out", out,
            "--set", "synth.n_nodes=24",
            "--set", "synth.n_months=12",
            "--set", "synth.n_guests=0",
            "--set", "synth.flip_prob=0",
            "--set", "synth.persistence_target=0.5",
        )
        st = tmp_path / "stats"
        run_ok("stats", out / "snapshots.csv", "--universe", out / "universe.csv", "--out", st)
        measured = read_json(st / "stats.json")["summary"]["avg_edge_persistence"]
        assert abs(measured - 0.5) <= 0.05

    def test_no_churn_means_full_persistence(self, tmp_path):
        out = tmp_path / "static"
        run_ok(
            "synth", "--out", out,
            "--set", "synth.n_nodes=12",
            "--set", "synth.n_months=8",
            "--set", "synth.n_guests=0",
            "--set", "synth.flip_prob=0",
            "--set", "synth.churn_months=0",
        )
        st = tmp_path / "stats"
        run_ok("stats", out / "snapshots.csv", "--out", st)
        assert read_json(st / "stats.json")["summary"]["avg_edge_persistence"] == 1.0

    def test_infeasible_persistence_target_fails(self, tmp_path, capsys):
        code = run(
            "synth", "--out", tmp_path,
            "--set", "synth.n_guests=0",
            "--set", "synth.flip_prob=0",
            "--set", "synth.persistence_target=0.01",
        )
        assert code == 1
        assert "persistence" in capsys.readouterr().err


class TestIngest:
    def test_round_trip_preserves_structure(self, fixture_dir, tmp_path):
        out = tmp_path / "ing"
        run_ok("ingest", fixture_dir / "edges.csv", "--out", out)
        report = read_json(out / "ingest_report.json")
        assert report["n_nodes"] == 14
        assert report["n_snapshots"] == 10

        st_a, st_b = tmp_path / "sa", tmp_path / "sb"
        run_ok("stats", fixture_dir / "snapshots.csv", "--out", st_a)
        run_ok("stats", out / "snapshots.csv", "--out", st_b)
        sa = read_json(st_a / "stats.json")["summary"]
        sb = read_json(st_b / "stats.json")["summary"]
        # node ids are reassigned by first appearance, which reorders float
        # accumulation; values agree to rounding
        assert sa == pytest.approx(sb, rel=1e-12)

    def test_missing_file_is_structured_error(self, tmp_path, capsys):
        assert run("ingest", tmp_path / "nope.csv", "--out", tmp_path) == 1
        err = capsys.readouterr().err
        payload = json.loads(err)
        assert payload["error"]["command"] == "ingest"


class TestStats:
    def test_summary_fields_and_ccdf_tables(self, fixture_dir, tmp_path):
        out = tmp_path / "st"
        run_ok("stats", fixture_dir / "snapshots.csv",
               "--universe", fixture_dir / "universe.csv", "--out", out, "--power-law")
        payload = read_json(out / "stats.json")
        assert set(payload["summary"]) == {
            "n_snapshots", "n_nodes", "n_edges", "avg_sparsity", "avg_edge_persistence"
        }
        assert set(payload["power_law"]) == {
            "in_degree", "out_degree", "in_weight", "out_weight"
        }
        for name in ("in_degree", "out_degree", "in_weight", "out_weight"):
            lines = (out / f"ccdf_{name}.csv").read_text().strip().splitlines()
            assert lines[0] == f"{name},ccdf"
            assert len(lines) > 1


class TestBaseline:
    def test_ratio_rows_are_distributions(self, fixture_dir, tmp_path):
        out = tmp_path / "bl"
        run_ok("baseline", fixture_dir / "snapshots.csv", "--out", out,
               "--method", "edgebank", "--target", "ratio")
        rows = rows_from_records(read_flow_csv(out / "baseline_ratio.csv"))
        assert sorted(rows) == [8, 9]
        for t in rows:
            for i, row in rows[t].items():
                assert sum(row.values()) == pytest.approx(1.0, abs=1e-9)

    def test_windowed_variant_and_volume_target(self, fixture_dir, tmp_path):
        out = tmp_path / "bl"
        run_ok("baseline", fixture_dir / "snapshots.csv", "--out", out,
               "--method", "edgebank-tw", "--target", "volume")
        report = read_json(out / "baseline_report.json")
        assert report["method"] == "edgebank-tw"
        assert (out / "baseline_volume.csv").exists()


class TestTrainPredictEvaluate:
    def test_train_artifacts(self, trained_dir):
        for name in ("ratio-model.json", "volume-model.json", "embeddings.csv",
                     "train_report.json"):
            assert (trained_dir / name).exists()
        report = read_json(trained_dir / "train_report.json")
        assert report["test_months"] == [8, 9]
        assert report["ratio"]["train_months"] == [4, 8]
        assert len(report["ratio"]["epoch_losses"]) == 4

    def test_predict_and_evaluate(self, fixture_dir, trained_dir, tmp_path):
        out = tmp_path / "pred"
        run_ok(
            "predict", fixture_dir / "snapshots.csv",
            "--universe", fixture_dir / "universe.csv",
            "--out", out, "--seed", 3,
            "--model", trained_dir / "ratio-model.json",
            "--volume-model", trained_dir / "volume-model.json",
            "--set", "ratio.mix_mode=window",
        )
        ev = tmp_path / "ev"
        run_ok(
            "evaluate", fixture_dir / "snapshots.csv",
            "--universe", fixture_dir / "universe.csv",
            "--out", ev,
            "--predictions", out / "predictions_ratio.csv",
            "--volumes", out / "predictions_volume.csv",
            "--amounts", out / "predictions_amount.csv",
            "--dump-roc",
        )
        metrics = read_json(ev / "metrics.json")
        assert metrics["months"] == [8, 9]
        assert metrics["row_sums"]["n_off"] == 0
        for key in ("bce", "bce_edgebank", "bce_edgebank_tw", "bce_uniform",
                    "mae_volume", "mape_volume", "mae_amount"):
            assert metrics[key]["value"] >= 0.0
        assert (ev / "formation_scores.csv").exists()
        assert (ev / "dissolution_scores.csv").exists()

    def test_predict_months_flag(self, fixture_dir, trained_dir, tmp_path):
        out = tmp_path / "pred"
        run_ok(
            "predict", fixture_dir / "snapshots.csv",
            "--out", out,
            "--model", trained_dir / "ratio-model.json",
            "--months", "6,7",
        )
        rows = rows_from_records(read_flow_csv(out / "predictions_ratio.csv"))
        assert sorted(rows) == [6, 7]

    def test_full_pipeline_reruns_byte_identical(self, fixture_dir, tmp_path):
        outputs = []
        for tag in ("one", "two"):
            run_dir = tmp_path / tag
            run_ok(
                "train", fixture_dir / "snapshots.csv",
                "--universe", fixture_dir / "universe.csv",
                "--out", run_dir, "--seed", 11, *SMALL_TRAIN,
            )
            run_ok(
                "predict", fixture_dir / "snapshots.csv",
                "--universe", fixture_dir / "universe.csv",
                "--out", run_dir, "--seed", 11,
                "--model", run_dir / "ratio-model.json",
                "--volume-model", run_dir / "volume-model.json",
            )
            run_ok(
                "evaluate", fixture_dir / "snapshots.csv",
                "--universe", fixture_dir / "universe.csv",
                "--out", run_dir, "--seed", 11,
                "--predictions", run_dir / "predictions_ratio.csv",
                "--volumes", run_dir / "predictions_volume.csv",
            )
            outputs.append(run_dir)
        a, b = outputs
        for name in ("ratio-model.json", "volume-model.json", "embeddings.csv",
                     "predictions_ratio.csv", "predictions_volume.csv", "metrics.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_evaluate_on_ground_truth_is_perfect(self, tmp_path):
        # a fixed one-destination-per-sender network: truth rows are one-hot
        records = []
        for t in range(6):
            records += [(t, 0, 1, 5.0), (t, 1, 2, 2.5), (t, 2, 0, 4.0), (t, 3, 0, 1.0)]
        snaps = tmp_path / "snapshots.csv"
        write_flow_csv(snaps, records)
        ratios = tmp_path / "ratios.csv"
        write_flow_csv(ratios, [(t, i, j, 1.0) for t, i, j, _ in records if t >= 4])
        volumes = tmp_path / "volumes.csv"
        with open(volumes, "w") as fh:
            fh.write("t,node,pred_volume\n")
            for t, i, _, a in records:
                if t >= 4:
                    fh.write(f"{t},{i},{a!r}\n")
        amounts = tmp_path / "amounts.csv"
        write_flow_csv(amounts, [r for r in records if r[0] >= 4])

        out = tmp_path / "ev"
        run_ok(
            "evaluate", snaps, "--out", out,
            "--predictions", ratios, "--volumes", volumes, "--amounts", amounts,
        )
        metrics = read_json(out / "metrics.json")
        assert metrics["bce"]["value"] == 0.0
        assert metrics["mae_volume"]["value"] == 0.0
        assert metrics["mape_volume"]["value"] == 0.0
        assert metrics["mae_amount"]["value"] == 0.0
        # nothing ever forms or dissolves here, and that is reported, not hidden
        assert "error" in metrics["formation_auc"]
        assert "error" in metrics["dissolution_auc"]

    def test_evaluate_requires_an_input(self, fixture_dir, tmp_path, capsys):
        assert run("evaluate", fixture_dir / "snapshots.csv", "--out", tmp_path) == 1
        assert "nothing to evaluate" in capsys.readouterr().err


class TestConfigPlumbing:
    def test_unknown_key_rejected(self, tmp_path, capsys):
        assert run("synth", "--out", tmp_path, "--set", "bogus.key=1") == 1
        assert "bogus.key" in capsys.readouterr().err

    def test_bad_value_rejected(self, tmp_path, capsys):
        assert run("synth", "--out", tmp_path, "--set", "synth.n_nodes=ten") == 1
        assert "synth.n_nodes" in capsys.readouterr().err

    def test_flags_override_config_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("synth.n_months = 8\nsynth.n_nodes = 12\nsynth.n_guests = 0\n")
        out = tmp_path / "out"
        run_ok("synth", "--config", cfg, "--out", out, "--set", "synth.n_months=7")
        truth = read_json(out / "truth.json")
        assert truth["config"]["synth.n_months"] == 7
        assert truth["config"]["synth.n_nodes"] == 12
        records = read_flow_csv(out / "snapshots.csv")
        assert max(t for t, _, _, _ in records) == 6

    def test_manifest_records_run(self, fixture_dir):
        manifest = read_json(fixture_dir / "manifest-synth.json")
        assert manifest["command"] == "synth"
        assert manifest["seed"] == 3
        assert "snapshots.csv" in manifest["artifacts"]
        assert manifest["wall_time_s"] >= 0.0
        assert manifest["config"]["synth.n_nodes"] == 14


def test_console_script_entry_point(tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "flowcast.cli", "synth", "--out", str(tmp_path),
         "--set", "synth.n_nodes=12", "--set", "synth.n_months=6",
         "--set", "synth.n_guests=0", "--set", "synth.churn_months=0"],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
    assert (tmp_path / "edges.csv").exists()
