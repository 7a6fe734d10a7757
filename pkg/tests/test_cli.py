"""Command-line front end: end-to-end runs, determinism, report artifacts."""

import numpy as np
import pytest

from herl.cli import main
from herl.dataio import read_matrix_csv
from herl.netmodel import init_model, load_checkpoint, student_params
from herl.config import RunConfig, load_run_config, model_spec, parse_config_file
from herl.training import LOG_HEADER


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "toy"
    code = main([
        "synth", str(path), "--branching", "2", "--depth", "2",
        "--samples-per-class", "6", "--view-dims", "5,4", "--eta", "0.25", "--seed", "3",
    ])
    assert code == 0
    return path


def run_training(dataset_dir, outdir, extra=()):
    args = [
        "train", str(dataset_dir), "--out", str(outdir),
        "--epochs", "3", "--hidden", "8", "--embed-dim", "4", "--prototypes", "4",
        "--graph-warmup", "1", "--graph-sigma", "1.0", "--seed", "5",
    ]
    args.extend(extra)
    return main(args)


class TestSynth:
    def test_layout_and_determinism(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        for out in (a, b):
            assert main(["synth", str(out), "--depth", "2", "--samples-per-class", "4",
                         "--eta", "0.5", "--seed", "11"]) == 0
        for name in ("view1.csv", "view2.csv", "labels.csv", "mask.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
        labels = read_matrix_csv(a / "labels.csv").ravel()
        assert set(labels.astype(int).tolist()) == set(range(4))
        mask = read_matrix_csv(a / "mask.csv")
        assert int((mask.sum(axis=1) == 1).sum()) == 8  # round(0.5 * 16)


class TestTrainEval:
    def test_end_to_end_artifacts(self, dataset_dir, tmp_path):
        out = tmp_path / "run"
        assert run_training(dataset_dir, out) == 0
        assert (out / "checkpoint.npz").exists()
        assert (out / "checkpoint_manifest.json").exists()
        assert (out / "training_curves.png").exists()
        log = (out / "training_log.csv").read_text().splitlines()
        assert log[0] == LOG_HEADER
        assert len(log) == 4  # header + 3 epochs

        code = main([
            "eval", str(dataset_dir), "--checkpoint", str(out / "checkpoint.npz"),
            "--out", str(out), "--clusters", "4", "--seed", "5",
        ])
        assert code == 0
        metrics = (out / "metrics.csv").read_text().splitlines()
        assert metrics[0] == "seed,eta,acc,nmi,ari,inertia"
        assert (out / "clusters.png").exists()

    def test_train_eval_bit_identical_across_runs(self, dataset_dir, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert run_training(dataset_dir, out) == 0
            assert main([
                "eval", str(dataset_dir), "--checkpoint", str(out / "checkpoint.npz"),
                "--out", str(out), "--clusters", "4", "--seed", "5",
            ]) == 0
            outs.append(out)
        a, b = outs
        assert (a / "training_log.csv").read_bytes() == (b / "training_log.csv").read_bytes()
        assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()

    def test_epochs_zero_keeps_initialization(self, dataset_dir, tmp_path):
        out = tmp_path / "zero"
        assert run_training(dataset_dir, out, extra=["--epochs", "0"]) == 0
        state = load_checkpoint(out / "checkpoint.npz")
        cfg = load_run_config(None, {
            "epochs": "0", "hidden": "8", "embed_dim": "4", "prototypes": "4",
            "graph_warmup": "1", "graph_sigma": "1.0", "seed": "5",
        })
        seeds = np.random.SeedSequence(cfg.seed).generate_state(2)
        fresh = init_model(model_spec(cfg, (5, 4), seed=int(seeds[0])), momentum=cfg.ema_momentum)
        for pa, pb in zip(student_params(state), student_params(fresh)):
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_zero_learning_rate_freezes_losses(self, dataset_dir, tmp_path):
        # warmup above the epoch count so the graph gate never flips the target
        out = tmp_path / "frozen"
        assert run_training(
            dataset_dir, out,
            extra=["--learning-rate", "0", "--epochs", "4", "--graph-warmup", "100"],
        ) == 0
        rows = (out / "training_log.csv").read_text().splitlines()[1:]
        columns = np.array([[float(v) for v in row.split(",")] for row in rows])
        # constant up to summation-order roundoff from the per-epoch shuffle
        for col in (1, 2, 3, 4):  # l_con, l_ang, l_dis, l_pro
            assert np.ptp(columns[:, col]) < 1e-12

    def test_perfect_data_reaches_full_accuracy(self, tmp_path):
        # noise 0 collapses every class to a point in both views; even the
        # untrained encoder then separates the 8 points perfectly
        data = tmp_path / "perfect"
        assert main(["synth", str(data), "--depth", "3", "--samples-per-class", "5",
                     "--noise", "0", "--eta", "0", "--seed", "2"]) == 0
        out = tmp_path / "run"
        assert run_training(data, out, extra=["--epochs", "0"]) == 0
        assert main([
            "eval", str(data), "--checkpoint", str(out / "checkpoint.npz"),
            "--out", str(out), "--clusters", "8", "--seed", "5",
        ]) == 0
        row = (out / "metrics.csv").read_text().splitlines()[1].split(",")
        assert float(row[2]) == 1.0  # acc column

    def test_missing_labels_file_errors(self, dataset_dir, tmp_path, capsys):
        out = tmp_path / "run"
        assert run_training(dataset_dir, out) == 0
        broken = tmp_path / "broken"
        broken.mkdir()
        for name in ("view1.csv", "view2.csv", "mask.csv"):
            (broken / name).write_bytes((dataset_dir / name).read_bytes())
        code = main([
            "eval", str(broken), "--checkpoint", str(out / "checkpoint.npz"),
            "--out", str(tmp_path / "evalout"), "--clusters", "4",
        ])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestConfigFile:
    def test_file_and_flag_precedence(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("epochs = 7\ntau = 0.25  # overridden below\nhidden = 16,8\n")
        values = parse_config_file(cfg_file)
        assert values == {"epochs": 7, "tau": 0.25, "hidden": (16, 8)}
        cfg = load_run_config(cfg_file, {"tau": "0.75"})
        assert cfg.epochs == 7 and cfg.tau == 0.75 and cfg.hidden == (16, 8)

    def test_unknown_key_rejected(self, tmp_path):
        cfg_file = tmp_path / "bad.cfg"
        cfg_file.write_text("learning_speed = 1\n")
        with pytest.raises(ValueError):
            parse_config_file(cfg_file)

    def test_defaults_match_stated_values(self):
        cfg = RunConfig()
        assert cfg.batch_size == 1024
        assert cfg.learning_rate == 2e-3
        assert cfg.epochs == 500
        assert cfg.graph_warmup == 100
        assert cfg.ema_momentum == 0.98
        assert cfg.graph_xi == 0.5
        assert cfg.graph_sigma == 0.1
        assert cfg.tau == 0.5 and cfg.tau_dist == 1.0


class TestTreeCommands:
    def test_sarkar_then_distortion_roundtrip(self, tmp_path, capsys):
        emb = tmp_path / "emb.csv"
        assert main(["sarkar", "--branching", "2", "--depth", "4", "--out", str(emb)]) == 0
        assert emb.exists() and emb.with_suffix(".png").exists()
        header = emb.read_text().splitlines()[0]
        assert header == "node_id,level,x,y"

        report = tmp_path / "distortion.csv"
        assert main([
            "distortion", str(emb), "--branching", "2", "--depth", "4", "--out", str(report),
        ]) == 0
        lines = report.read_text().splitlines()
        assert lines[0] == "pair_filter,D,s_star,max_ratio,min_ratio,lower_bound_n2"
        assert len(lines) == 4  # all, edges, siblings
        assert report.with_suffix(".png").exists()
        # the flat 2-d bound column carries b**(R/2)/R
        bound = float(lines[1].split(",")[-1])
        assert bound == 2 ** (4 / 2) / 4

    def test_depth1_edges_isometric(self, tmp_path):
        emb = tmp_path / "e.csv"
        assert main(["sarkar", "--branching", "2", "--depth", "1", "--out", str(emb)]) == 0
        report = tmp_path / "d.csv"
        assert main([
            "distortion", str(emb), "--branching", "2", "--depth", "1",
            "--pairs", "edges", "--out", str(report),
        ]) == 0
        row = report.read_text().splitlines()[1].split(",")
        assert float(row[1]) == pytest.approx(1.0, abs=1e-12)

    def test_oversized_tree_fails_cleanly(self, tmp_path, capsys):
        assert main(["sarkar", "--branching", "2", "--depth", "30", "--out", str(tmp_path / "x.csv")]) == 1
        assert "error:" in capsys.readouterr().err

    def test_embedding_shape_mismatch_rejected(self, tmp_path, capsys):
        emb = tmp_path / "emb.csv"
        assert main(["sarkar", "--branching", "2", "--depth", "3", "--out", str(emb)]) == 0
        assert main(["distortion", str(emb), "--branching", "2", "--depth", "4",
                     "--out", str(tmp_path / "r.csv")]) == 1
        assert "error:" in capsys.readouterr().err


class TestGradcheckCommand:
    def test_small_run_passes(self, capsys):
        assert main(["gradcheck", "--points", "2", "--seed", "0"]) == 0
        out = capsys.readouterr().out
        assert "end_to_end_total_loss" in out
        assert "FAIL" not in out


class TestAblateCommand:
    def test_tiny_grid_writes_reports(self, tmp_path):
        out = tmp_path / "abl"
        code = main([
            "ablate", "--out", str(out), "--samples-per-class", "6", "--epochs", "2",
            "--seeds", "0", "--hidden", "8", "--embed-dim", "4", "--prototypes", "4",
            "--graph-warmup", "1",
        ])
        assert code == 0
        lines = (out / "ablation.csv").read_text().splitlines()
        assert lines[0] == "variant,seed,acc,nmi,ari"
        assert len(lines) == 4  # three variants, one seed
        assert (out / "ablation.png").exists()
