import json

import numpy as np
import pytest

from t2meval import embed, synthetic
from t2meval.cli import main
from t2meval.motion import MotionSequence, save_npy
from t2meval.reporting import read_csv
from t2meval.stats import MODEL_NAMES, pearson

N_PROMPTS = 8
NOISE = {"HumanML3D": 0.0, "MotionDiffuse": 0.02, "text2motion": 0.05, "TM2T": 0.1, "MDM": 0.2}
BASE_RATING = {"HumanML3D": 3.8, "MotionDiffuse": 3.3, "text2motion": 2.8, "TM2T": 2.3, "MDM": 1.8}


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    """Tiny rated dataset: 5 models x 8 prompts, generated motions get
    per-model noise and correspondingly lower ratings."""
    root = tmp_path_factory.mktemp("dataset")
    motions = root / "motions"
    motions.mkdir()
    rng = np.random.default_rng(0)
    rows = []
    clean = {}
    for i in range(N_PROMPTS):
        clean[i] = synthetic.make_motion(i % 8, frames=24, rng=rng)
    for model in MODEL_NAMES:
        for i in range(N_PROMPTS):
            pos = clean[i].positions + rng.normal(scale=NOISE[model] + 1e-9,
                                                  size=clean[i].positions.shape)
            save_npy(motions / f"AMASS_motion_{model}_{100 + i}.npy",
                     MotionSequence(positions=pos.astype(np.float32)))
            wiggle = 0.1 * ((i % 3) - 1)
            rows.append(
                f"{i},{model},{100 + i},{BASE_RATING[model] + wiggle:.2f},"
                f"{BASE_RATING[model] + wiggle:.2f},{synthetic.description(i % 8)}"
            )
    ratings = root / "ratings.csv"
    ratings.write_text("\n".join(rows) + "\n")

    emb_dir = root / "embeddings"
    emb_dir.mkdir()
    m_embs, t_embs = [], []
    for model in MODEL_NAMES:
        for i in range(N_PROMPTS):
            direction = synthetic.direction_vector(i % 8)[[0, 2]]
            t_embs.append(direction)
            m_embs.append(direction + rng.normal(scale=NOISE[model] + 0.01, size=2))
    embed.save_embeddings(emb_dir / "motions.f32", np.array(m_embs), "motion")
    embed.save_embeddings(emb_dir / "texts.f32", np.array(t_embs), "text")
    return {"root": root, "motions": motions, "ratings": ratings, "embeddings": emb_dir}


class TestIngest:
    def test_counts_per_model(self, dataset, capsys):
        code = main(["ingest", "--ratings", str(dataset["ratings"]),
                     "--motions", str(dataset["motions"])])
        out = capsys.readouterr().out
        assert code == 0
        assert f"ingested {5 * N_PROMPTS} rating records" in out
        for model in MODEL_NAMES:
            assert f"{model}: {N_PROMPTS} samples" in out
        assert "all motion files resolved" in out

    def test_missing_motion_listed_run_continues(self, dataset, tmp_path, capsys):
        holey = tmp_path / "motions"
        holey.mkdir()
        for f in dataset["motions"].iterdir():
            (holey / f.name).write_bytes(f.read_bytes())
        (holey / "AMASS_motion_MDM_103.npy").unlink()
        code = main(["ingest", "--ratings", str(dataset["ratings"]), "--motions", str(holey)])
        out = capsys.readouterr().out
        assert code == 0
        assert "AMASS_motion_MDM_103.npy" in out

    def test_bad_ratings_csv_exit_code(self, dataset, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("0,MDM,100,4.7,2.0,prompt\n")
        code = main(["ingest", "--ratings", str(bad), "--motions", str(dataset["motions"])])
        assert code == 3
        assert "[0, 4]" in capsys.readouterr().err


class TestEval:
    def test_ce_scores_and_determinism(self, dataset, tmp_path):
        args = ["eval", "--ratings", str(dataset["ratings"]),
                "--motions", str(dataset["motions"]),
                "--metrics", "ae_pose_position,ave_root_position", "--seed", "5"]
        assert main(args + ["--out", str(tmp_path / "run1")]) == 0
        assert main(args + ["--out", str(tmp_path / "run2")]) == 0
        first = (tmp_path / "run1" / "scores.csv").read_bytes()
        second = (tmp_path / "run2" / "scores.csv").read_bytes()
        assert first == second
        rows = read_csv(tmp_path / "run1" / "scores.csv")
        assert len(rows) == 2 * 5 * N_PROMPTS
        reference_rows = [r for r in rows if r["model_name"] == "HumanML3D"]
        assert all(float(r["score"]) == 0.0 for r in reference_rows)
        noisy = [float(r["score"]) for r in rows
                 if r["model_name"] == "MDM" and r["metric"] == "ae_pose_position"]
        assert all(s > 0 for s in noisy)

    def test_embedding_metrics(self, dataset, tmp_path):
        out = tmp_path / "emb"
        code = main(["eval", "--ratings", str(dataset["ratings"]),
                     "--motions", str(dataset["motions"]),
                     "--embeddings", str(dataset["embeddings"]),
                     "--metrics", "mmdist,rprecision@2,fid", "--out", str(out)])
        assert code == 0
        rows = read_csv(out / "scores.csv")
        by_metric = {}
        for r in rows:
            by_metric.setdefault(r["metric"], []).append(r)
        assert len(by_metric["mmdist"]) == 40
        assert len(by_metric["rprecision@2"]) == 40
        assert set(float(r["score"]) for r in by_metric["rprecision@2"]) <= {0.0, 1.0}
        fid_rows = by_metric["fid"]
        assert len(fid_rows) == 5
        assert all(r["level"] == "model" for r in fid_rows)
        fid_by_model = {r["model_name"]: float(r["score"]) for r in fid_rows}
        assert fid_by_model["HumanML3D"] == pytest.approx(0.0, abs=1e-8)
        assert fid_by_model["MDM"] > fid_by_model["MotionDiffuse"]

    def test_sample_level_fid_rejected(self, dataset, tmp_path, capsys):
        code = main(["eval", "--ratings", str(dataset["ratings"]),
                     "--motions", str(dataset["motions"]),
                     "--metrics", "fid@sample", "--out", str(tmp_path / "x")])
        assert code == 2
        assert "model level" in capsys.readouterr().err

    def test_root_scale_search_outputs(self, dataset, tmp_path):
        out = tmp_path / "search"
        code = main(["eval", "--ratings", str(dataset["ratings"]),
                     "--motions", str(dataset["motions"]),
                     "--metrics", "ae_pose_position", "--root-scale-search",
                     "--out", str(out)])
        assert code == 0
        rows = read_csv(out / "root_scale_search.csv")
        assert len(rows) == 30 * 4
        scales = {float(r["root_scale"]) for r in rows}
        assert min(scales) == 2.0 ** -15 and max(scales) == 2.0 ** 14
        assert (out / "root_scale_search.png").exists()
        assert (out / "manifest.json").exists()


class TestCorrelate:
    def write_scores(self, path, records_scores):
        lines = ["model_name,restricted_index,original_index,metric,level,score"]
        for model, idx, metric, score in records_scores:
            lines.append(f"{model},{idx},{100 + idx},{metric},sample,{float(score)!r}")
        path.write_text("\n".join(lines) + "\n")

    def test_metric_equal_to_rating_gives_unit_correlation(self, dataset, tmp_path):
        from t2meval.stats import load_ratings_csv
        records = load_ratings_csv(dataset["ratings"])
        scores = [(r.model_name, r.restricted_index, "planted", r.faithfulness) for r in records]
        scores_csv = tmp_path / "scores.csv"
        self.write_scores(scores_csv, scores)
        out = tmp_path / "corr"
        code = main(["correlate", "--scores", str(scores_csv),
                     "--ratings", str(dataset["ratings"]), "--out", str(out)])
        assert code == 0
        rows = read_csv(out / "correlations.csv")
        planted = {(r["rating"], r["level"]): float(r["pearson_r"]) for r in rows}
        assert planted[("faithfulness", "sample")] == pytest.approx(1.0, abs=1e-12)
        negated = [(m, i, "neg", -s) for m, i, _, s in scores]
        self.write_scores(scores_csv, negated)
        assert main(["correlate", "--scores", str(scores_csv),
                     "--ratings", str(dataset["ratings"]), "--out", str(out)]) == 0
        rows = read_csv(out / "correlations.csv")
        planted = {(r["rating"], r["level"]): float(r["pearson_r"]) for r in rows}
        assert planted[("faithfulness", "sample")] == pytest.approx(-1.0, abs=1e-12)

    def test_constructed_model_level_correlation(self, dataset, tmp_path):
        from t2meval.stats import load_ratings_csv
        records = load_ratings_csv(dataset["ratings"])
        models = sorted({r.model_name for r in records})
        mean_ratings = np.array([
            np.mean([r.faithfulness for r in records if r.model_name == m]) for m in models
        ])
        yc = mean_ratings - mean_ratings.mean()
        u = yc / np.linalg.norm(yc)
        z = np.array([0.3, -0.2, -0.9, 1.1, -0.3])
        z = z - z.mean()
        z -= (z @ u) * u
        assert np.linalg.norm(z) > 1e-6  # construction needs an off-axis direction
        z /= np.linalg.norm(z)
        target_r = 0.9
        x = target_r * u + np.sqrt(1 - target_r ** 2) * z
        per_model = dict(zip(models, x))
        scores = [(r.model_name, r.restricted_index, "constructed", per_model[r.model_name])
                  for r in records]
        scores_csv = tmp_path / "scores.csv"
        self.write_scores(scores_csv, scores)
        out = tmp_path / "corr"
        assert main(["correlate", "--scores", str(scores_csv),
                     "--ratings", str(dataset["ratings"]), "--out", str(out)]) == 0
        rows = read_csv(out / "correlations.csv")
        got = {(r["rating"], r["level"]): float(r["pearson_r"]) for r in rows}
        assert got[("faithfulness", "model")] == pytest.approx(0.9, abs=1e-9)
        assert (out / "correlation_table.csv").exists()
        assert (out / "correlation_bars.png").exists()

    def test_report_rerun_byte_identical(self, dataset, tmp_path):
        from t2meval.stats import load_ratings_csv
        records = load_ratings_csv(dataset["ratings"])
        scores = [(r.model_name, r.restricted_index, "m", r.naturalness * 0.5) for r in records]
        scores_csv = tmp_path / "scores.csv"
        self.write_scores(scores_csv, scores)
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["correlate", "--scores", str(scores_csv),
                         "--ratings", str(dataset["ratings"]), "--out", str(out)]) == 0
            outs.append(out)
        for fname in ("correlations.csv", "correlation_table.csv",
                      "correlations.json", "correlation_bars.png", "manifest.json"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes(), fname


TRAIN_CONFIG = {
    "mobert": {
        "d_model": 32, "vocab_size": 64, "max_context": 32, "n_layers": 2,
        "ff_dim": 64, "n_heads": 4, "frame_hidden": 48,
        "chunk_mlp_dims": [672, 128, 64, 32], "head_dims": [32, 16, 16, 1],
        "groupnorm_groups": 4, "wide_groupnorm_groups": 4,
        "dropout_encoder": 0.0, "dropout_transformer": 0.0,
    },
    "train": {"epochs": 2, "batch_size": 8, "lr": 1e-3, "vocab_size": 64,
              "synthetic": True, "synthetic_n": 16},
}


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("train_out")
    cfg_path = out / "config.json"
    cfg_path.write_text(json.dumps(TRAIN_CONFIG))
    code = main(["train", "--config", str(cfg_path), "--synthetic",
                 "--out", str(out), "--seed", "0"])
    assert code == 0
    return out


class TestTrainScoreRegression:

    def test_train_artifacts(self, trained):
        assert (trained / "checkpoint.mbrt").exists()
        assert (trained / "vocab.json").exists()
        assert (trained / "loss_history.png").exists()
        rows = read_csv(trained / "loss_history.csv")
        assert len(rows) == 2
        assert all(float(r["loss"]) > 0 for r in rows)

    def test_score_alignment_mode(self, trained, capsys, tmp_path):
        motion_file = next((trained / "synthetic_corpus").glob("*.npy"))
        out_dir = tmp_path / "score_out"
        code = main(["score", "--checkpoint", str(trained / "checkpoint.mbrt"),
                     "--motion", str(motion_file), "--text", "a person walks north",
                     "--out", str(out_dir)])
        assert code == 0
        out = capsys.readouterr().out
        value = float(out.split("alignment score:")[1].strip())
        assert 0.0 < value < 1.0
        written = json.loads((out_dir / "score.json").read_text())
        assert written["score"] == value
        assert written["mode"] == "alignment"

    def test_score_text_free(self, trained, capsys):
        motion_file = next((trained / "synthetic_corpus").glob("*.npy"))
        code = main(["score", "--checkpoint", str(trained / "checkpoint.mbrt"),
                     "--motion", str(motion_file), "--text-free"])
        assert code == 0
        assert "alignment score:" in capsys.readouterr().out

    def test_score_without_text_rejected(self, trained, capsys):
        motion_file = next((trained / "synthetic_corpus").glob("*.npy"))
        code = main(["score", "--checkpoint", str(trained / "checkpoint.mbrt"),
                     "--motion", str(motion_file)])
        assert code == 2

    def test_fit_regression_one_prediction_per_sample(self, trained, dataset, tmp_path):
        out = tmp_path / "reg"
        code = main(["fit-regression", "--checkpoint", str(trained / "checkpoint.mbrt"),
                     "--ratings", str(dataset["ratings"]),
                     "--motions", str(dataset["motions"]),
                     "--mode", "ridge", "--out", str(out), "--seed", "1"])
        assert code == 0
        rows = read_csv(out / "oof_predictions.csv")
        assert len(rows) == 5 * N_PROMPTS
        keys = {(r["model_name"], r["restricted_index"]) for r in rows}
        assert len(keys) == 5 * N_PROMPTS
        head = json.loads((out / "head.json").read_text())
        assert head["kind"] == "ridge"
        report = json.loads((out / "regression_report.json").read_text())
        assert report["n"] == 5 * N_PROMPTS

    def test_missing_checkpoint_is_config_error(self, dataset):
        code = main(["fit-regression", "--ratings", str(dataset["ratings"]),
                     "--motions", str(dataset["motions"]), "--mode", "ridge"])
        assert code == 2

    def test_eval_mobert_alignment_metric(self, trained, dataset, tmp_path):
        out = tmp_path / "mobert_eval"
        code = main(["eval", "--ratings", str(dataset["ratings"]),
                     "--motions", str(dataset["motions"]),
                     "--checkpoint", str(trained / "checkpoint.mbrt"),
                     "--metrics", "mobert_alignment", "--out", str(out)])
        assert code == 0
        rows = read_csv(out / "scores.csv")
        assert len(rows) == 5 * N_PROMPTS
        assert all(0.0 < float(r["score"]) < 1.0 for r in rows)


class TestAllowanceExpansion:
    def test_rprecision_expands_over_allowances(self, dataset, tmp_path):
        out = tmp_path / "allow"
        code = main(["eval", "--ratings", str(dataset["ratings"]),
                     "--motions", str(dataset["motions"]),
                     "--embeddings", str(dataset["embeddings"]),
                     "--metrics", "rprecision", "--allowance", "1", "2", "5",
                     "--out", str(out)])
        assert code == 0
        rows = read_csv(out / "scores.csv")
        metrics = {r["metric"] for r in rows}
        assert metrics == {"rprecision@1", "rprecision@2", "rprecision@5"}
        assert len(rows) == 3 * 5 * N_PROMPTS
        # report row count = samples x sample-level metrics
        by_metric = {}
        for r in rows:
            by_metric.setdefault(r["metric"], []).append(r)
        assert all(len(v) == 5 * N_PROMPTS for v in by_metric.values())
