import json
from pathlib import Path

import numpy as np
import pytest

from ragebench.audio import read_wav
from ragebench.cli import main
from ragebench.corpus import generate_corpus, synth_clip
from ragebench.data import read_feature_csv, read_labels_csv
from ragebench.errors import NonFiniteValue
from ragebench.features import FEATURE_INDEX, extract_features
from ragebench.plotting import PlotSpec, Series, render_svg


class TestCorpusGenerator:
    def test_counts_and_labels(self, tmp_path):
        generate_corpus(tmp_path, 10, seed=1)
        wavs = sorted(p.name for p in tmp_path.glob("*.wav"))
        assert len(wavs) == 20
        entries = read_labels_csv(tmp_path / "labels.csv")
        assert sum(1 for _, label, _ in entries if label == 1) == 10
        assert [p for p, _, _ in entries] == [w for w in sorted(
            [f"rage_{i:04d}.wav" for i in range(10)]
            + [f"nonrage_{i:04d}.wav" for i in range(10)],
            key=lambda n: (not n.startswith("rage"), n))]

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        generate_corpus(a, 10, seed=42)
        generate_corpus(b, 10, seed=42)
        for name in sorted(p.name for p in a.iterdir()):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_minimum_size(self, tmp_path):
        with pytest.raises(ValueError):
            generate_corpus(tmp_path, 5, seed=0)

    def test_rage_clip_tempo_in_band(self):
        buf, params = synth_clip(42, 0, 1)
        row = extract_features(buf)
        assert 148.0 <= row[FEATURE_INDEX["tempo_bpm"]] <= 172.0
        assert 150.0 <= params["tempo_bpm"] <= 170.0

    def test_wavs_decode_cleanly(self, tmp_path):
        generate_corpus(tmp_path, 10, seed=3)
        buf = read_wav(tmp_path / "rage_0000.wav")
        assert buf.sample_rate == 22050
        assert np.max(np.abs(buf.samples)) <= 1.0


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """Small corpus driven through every CLI command once."""
    root = tmp_path_factory.mktemp("pipeline")
    config = {
        "corpus_dir": str(root / "corpus"),
        "out_dir": str(root / "out"),
        "seed": 42,
        "synth": {"n_per_class": 12},
        "models": {
            "kinds": ["knn", "random_forest", "gradient_boosting", "svm"],
            "hyperparameters": {},
            "grids": {
                "knn": {"k": [1, 3]},
                "random_forest": {"n_estimators": [15], "max_depth": [None],
                                  "min_samples_split": [2], "min_samples_leaf": [1]},
                "gradient_boosting": {"n_rounds": [20], "learning_rate": [0.1],
                                      "max_depth": [2]},
                "svm": {"kernel": ["linear", "rbf"], "c": [1.0], "gamma": [0.1]},
            },
        },
        "explain": {"model": "random_forest", "n_permutations": 100,
                    "background_size": 16, "max_instances": 4},
        "embed": {"perplexity": 5.0, "iterations": 250},
        "learning_curve": {"model": "random_forest", "sizes": [8, 12]},
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config))
    for command in ["synth-corpus", "extract", "tune", "train", "evaluate",
                    "explain", "pdp", "embed", "stats"]:
        assert main([command, "--config", str(config_path)]) == 0, command
    return root


class TestPipeline:
    def test_artifacts_exist(self, pipeline_dir):
        out = pipeline_dir / "out"
        expected = [
            "features.csv", "split.json", "normalizer.json", "tune_report.json",
            "model_knn.json", "model_random_forest.json",
            "model_gradient_boosting.json", "model_svm.json",
            "evaluation_knn.json", "evaluation_random_forest.json",
            "evaluation_gradient_boosting.json", "evaluation_svm.json",
            "learning_curve.csv", "shap.csv", "shap_summary.csv", "mdi.csv",
            "pdp_tempo_bpm.csv", "pdp_beat_strength.csv", "pdp_onset_rate.csv",
            "embedding_pca.csv", "embedding_tsne.csv", "t_tests.csv",
            "correlation.csv", "summary.json",
            # the six core figures
            "model_accuracy.svg", "pca.svg", "tsne.svg", "learning_curve.svg",
            "calibration_curve.svg", "shap_summary.svg",
        ]
        for name in expected:
            assert (out / name).exists(), name

    def test_features_follow_manifest_order(self, pipeline_dir):
        entries = read_labels_csv(pipeline_dir / "corpus" / "labels.csv")
        table = read_feature_csv(pipeline_dir / "out" / "features.csv")
        assert list(table.ids) == [Path(p).stem for p, _, _ in entries]

    def test_manifests_written(self, pipeline_dir):
        out = pipeline_dir / "out"
        manifest = json.loads((out / "manifest_train.json").read_text())
        assert manifest["command"] == "train"
        assert manifest["config"]["seed"] == 42
        assert "timestamp" in manifest

    def test_split_reused_across_stages(self, pipeline_dir):
        out = pipeline_dir / "out"
        split = json.loads((out / "split.json").read_text())
        table = read_feature_csv(out / "features.csv")
        train, test = set(split["train"]), set(split["test"])
        assert train | test == set(range(table.n))
        assert not train & test

    def test_evaluation_reports_valid(self, pipeline_dir):
        report = json.loads(
            (pipeline_dir / "out" / "evaluation_random_forest.json").read_text())
        assert 0.0 <= report["accuracy"] <= 1.0
        assert -1.0 <= report["kappa"] <= 1.0
        assert report["log_loss"] >= 0.0
        cm = report["confusion"]
        total = cm["tp"] + cm["fp"] + cm["fn"] + cm["tn"]
        assert report["accuracy"] == pytest.approx((cm["tp"] + cm["tn"]) / total)


class TestCliContracts:
    def test_evaluate_before_train_exits_1(self, tmp_path, capsys):
        config = tmp_path / "c.json"
        config.write_text(json.dumps({
            "corpus_dir": str(tmp_path / "corpus"),
            "out_dir": str(tmp_path / "out"),
        }))
        code = main(["evaluate", "--config", str(config)])
        assert code == 1
        err = capsys.readouterr().err
        assert "features.csv" in err or "MissingInput" in err

    def test_lockfile_blocks_concurrent_run(self, tmp_path, capsys):
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        (corpus / ".ragebench.lock").write_text("")
        config = tmp_path / "c.json"
        config.write_text(json.dumps({"corpus_dir": str(corpus),
                                      "synth": {"n_per_class": 10}}))
        assert main(["synth-corpus", "--config", str(config)]) == 1
        assert "lock" in capsys.readouterr().err

    def test_flags_override_config(self, tmp_path):
        config = tmp_path / "c.json"
        config.write_text(json.dumps({"seed": 1, "corpus_dir": str(tmp_path / "a"),
                                      "synth": {"n_per_class": 10}}))
        other = tmp_path / "b"
        code = main(["synth-corpus", "--config", str(config),
                     "--corpus", str(other), "--seed", "7"])
        assert code == 0
        manifest = json.loads((other / "manifest_synth-corpus.json").read_text())
        assert manifest["config"]["seed"] == 7

    def test_unknown_extraction_key_exits_1(self, tmp_path):
        config = tmp_path / "c.json"
        config.write_text(json.dumps({
            "corpus_dir": str(tmp_path / "missing"),
            "out_dir": str(tmp_path / "out"),
            "extraction": {"bogus_knob": 3},
        }))
        assert main(["extract", "--config", str(config)]) == 1


class TestSvgRenderer:
    def test_deterministic_bytes(self):
        spec = PlotSpec(kind="line", title="t", x_label="x", y_label="y",
                        series=[Series(name="s", xs=[0.0, 1.0], ys=[0.5, 0.7])])
        assert render_svg(spec) == render_svg(spec)

    def test_empty_series_rejected(self):
        spec = PlotSpec(kind="line", title="t", x_label="x", y_label="y", series=[])
        with pytest.raises(NonFiniteValue):
            render_svg(spec)

    def test_non_finite_rejected(self):
        spec = PlotSpec(kind="line", title="t", x_label="x", y_label="y",
                        series=[Series(name="s", xs=[0.0, 1.0], ys=[0.1, np.nan])])
        with pytest.raises(NonFiniteValue):
            render_svg(spec)

    def test_calibration_contains_reference_line(self):
        spec = PlotSpec(kind="line", title="cal", x_label="p", y_label="freq",
                        series=[Series(name="m", xs=[0.1, 0.9], ys=[0.15, 0.85])],
                        reference_diagonal=True)
        assert "stroke-dasharray" in render_svg(spec)

    def test_all_kinds_render(self):
        for kind in ("line", "step", "scatter"):
            spec = PlotSpec(kind=kind, title="t", x_label="x", y_label="y",
                            series=[Series(name="s", xs=[0.0, 1.0, 2.0],
                                           ys=[0.1, 0.5, 0.3])])
            out = render_svg(spec)
            assert out.startswith("<svg") and out.endswith("</svg>")
        bar = PlotSpec(kind="bar", title="t", x_label="x", y_label="y",
                       series=[Series(name="s", ys=[1.0, 2.0], labels=["a", "b"])])
        assert "<rect" in render_svg(bar)
