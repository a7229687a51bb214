"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; the end-to-end criterion builds a 200-clip corpus and takes a few
minutes.
"""

import csv
import itertools
import json
import time
from pathlib import Path

import numpy as np
import pytest

from ragebench.audio import SynthSpec, synth_signal
from ragebench.cli import main
from ragebench.data import FeatureTable, kfold, stratified_split
from ragebench.dsp import (
    dct_ii_orthonormal,
    log_compress,
    mel_spectrogram,
    onset_strength,
    stft,
)
from ragebench.embed import pca_2d, tsne_2d
from ragebench.evaluation import (
    ConfusionMatrix,
    classification_metrics,
    grid_search_cv,
    roc_auc,
    scalar_metrics,
)
from ragebench.explain import shapley_exact, shapley_sampled
from ragebench.features import (
    FEATURE_INDEX,
    extract_features,
    hpss_ratios,
    pitch_features,
    rhythm_features,
    spectral_descriptors,
)
from ragebench.models import (
    GradientBoostingClassifier,
    KnnClassifier,
    ModelSpec,
    RandomForestClassifier,
    SvmClassifier,
    attach_platt,
    fit_model,
)

SR = 22050

PAPER_RF_GRID = {
    "n_estimators": [50, 100, 200],
    "max_depth": [None, 10, 20],
    "min_samples_split": [2, 5, 10],
    "min_samples_leaf": [1, 2, 4],
}


def report(criterion, summary):
    print(f"\n[criterion {criterion}] PASS - {summary}")


def test_criterion_1_dsp_oracle_suite():
    start = time.monotonic()

    sine = synth_signal(SynthSpec("sine", frequency=440.0, duration=10.0), SR)
    sine_spec = stft(sine)
    d = spectral_descriptors(sine_spec, sine)
    assert d["centroid_mean"] == pytest.approx(440.0, abs=5.0)
    assert d["flatness_mean"] < 0.01
    pitch = pitch_features(sine)
    assert pitch["pitch_mean"] == pytest.approx(440.0, rel=0.01)

    noise = synth_signal(SynthSpec("white_noise", seed=7, duration=2.0), SR)
    assert spectral_descriptors(stft(noise), noise)["flatness_mean"] > 0.2

    clicks = synth_signal(SynthSpec("click_track", bpm=120.0, duration=30.0, seed=3), SR)
    click_spec = stft(clicks)
    env = onset_strength(log_compress(mel_spectrogram(click_spec)), click_spec.frame_rate)
    rhythm = rhythm_features(env)
    assert rhythm["tempo_bpm"] == pytest.approx(120.0, abs=2.0)
    assert rhythm["onset_rate"] == pytest.approx(2.0, abs=0.2)

    sine_ratios = hpss_ratios(stft(synth_signal(
        SynthSpec("sine", frequency=440.0, duration=3.0), SR)))
    assert sine_ratios["harmonic_ratio"] >= 0.9
    click_ratios = hpss_ratios(stft(synth_signal(
        SynthSpec("click_track", bpm=120.0, duration=5.0, seed=3), SR)))
    assert click_ratios["percussive_ratio"] >= 0.9
    for ratios in (sine_ratios, click_ratios):
        assert ratios["harmonic_ratio"] + ratios["percussive_ratio"] == 1.0

    elapsed = time.monotonic() - start
    assert elapsed < 30.0
    report(1, f"DSP oracles: centroid {d['centroid_mean']:.1f} Hz, "
              f"tempo {rhythm['tempo_bpm']:.2f} BPM, "
              f"hpss sum == 1, in {elapsed:.1f} s")


def test_criterion_2_metric_oracle():
    m = scalar_metrics(ConfusionMatrix(tp=50, fp=10, fn=5, tn=35))
    assert m["accuracy"] == pytest.approx(0.85, abs=1e-3)
    assert m["precision"] == pytest.approx(0.8333, abs=1e-3)
    assert m["recall"] == pytest.approx(0.9091, abs=1e-3)
    assert m["f1"] == pytest.approx(0.8696, abs=1e-3)
    assert m["mcc"] == pytest.approx(0.6975, abs=1e-3)
    assert m["kappa"] == pytest.approx(0.6939, abs=1e-3)

    _, auc = roc_auc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8])
    assert auc == 0.75

    labels = np.array([0, 1, 1, 0, 1])
    perfect = classification_metrics(labels, labels.astype(float))
    assert perfect.accuracy == perfect.f1 == perfect.mcc == perfect.kappa == 1.0
    assert perfect.log_loss <= 1e-14

    balanced = np.array([0, 1] * 10)
    chance = classification_metrics(balanced, np.full(20, 0.5))
    assert chance.kappa == 0.0
    assert chance.mcc == 0.0
    report(2, "metric oracle incl. MCC 0.6975 / kappa 0.6939 and AUC 0.75 exact")


def _battery_models():
    rng = np.random.Generator(np.random.PCG64(77))
    X = rng.normal(size=(80, 8))
    y = (X[:, 0] + 0.8 * X[:, 1] - 0.5 * X[:, 2] + 0.3 * rng.normal(size=80) > 0)
    y = y.astype(int)
    models = {
        "knn": fit_model(ModelSpec("knn", {"k": 5}), X, y),
        "random_forest": fit_model(
            ModelSpec("random_forest",
                      {"n_estimators": 25, "max_depth": 6,
                       "min_samples_split": 2, "min_samples_leaf": 1}, seed=1), X, y),
        "gradient_boosting": fit_model(
            ModelSpec("gradient_boosting",
                      {"n_rounds": 30, "learning_rate": 0.1, "max_depth": 2}), X, y),
    }
    svm = fit_model(ModelSpec("svm", {"kernel": "rbf", "c": 1.0, "gamma": 0.125},
                              seed=2), X, y)
    attach_platt(svm, svm.model.decision(X), y)
    models["svm"] = svm
    background = X[:40]
    probes = X[40:60]
    return models, background, probes


def test_criterion_3_shapley_correctness():
    start = time.monotonic()
    models, background, probes = _battery_models()
    worst = 0.0
    for kind, model in models.items():
        predict = model.predict_proba
        for i, x in enumerate(probes):
            exact, exact_base = shapley_exact(predict, x, background)
            sampled, base = shapley_sampled(predict, x, background,
                                            n_permutations=2000, seed=1000 + i)
            worst = max(worst, float(np.max(np.abs(sampled - exact))))
            fx = predict(x.reshape(1, -1))[0]
            assert abs(sampled.sum() + base - fx) <= 1e-6
            assert abs(exact.sum() + exact_base - fx) <= 1e-6
    assert worst <= 0.05
    elapsed = time.monotonic() - start
    assert elapsed < 120.0
    report(3, f"sampled vs exact Shapley: max deviation {worst:.4f} <= 0.05 over "
              f"20 instances x 4 model kinds in {elapsed:.1f} s")


def test_criterion_4_protocol_properties():
    rng = np.random.Generator(np.random.PCG64(4242))
    for trial in range(100):
        n = int(rng.integers(20, 200))
        n_pos = int(rng.integers(8, n - 8))
        labels = np.zeros(n, dtype=int)
        labels[rng.permutation(n)[:n_pos]] = 1
        table = FeatureTable(rows=rng.normal(size=(n, 3)), labels=labels,
                             ids=tuple(str(i) for i in range(n)))
        seed = int(rng.integers(0, 2**32))

        split = stratified_split(table, 0.2, seed)
        combined = np.sort(np.concatenate([split.train, split.test]))
        assert np.array_equal(combined, np.arange(n))
        for c in (0, 1):
            class_total = int(np.sum(labels == c))
            in_test = int(np.sum(labels[split.test] == c))
            assert abs(in_test - class_total * 0.2) <= 1.0

        k = 5
        if min(n_pos, n - n_pos) >= k:
            folds = kfold(table, k, seed)
            all_test = np.sort(np.concatenate([f.test for f in folds]))
            assert np.array_equal(all_test, np.arange(n))
            sizes = [len(f.test) for f in folds]
            assert max(sizes) - min(sizes) <= 1

    # the published random-forest grid: 81 combinations, 405 CV fits
    combos = list(itertools.product(*PAPER_RF_GRID.values()))
    assert len(combos) == 81
    small = FeatureTable(
        rows=np.random.Generator(np.random.PCG64(5)).normal(size=(20, 5)),
        labels=np.array([0, 1] * 10),
        ids=tuple(str(i) for i in range(20)),
    )
    result = grid_search_cv("random_forest", PAPER_RF_GRID, small, k=5, seed=0)
    assert len(result.entries) == 81
    assert result.fit_count == 405

    # tie-break and determinism
    tie = grid_search_cv("knn", {"k": [3, 3]}, small, k=5, seed=0)
    assert tie.best_hyperparameters == tie.entries[0]["hyperparameters"]
    again = grid_search_cv("knn", {"k": [3, 3]}, small, k=5, seed=0)
    assert [e["fold_scores"] for e in tie.entries] == \
        [e["fold_scores"] for e in again.entries]
    report(4, "split/fold invariants on 100 random tables; RF grid = 81 combos, "
              "405 CV fits; tie-break and determinism hold")


@pytest.fixture(scope="module")
def e2e(tmp_path_factory):
    """Seed-42 synthetic end-to-end run: 100 clips per class, tuned KNN + RF."""
    root = tmp_path_factory.mktemp("e2e")
    config = {
        "corpus_dir": str(root / "corpus"),
        "out_dir": str(root / "out"),
        "seed": 42,
        "synth": {"n_per_class": 100},
        "models": {
            "kinds": ["knn", "random_forest", "gradient_boosting", "svm"],
            "hyperparameters": {},
            "grids": {
                # knn and random_forest use the full default grids; the other
                # two families are pinned to single combinations to keep the
                # tuned pipeline within the runtime budget
                "gradient_boosting": {"n_rounds": [100], "learning_rate": [0.1],
                                      "max_depth": [3]},
                "svm": {"kernel": ["rbf"], "c": [1.0], "gamma": [0.1]},
            },
        },
        "explain": {"model": "random_forest", "n_permutations": 200,
                    "background_size": 100, "max_instances": 40},
        "embed": {"perplexity": 30.0, "iterations": 1000},
        "learning_curve": {"model": "random_forest",
                           "sizes": [40, 80, 120]},
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config))
    start = time.monotonic()
    for command in ["synth-corpus", "extract", "tune", "train", "evaluate",
                    "explain", "pdp", "embed", "stats"]:
        assert main([command, "--config", str(config_path)]) == 0, command
    return root, time.monotonic() - start


def test_criterion_5_end_to_end(e2e):
    root, elapsed = e2e
    out = root / "out"

    # full-pipeline artifact contract
    for name in ["features.csv", "model_knn.json", "model_random_forest.json",
                 "model_gradient_boosting.json", "model_svm.json",
                 "evaluation_knn.json", "evaluation_random_forest.json",
                 "evaluation_gradient_boosting.json", "evaluation_svm.json",
                 "shap.csv", "pdp_tempo_bpm.csv", "pdp_beat_strength.csv",
                 "pdp_onset_rate.csv", "embedding_pca.csv", "embedding_tsne.csv",
                 "model_accuracy.svg", "pca.svg", "tsne.svg", "learning_curve.svg",
                 "calibration_curve.svg", "shap_summary.svg"]:
        assert (out / name).exists(), name

    # tuned RF searched the full published grid
    tune = json.loads((out / "tune_report.json").read_text())
    assert len(tune["random_forest"]["entries"]) == 81
    assert tune["random_forest"]["fit_count"] == 405

    knn_acc = json.loads((out / "evaluation_knn.json").read_text())["accuracy"]
    rf_acc = json.loads((out / "evaluation_random_forest.json").read_text())["accuracy"]
    assert knn_acc >= 0.95
    assert rf_acc >= 0.95

    # linear vs rbf SVM on an injected XOR-structured feature pair
    from ragebench.data import read_feature_csv

    table = read_feature_csv(out / "features.csv")
    split_doc = json.loads((out / "split.json").read_text())
    rng = np.random.Generator(np.random.PCG64(4242))
    signs = rng.choice([-1.0, 1.0], size=table.n)
    xor_a = signs + 0.25 * rng.normal(size=table.n)
    # sign product encodes the label: individually uninformative coordinates
    xor_b = signs * np.where(table.labels == 1, 1.0, -1.0) \
        + 0.25 * rng.normal(size=table.n)
    pair = np.column_stack([xor_a, xor_b])
    tr = np.array(split_doc["train"])
    te = np.array(split_doc["test"])
    linear = SvmClassifier(kernel="linear", c=10.0, seed=0).fit(pair[tr], table.labels[tr])
    rbf = SvmClassifier(kernel="rbf", c=10.0, gamma=1.0, seed=0).fit(pair[tr], table.labels[tr])
    lin_acc = float(np.mean(linear.predict(pair[te]) == table.labels[te]))
    rbf_acc = float(np.mean(rbf.predict(pair[te]) == table.labels[te]))
    assert lin_acc <= rbf_acc - 0.05

    # tempo PDP: the largest step sits inside the generator's tempo gap
    with open(out / "pdp_tempo_bpm.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    raw = np.array([float(r[1]) for r in rows])
    response = np.array([float(r[2]) for r in rows])
    steps = np.abs(np.diff(response))
    biggest = int(np.argmax(steps))
    step_bpm = 0.5 * (raw[biggest] + raw[biggest + 1])
    assert 115.0 <= step_bpm <= 150.0

    # SHAP ranking surfaces the engineered class differences
    with open(out / "shap_summary.csv", newline="") as fh:
        ranking = [r[1] for r in list(csv.reader(fh))[1:]]
    top5 = set(ranking[:5])
    rhythm_features_in_top5 = top5 & {"tempo_bpm", "onset_rate",
                                      "spectral_flatness_mean", "beat_strength"}
    assert len(rhythm_features_in_top5) >= 2

    assert elapsed < 600.0
    report(5, f"e2e: knn {knn_acc:.3f} / rf {rf_acc:.3f} >= 0.95; "
              f"svm linear {lin_acc:.3f} vs rbf {rbf_acc:.3f}; "
              f"tempo PDP step at {step_bpm:.1f} BPM; "
              f"SHAP top-5 rhythm features {sorted(rhythm_features_in_top5)}; "
              f"{elapsed:.0f} s")


def test_criterion_6_numerical_checks(blob_table):
    rng = np.random.Generator(np.random.PCG64(6))

    for _ in range(10):
        v = rng.normal(size=64)
        out = dct_ii_orthonormal(v, 64)
        assert abs(np.linalg.norm(out) - np.linalg.norm(v)) <= 1e-9

    emb = pca_2d(rng.normal(size=(60, 28)))
    comps = emb.diagnostics["components"]
    assert abs(comps[0] @ comps[1]) <= 1e-9
    assert abs(np.linalg.norm(comps[0]) - 1.0) <= 1e-9
    assert abs(np.linalg.norm(comps[1]) - 1.0) <= 1e-9

    rows = rng.normal(size=(60, 10))
    rows[30:] += 4.0
    tsne = tsne_2d(rows, perplexity=12.0, iterations=120, seed=0)
    assert np.max(np.abs(tsne.diagnostics["realized_perplexity"] - 12.0)) <= 1e-3
    assert abs(tsne.diagnostics["p_joint"].sum() - 1.0) <= 1e-9

    X, y = blob_table
    gb = GradientBoostingClassifier(n_rounds=60, learning_rate=0.1, max_depth=3)
    gb.fit(X, y)
    assert np.all(np.diff(np.array(gb.loss_trace)) <= 1e-12)

    svm = SvmClassifier(kernel="rbf", c=5.0, gamma=0.05, seed=1).fit(X, y)
    assert np.all(svm.alpha >= -1e-12)
    assert np.all(svm.alpha <= svm.c + 1e-12)
    assert svm.kkt_violation() <= 1e-3
    report(6, "DCT/PCA orthonormality <= 1e-9, t-SNE perplexity <= 1e-3 and "
              "P-sum <= 1e-9, GB loss monotone, SMO within [0,C] and KKT <= 1e-3")


def test_criterion_7_reproducibility(tmp_path, monkeypatch):
    def run_all(base, threads):
        base.mkdir(parents=True, exist_ok=True)
        monkeypatch.setenv("RAGEBENCH_THREADS", str(threads))
        config = {
            "corpus_dir": str(base / "corpus"),
            "out_dir": str(base / "out"),
            "seed": 42,
            "synth": {"n_per_class": 10},
            "models": {
                "kinds": ["knn", "random_forest", "gradient_boosting", "svm"],
                "hyperparameters": {},
                "grids": {
                    "knn": {"k": [1, 3]},
                    "random_forest": {"n_estimators": [15], "max_depth": [None],
                                      "min_samples_split": [2],
                                      "min_samples_leaf": [1]},
                    "gradient_boosting": {"n_rounds": [15], "learning_rate": [0.1],
                                          "max_depth": [2]},
                    "svm": {"kernel": ["rbf"], "c": [1.0], "gamma": [0.1]},
                },
            },
            "explain": {"model": "random_forest", "n_permutations": 100,
                        "background_size": 12, "max_instances": 4},
            "embed": {"perplexity": 5.0, "iterations": 200},
            "learning_curve": {"model": "random_forest", "sizes": [8, 12]},
        }
        config_path = base / "config.json"
        config_path.write_text(json.dumps(config))
        for command in ["synth-corpus", "extract", "tune", "train", "evaluate",
                        "explain", "pdp", "embed", "stats"]:
            assert main([command, "--config", str(config_path)]) == 0, command

    run_a, run_b = tmp_path / "a", tmp_path / "b"
    run_all(run_a, threads=2)
    run_all(run_b, threads=1)

    compared = 0
    for sub in ("corpus", "out"):
        files_a = sorted(p for p in (run_a / sub).iterdir()
                         if not p.name.startswith("manifest_")
                         and p.name != "config.json")
        for file_a in files_a:
            file_b = run_b / sub / file_a.name
            assert file_b.exists(), file_a.name
            assert file_a.read_bytes() == file_b.read_bytes(), file_a.name
            compared += 1
    assert compared > 40
    report(7, f"{compared} output files byte-identical across reruns "
              f"with different thread counts (manifests excluded)")
