"""Command-line pipeline orchestration.

Commands: synth-corpus, extract, tune, train, evaluate, explain, pdp, embed,
stats. One JSON config file plus flag overrides (flags win); every command
writes a run manifest next to its outputs and exits 0 on success, 1 on
validation errors, 2 on runtime failures. RAGEBENCH_THREADS caps parallelism.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .audio import read_wav, to_mono_resample
from .corpus import generate_corpus
from .data import (
    FeatureTable,
    Normalizer,
    SplitIndices,
    read_feature_csv,
    read_labels_csv,
    stratified_split,
    zscore_fit,
)
from .embed import pca_2d, tsne_2d
from .errors import IoError, MissingInput, RagebenchError
from .evaluation import (
    classification_metrics,
    correlation_matrix,
    feature_t_tests,
    grid_search_cv,
    learning_curve,
)
from .explain import partial_dependence, shap_matrix, shap_summary
from .features import DEFAULT_CONFIG as DEFAULT_FEATURE_CONFIG
from .features import FEATURE_INDEX, FEATURE_NAMES, FeatureConfig, extract_features
from .models import (
    DEFAULT_GRIDS,
    DEFAULT_HYPERPARAMETERS,
    ModelSpec,
    attach_platt,
    fit_model,
    load_model,
    save_model,
)
from .plotting import PlotSpec, Series, write_svg

CANONICAL_RATE = 22050

DEFAULTS = {
    "corpus_dir": "corpus",
    "labels_file": None,  # defaults to <corpus_dir>/labels.csv
    "out_dir": "out",
    "seed": 42,
    "test_fraction": 0.2,
    "cv_folds": 5,
    "use_tuned": True,
    "plots": True,
    "synth": {"n_per_class": 100},
    "extraction": {},  # FeatureConfig field overrides
    "models": {
        "kinds": ["knn", "random_forest", "gradient_boosting", "svm"],
        "hyperparameters": {},
        "grids": {},
    },
    "explain": {
        "model": "random_forest",
        "n_permutations": 200,
        "background_size": 100,
        "max_instances": 40,
    },
    "pdp": {"features": ["tempo_bpm", "beat_strength", "onset_rate"], "n_grid": 50},
    "embed": {"perplexity": 30.0, "iterations": 1000},
    "learning_curve": {"model": "random_forest", "sizes": [100, 200, 300, 400, 600, 800]},
}


# ---------------------------------------------------------------- plumbing


def _merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path=None) -> dict:
    config = json.loads(json.dumps(DEFAULTS))  # deep copy
    if path is not None:
        file_cfg = json.loads(Path(path).read_text())
        config = _merge(config, file_cfg)
    return config


def thread_count() -> int:
    env = os.environ.get("RAGEBENCH_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


@contextmanager
def output_lock(directory: Path):
    directory.mkdir(parents=True, exist_ok=True)
    lock = directory / ".ragebench.lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise IoError(
            f"lock file {lock} exists; concurrent runs on one output directory "
            f"are unsupported (delete the file if stale)"
        ) from None
    try:
        yield
    finally:
        os.close(fd)
        lock.unlink(missing_ok=True)


def write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def write_csv(path: Path, header, rows) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    path.write_text(buffer.getvalue())


def write_manifest(out_dir: Path, command: str, config: dict) -> None:
    write_json(out_dir / f"manifest_{command}.json", {
        "command": command,
        "config": config,
        "versions": {
            "ragebench": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "timestamp": datetime.now(timezone.utc).isoformat(),
    })


def _feature_config(config: dict) -> FeatureConfig:
    overrides = config.get("extraction", {})
    valid = set(DEFAULT_FEATURE_CONFIG.__dataclass_fields__)
    unknown = set(overrides) - valid
    if unknown:
        raise RagebenchError(f"unknown extraction config keys: {sorted(unknown)}")
    return FeatureConfig(**overrides)


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise MissingInput(f"{path} not found; {hint}")
    return path


def _out_dir(config: dict) -> Path:
    return Path(config["out_dir"])


def _labels_path(config: dict) -> Path:
    if config["labels_file"]:
        return Path(config["labels_file"])
    return Path(config["corpus_dir"]) / "labels.csv"


def _load_table(config: dict) -> FeatureTable:
    path = _require(_out_dir(config) / "features.csv", "run extract first")
    return read_feature_csv(path)


def _load_split(config: dict) -> SplitIndices:
    path = _require(_out_dir(config) / "split.json", "run train first")
    doc = json.loads(path.read_text())
    return SplitIndices(train=np.array(doc["train"], dtype=int),
                        test=np.array(doc["test"], dtype=int))


def _load_normalizer(config: dict) -> Normalizer:
    path = _require(_out_dir(config) / "normalizer.json", "run train first")
    return Normalizer.from_dict(json.loads(path.read_text()))


def _load_model(config: dict, kind: str):
    path = _require(_out_dir(config) / f"model_{kind}.json",
                    "run train first")
    model = load_model(path)
    model.check_schema(FEATURE_NAMES)
    return model


# ---------------------------------------------------------------- commands


def cmd_synth_corpus(config: dict) -> None:
    corpus_dir = Path(config["corpus_dir"])
    n_per_class = config["synth"]["n_per_class"]
    seed = config["seed"]
    with output_lock(corpus_dir):
        with ThreadPoolExecutor(max_workers=thread_count()) as pool:
            logs = generate_corpus(
                corpus_dir, n_per_class, seed,
                render=lambda job, plan: pool.map(job, plan),
            )
        write_json(corpus_dir / "corpus_manifest.json",
                   {"seed": seed, "n_per_class": n_per_class, "files": logs})
        write_manifest(corpus_dir, "synth-corpus", config)


def cmd_extract(config: dict) -> None:
    labels_path = _require(_labels_path(config), "run synth-corpus or supply labels")
    entries = read_labels_csv(labels_path)
    base = labels_path.parent
    for rel_path, _, _ in entries:
        _require(base / rel_path, "listed in labels file but absent")
    feature_cfg = _feature_config(config)
    out_dir = _out_dir(config)

    def job(entry):
        rel_path, label, genre = entry
        buf = to_mono_resample(read_wav(base / rel_path), CANONICAL_RATE)
        return extract_features(buf, feature_cfg)

    with output_lock(out_dir):
        with ThreadPoolExecutor(max_workers=thread_count()) as pool:
            rows = list(pool.map(job, entries))
        table = FeatureTable(
            rows=np.array(rows),
            labels=np.array([label for _, label, _ in entries], dtype=np.int64),
            ids=tuple(Path(p).stem for p, _, _ in entries),
            genres=tuple(genre for _, _, genre in entries),
        )
        from .data import write_feature_csv

        write_feature_csv(table, out_dir / "features.csv")
        write_manifest(out_dir, "extract", config)


def _train_split_tables(config: dict):
    table = _load_table(config)
    split = stratified_split(table, config["test_fraction"], config["seed"])
    train = table.subset(split.train)
    normalizer = zscore_fit(train.rows)
    return table, split, train, normalizer


def cmd_tune(config: dict) -> None:
    _, _, train, normalizer = _train_split_tables(config)
    train_z = train.with_rows(normalizer.apply(train.rows))
    out_dir = _out_dir(config)
    report = {}
    with output_lock(out_dir):
        for kind in config["models"]["kinds"]:
            grid = config["models"]["grids"].get(kind) or DEFAULT_GRIDS[kind]
            result = grid_search_cv(kind, _parse_grid(grid), train_z,
                                    k=config["cv_folds"], seed=config["seed"])
            report[kind] = result.to_dict()
        write_json(out_dir / "tune_report.json", report)
        write_manifest(out_dir, "tune", config)


def _parse_grid(grid: dict) -> dict:
    # JSON has no None literal inside lists coming from user configs ("null" works),
    # so accept the string "None" as well
    return {k: [None if v == "None" else v for v in values] for k, values in grid.items()}


def _resolve_hyperparameters(config: dict, kind: str) -> dict:
    params = dict(DEFAULT_HYPERPARAMETERS[kind])
    tune_path = _out_dir(config) / "tune_report.json"
    if config["use_tuned"] and tune_path.exists():
        report = json.loads(tune_path.read_text())
        if kind in report:
            tuned = {k: (None if v == "None" else v)
                     for k, v in report[kind]["best_hyperparameters"].items()}
            params.update(tuned)
    params.update(config["models"]["hyperparameters"].get(kind, {}))
    return params


def cmd_train(config: dict) -> None:
    table, split, train, normalizer = _train_split_tables(config)
    train_rows_z = normalizer.apply(train.rows)
    out_dir = _out_dir(config)
    seed = config["seed"]
    with output_lock(out_dir):
        write_json(out_dir / "split.json",
                   {"seed": seed, "test_fraction": config["test_fraction"],
                    "train": [int(i) for i in split.train],
                    "test": [int(i) for i in split.test]})
        write_json(out_dir / "normalizer.json", normalizer.to_dict())
        for kind in config["models"]["kinds"]:
            params = _resolve_hyperparameters(config, kind)
            spec = ModelSpec(kind, params, seed=seed)
            if kind == "svm":
                model = _fit_calibrated_svm(spec, train, train_rows_z, config)
            else:
                model = fit_model(spec, train_rows_z, train.labels, FEATURE_NAMES)
            save_model(model, out_dir / f"model_{kind}.json")
        write_manifest(out_dir, "train", config)


def _fit_calibrated_svm(spec: ModelSpec, train: FeatureTable, train_rows_z, config: dict):
    """SMO on an inner training part, Platt scaling on the held-out part.

    Corpora too small for a 10-pair held-out set fall back to calibrating on
    training scores; Platt's target smoothing is designed to derate those.
    """
    fraction = 0.25 if round(0.25 * train.n) >= 10 else 0.5
    inner = stratified_split(train, fraction, config["seed"] + 1)
    if len(inner.test) >= 10:
        model = fit_model(spec, train_rows_z[inner.train], train.labels[inner.train],
                          FEATURE_NAMES)
        held_scores = model.model.decision(train_rows_z[inner.test])
        return attach_platt(model, held_scores, train.labels[inner.test])
    model = fit_model(spec, train_rows_z, train.labels, FEATURE_NAMES)
    return attach_platt(model, model.model.decision(train_rows_z), train.labels)


def cmd_evaluate(config: dict) -> None:
    table = _load_table(config)
    split = _load_split(config)
    normalizer = _load_normalizer(config)
    out_dir = _out_dir(config)
    test = table.subset(split.test)
    test_rows_z = normalizer.apply(test.rows)
    kinds = config["models"]["kinds"]

    with output_lock(out_dir):
        accuracies = {}
        for kind in kinds:
            model = _load_model(config, kind)
            probs = model.predict_proba(test_rows_z)
            report = classification_metrics(test.labels, probs, model_id=kind)
            accuracies[kind] = report.accuracy
            write_json(out_dir / f"evaluation_{kind}.json", report.to_dict())
            write_csv(out_dir / f"roc_{kind}.csv", ["fpr", "tpr"],
                      [(float(f), float(t)) for f, t in report.roc_points])
            write_csv(out_dir / f"calibration_{kind}.csv",
                      ["mean_predicted", "observed_frequency", "count"],
                      [(float(p), float(f), int(c))
                       for p, f, c in report.calibration_points])

        lc = _run_learning_curve(config, table, split, normalizer)
        write_csv(out_dir / "learning_curve.csv",
                  ["size", "train_mean", "train_std", "val_mean", "val_std"],
                  [(e["size"], e["train_mean"], e["train_std"],
                    e["val_mean"], e["val_std"]) for e in lc])

        best_kind = max(kinds, key=lambda k: (accuracies[k], -kinds.index(k)))
        write_json(out_dir / "summary.json",
                   {"accuracies": accuracies, "best_model": best_kind})
        if config["plots"]:
            _evaluation_figures(config, out_dir, accuracies, best_kind, lc)
        write_manifest(out_dir, "evaluate", config)


def _run_learning_curve(config, table, split, normalizer):
    train = table.subset(split.train)
    train_z = train.with_rows(normalizer.apply(train.rows))
    k = config["cv_folds"]
    max_size = int(len(train_z.labels) * (k - 1) / k * 0.99)
    sizes = sorted({s for s in config["learning_curve"]["sizes"] if s <= max_size})
    sizes.append(max_size)
    spec = ModelSpec(
        config["learning_curve"]["model"],
        _resolve_hyperparameters(config, config["learning_curve"]["model"]),
        seed=config["seed"],
    )
    return learning_curve(spec, train_z, sizes, k=k, seed=config["seed"])


def _evaluation_figures(config, out_dir, accuracies, best_kind, lc):
    kinds = list(accuracies)
    write_svg(PlotSpec(
        kind="bar", title="Accuracy across Different Models",
        x_label="model", y_label="test accuracy",
        series=[Series(name="accuracy", ys=[accuracies[k] for k in kinds],
                       labels=kinds)],
    ), out_dir / "model_accuracy.svg")

    cal_rows = list(csv.reader((out_dir / f"calibration_{best_kind}.csv")
                               .read_text().splitlines()))[1:]
    if cal_rows:
        xs = [float(r[0]) for r in cal_rows]
        ys = [float(r[1]) for r in cal_rows]
        write_svg(PlotSpec(
            kind="line", title=f"Calibration Curve ({best_kind})",
            x_label="mean predicted probability", y_label="observed frequency",
            series=[Series(name=best_kind, xs=xs, ys=ys)],
            reference_diagonal=True,
        ), out_dir / "calibration_curve.svg")

    write_svg(PlotSpec(
        kind="line", title="Learning Curve",
        x_label="training examples", y_label="accuracy",
        series=[
            Series(name="train", xs=[e["size"] for e in lc],
                   ys=[e["train_mean"] for e in lc]),
            Series(name="validation", xs=[e["size"] for e in lc],
                   ys=[e["val_mean"] for e in lc]),
        ],
    ), out_dir / "learning_curve.svg")


def cmd_explain(config: dict) -> None:
    kind = config["explain"]["model"]
    model = _load_model(config, kind)
    table = _load_table(config)
    split = _load_split(config)
    normalizer = _load_normalizer(config)
    out_dir = _out_dir(config)
    seed = config["seed"]

    train = table.subset(split.train)
    train_z = normalizer.apply(train.rows)
    background = _stratified_background(
        train_z, train.labels, config["explain"]["background_size"], seed)

    limit = config["explain"]["max_instances"]
    instance_idx = split.test[:limit]
    rows_z = normalizer.apply(table.rows[instance_idx])
    ids = [table.ids[i] for i in instance_idx]

    with output_lock(out_dir):
        matrix = shap_matrix(model.predict_proba, rows_z, background,
                             n_permutations=config["explain"]["n_permutations"],
                             seed=seed)
        write_csv(out_dir / "shap.csv",
                  ["id", *FEATURE_NAMES, "base_value"],
                  [(ids[i], *[float(v) for v in matrix.attributions[i]],
                    float(matrix.base_value)) for i in range(len(ids))])
        ranking = shap_summary(matrix.attributions, FEATURE_NAMES)
        write_csv(out_dir / "shap_summary.csv",
                  ["rank", "feature", "mean_abs_shap"],
                  [(r + 1, entry["feature"], entry["mean_abs_shap"])
                   for r, entry in enumerate(ranking)])
        if kind == "random_forest":
            importances = model.model.mdi_importance()
            order = np.argsort(-importances, kind="stable")
            write_csv(out_dir / "mdi.csv", ["rank", "feature", "importance"],
                      [(r + 1, FEATURE_NAMES[i], float(importances[i]))
                       for r, i in enumerate(order)])
        if config["plots"]:
            top = ranking[:10]
            write_svg(PlotSpec(
                kind="bar", title="SHAP Feature Importance (top 10)",
                x_label="feature", y_label="mean |SHAP value|",
                series=[Series(name="mean_abs_shap",
                               ys=[e["mean_abs_shap"] for e in top],
                               labels=[e["feature"] for e in top])],
            ), out_dir / "shap_summary.svg")
        write_manifest(out_dir, "explain", config)


def _stratified_background(rows_z, labels, size, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    chosen = []
    for c in (0, 1):
        members = np.nonzero(labels == c)[0]
        want = min(len(members), max(1, round(size * len(members) / len(labels))))
        chosen.append(members[rng.permutation(len(members))[:want]])
    return rows_z[np.sort(np.concatenate(chosen))]


def cmd_pdp(config: dict) -> None:
    kind = config["explain"]["model"]
    model = _load_model(config, kind)
    table = _load_table(config)
    normalizer = _load_normalizer(config)
    rows_z = normalizer.apply(table.rows)
    out_dir = _out_dir(config)

    with output_lock(out_dir):
        for name in config["pdp"]["features"]:
            if name not in FEATURE_INDEX:
                raise RagebenchError(f"unknown PDP feature {name!r}")
            idx = FEATURE_INDEX[name]
            curve = partial_dependence(model.predict_proba, rows_z, idx,
                                       n_grid=config["pdp"]["n_grid"],
                                       feature_name=name)
            raw_grid = curve.grid * normalizer.std[idx] + normalizer.mean[idx]
            write_csv(out_dir / f"pdp_{name}.csv",
                      ["grid_z", "grid_raw", "mean_probability"],
                      [(float(g), float(r), float(p))
                       for g, r, p in zip(curve.grid, raw_grid, curve.response)])
            if config["plots"]:
                write_svg(PlotSpec(
                    kind="step", title=f"Partial Dependence: {name}",
                    x_label=f"{name} (z-scored)", y_label="mean predicted probability",
                    series=[Series(name=name, xs=[float(g) for g in curve.grid],
                                   ys=[float(p) for p in curve.response])],
                ), out_dir / f"pdp_{name}.svg")
        write_manifest(out_dir, "pdp", config)


def cmd_embed(config: dict) -> None:
    table = _load_table(config)
    normalizer = _load_normalizer(config)
    rows_z = normalizer.apply(table.rows)
    out_dir = _out_dir(config)

    with output_lock(out_dir):
        embeddings = {
            "pca": pca_2d(rows_z),
            "tsne": tsne_2d(rows_z, perplexity=config["embed"]["perplexity"],
                            iterations=config["embed"]["iterations"],
                            seed=config["seed"]),
        }
        for method, emb in embeddings.items():
            write_csv(out_dir / f"embedding_{method}.csv", ["id", "x", "y", "label"],
                      [(table.ids[i], float(emb.coordinates[i, 0]),
                        float(emb.coordinates[i, 1]), int(table.labels[i]))
                       for i in range(table.n)])
            if config["plots"]:
                series = []
                for label, name in ((1, "rage"), (0, "non_rage")):
                    members = table.labels == label
                    series.append(Series(
                        name=name,
                        xs=[float(v) for v in emb.coordinates[members, 0]],
                        ys=[float(v) for v in emb.coordinates[members, 1]],
                    ))
                write_svg(PlotSpec(
                    kind="scatter", title=f"{method.upper()} Embedding",
                    x_label="component 1", y_label="component 2", series=series,
                ), out_dir / f"{method}.svg")
        write_manifest(out_dir, "embed", config)


def cmd_stats(config: dict) -> None:
    table = _load_table(config)
    out_dir = _out_dir(config)
    with output_lock(out_dir):
        tests = feature_t_tests(table)
        write_csv(out_dir / "t_tests.csv", ["feature", "t", "dof", "p"],
                  [(FEATURE_NAMES[e["feature"]], e["t"], e["dof"], e["p"])
                   for e in tests])
        corr, constant = correlation_matrix(table.rows)
        write_csv(out_dir / "correlation.csv", ["feature", *FEATURE_NAMES],
                  [(FEATURE_NAMES[i], *[float(v) for v in corr[i]])
                   for i in range(len(FEATURE_NAMES))])
        if constant:
            write_json(out_dir / "stats_flags.json",
                       {"constant_features": [FEATURE_NAMES[i] for i in constant]})
        write_manifest(out_dir, "stats", config)


# ---------------------------------------------------------------- entry point

COMMANDS = {
    "synth-corpus": cmd_synth_corpus,
    "extract": cmd_extract,
    "tune": cmd_tune,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "explain": cmd_explain,
    "pdp": cmd_pdp,
    "embed": cmd_embed,
    "stats": cmd_stats,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ragebench",
        description="Rage-music genre classification workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="master seed (default 42)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--corpus", help="corpus directory")
        p.add_argument("--labels", help="labels CSV path")
        if name == "synth-corpus":
            p.add_argument("--n-per-class", type=int, help="clips per class")
        if name in ("explain", "pdp"):
            p.add_argument("--model", help="model kind to explain")
        p.add_argument("--no-plots", action="store_true", help="skip SVG output")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    config = load_config(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.out:
        config["out_dir"] = args.out
    if args.corpus:
        config["corpus_dir"] = args.corpus
    if args.labels:
        config["labels_file"] = args.labels
    if getattr(args, "n_per_class", None):
        config["synth"]["n_per_class"] = args.n_per_class
    if getattr(args, "model", None):
        config["explain"]["model"] = args.model
    if args.no_plots:
        config["plots"] = False
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        COMMANDS[args.command](config)
        return 0
    except RagebenchError as exc:
        print(f"{args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failure contract
        print(f"{args.command}: unexpected {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
