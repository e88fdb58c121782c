"""Command-line front end.

Every run is driven by a JSON config (flags override fields) and writes the
fully resolved config next to its outputs, so a single file plus one seed
reproduces an experiment bit for bit.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
import zlib
from pathlib import Path

import numpy as np

from . import candidates as cand_mod
from . import corpus as corpus_mod
from . import embeddings as emb_mod
from . import features as feat_mod
from . import pipeline as pipe_mod
from . import svm as svm_mod

DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "output_dir": "out",
    "train_corpus": None,
    "test_corpus": None,
    "corpus": None,
    "model": None,
    "candidate_min_value": 10,
    "feature_groups": list(feat_mod.ALL_GROUPS),
    "embeddings": {
        "path": None,
        "dimension": 100,
        "window": 5,
        "negatives": 5,
        "epochs": 5,
        "min_count": 1,
    },
    "clusters": {"path": None, "k": 500, "normalize": False},
    "lexicons": {"population": None, "temporal": None, "likely_labels": None},
    "grid": {
        "cost": [2.0**e for e in range(-5, 16, 2)],
        "gamma": [2.0**e for e in range(-15, 4, 2)],
    },
    "smo": {"tol": 1e-3, "max_passes": None, "cache_mb": 256.0, "positive_weight": 1.0},
    "cv_folds": 10,
}


class ConfigError(Exception):
    pass


def subseed(seed: int, label: str) -> int:
    """Deterministic per-component seed derived from the global one."""
    return (seed * 1000003 + zlib.crc32(label.encode())) % (2**32)


def _deep_merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


class RunConfig:
    def __init__(self, data: dict):
        self.data = data

    @classmethod
    def load(cls, config_path: str | None, overrides: dict) -> "RunConfig":
        data = copy.deepcopy(DEFAULTS)
        if config_path:
            with open(config_path, encoding="utf-8") as fh:
                data = _deep_merge(data, json.load(fh))
        return cls(_deep_merge(data, overrides))

    def get(self, dotted: str):
        node = self.data
        for part in dotted.split("."):
            node = node[part]
        return node

    def require_paths(self, *fields: str) -> list[str]:
        problems = []
        for dotted in fields:
            value = self.get(dotted)
            if value is None:
                problems.append(f"config field {dotted!r} is required")
            elif not Path(value).exists():
                problems.append(f"config field {dotted!r}: no such file {value!r}")
        return problems

    def echo(self, command: str) -> None:
        out_dir = Path(self.get("output_dir"))
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"config.{command}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _load_lexicons(config: RunConfig) -> feat_mod.Lexicons:
    def words(field, fallback):
        path = config.get(f"lexicons.{field}")
        if path is None:
            return fallback
        return feat_mod.load_lexicon_file(path)

    return feat_mod.Lexicons.from_words(
        words("population", feat_mod.DEFAULT_POPULATION_WORDS),
        words("temporal", feat_mod.DEFAULT_TEMPORAL_WORDS),
        words("likely_labels", feat_mod.DEFAULT_LIKELY_LABELS),
    )


def _build_clusters(config: RunConfig, corpus) -> emb_mod.ClusterModel:
    cluster_path = config.get("clusters.path")
    if cluster_path is not None:
        return emb_mod.load_clusters(cluster_path)
    emb_path = config.get("embeddings.path")
    if emb_path is not None:
        table = emb_mod.load_embeddings(emb_path)
    else:
        table = emb_mod.train_skipgram(
            _token_sentences(corpus),
            dimension=config.get("embeddings.dimension"),
            window=config.get("embeddings.window"),
            negatives=config.get("embeddings.negatives"),
            epochs=config.get("embeddings.epochs"),
            min_count=config.get("embeddings.min_count"),
            seed=subseed(config.get("seed"), "skipgram"),
        )
    return emb_mod.kmeans(
        table,
        k=config.get("clusters.k"),
        seed=subseed(config.get("seed"), "kmeans"),
        normalize=config.get("clusters.normalize"),
    )


def _token_sentences(corpus) -> list[list[str]]:
    return [
        [t.lower for t in sentence.tokens]
        for abstract in corpus
        for sentence in abstract.sentences
    ]


def _grid(config: RunConfig) -> svm_mod.GridSpec:
    return svm_mod.GridSpec(
        cost_values=tuple(config.get("grid.cost")),
        gamma_values=tuple(config.get("grid.gamma")),
    )


def _train_kwargs(config: RunConfig) -> dict:
    return {
        "min_value": config.get("candidate_min_value"),
        "tol": config.get("smo.tol"),
        "max_passes": config.get("smo.max_passes"),
        "cache_mb": config.get("smo.cache_mb"),
        "positive_weight": config.get("smo.positive_weight"),
    }


def _load_corpus_arg(config: RunConfig, field: str, plain: bool = False):
    path = Path(config.get(field))
    if not plain:
        return corpus_mod.load_corpus(path)
    if path.is_dir():
        files = sorted(path.glob("*.txt"))
    else:
        files = [path]
    return [
        corpus_mod.import_plain_text(f.read_text(encoding="utf-8"), f.stem)
        for f in files
    ]


def _write_json(obj, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def cmd_train(config: RunConfig) -> int:
    problems = config.require_paths("train_corpus")
    if problems:
        raise ConfigError("; ".join(problems))
    out_dir = Path(config.get("output_dir"))
    out_dir.mkdir(parents=True, exist_ok=True)
    config.echo("train")

    corpus = corpus_mod.load_corpus(config.get("train_corpus"))
    missing = [a.id for a in corpus if a.gold_size is None]
    if missing:
        raise ConfigError(f"train corpus abstracts without gold_size: {missing[:5]}")
    lexicons = _load_lexicons(config)
    clusters = _build_clusters(config, corpus)
    params, model, stats = svm_mod.grid_search(
        corpus,
        _grid(config),
        config.get("feature_groups"),
        clusters,
        lexicons,
        jobs=config.get("jobs"),
        **_train_kwargs(config),
    )
    svm_mod.save_model(model, out_dir / "model.json")
    report = {
        "n_abstracts": len(corpus),
        "n_candidates": stats["n_candidates"],
        "chosen": {"cost": params.cost, "gamma": params.gamma},
        "train_accuracy": stats["train_accuracy"],
        "n_support_vectors": int(model.support_vectors.shape[0]),
        "cells": stats["cells"],
    }
    _write_json(report, out_dir / "train_report.json")
    print(f"model written to {out_dir / 'model.json'}")
    print(
        f"candidates={stats['n_candidates']} cost={params.cost} "
        f"gamma={params.gamma} train_accuracy={stats['train_accuracy']:.3f}"
    )
    return 0


def cmd_predict(config: RunConfig, plain: bool = False) -> int:
    problems = config.require_paths("model", "corpus")
    if problems:
        raise ConfigError("; ".join(problems))
    out_dir = Path(config.get("output_dir"))
    out_dir.mkdir(parents=True, exist_ok=True)
    config.echo("predict")

    model = svm_mod.load_model(config.get("model"))
    corpus = _load_corpus_arg(config, "corpus", plain)
    jobs = config.get("jobs")
    if jobs and jobs > 1:
        from joblib import Parallel, delayed

        predictions = Parallel(n_jobs=jobs)(
            delayed(pipe_mod.predict_size)(model, a) for a in corpus
        )
    else:
        predictions = [pipe_mod.predict_size(model, a) for a in corpus]
    out_path = out_dir / "predictions.jsonl"
    with open(out_path, "w", encoding="utf-8") as fh:
        for p in predictions:
            fh.write(json.dumps(pipe_mod.prediction_to_record(p), sort_keys=True))
            fh.write("\n")
    print(f"predictions written to {out_path}")
    return 0


def cmd_evaluate(config: RunConfig) -> int:
    problems = config.require_paths("model", "corpus")
    if problems:
        raise ConfigError("; ".join(problems))
    out_dir = Path(config.get("output_dir"))
    out_dir.mkdir(parents=True, exist_ok=True)
    config.echo("evaluate")

    model = svm_mod.load_model(config.get("model"))
    corpus = corpus_mod.load_corpus(config.get("corpus"))
    report = pipe_mod.evaluate(model, corpus)
    _write_json(report.to_json(), out_dir / "evaluation.json")
    print(pipe_mod.format_report_row("all", report))
    return 0


def cmd_ablate(config: RunConfig) -> int:
    problems = config.require_paths("train_corpus", "test_corpus")
    if problems:
        raise ConfigError("; ".join(problems))
    out_dir = Path(config.get("output_dir"))
    out_dir.mkdir(parents=True, exist_ok=True)
    config.echo("ablate")

    train = corpus_mod.load_corpus(config.get("train_corpus"))
    test = corpus_mod.load_corpus(config.get("test_corpus"))
    lexicons = _load_lexicons(config)
    clusters = _build_clusters(config, train)
    rows = pipe_mod.ablate(
        train, test, _grid(config), clusters, lexicons,
        jobs=config.get("jobs"), **_train_kwargs(config),
    )
    payload = [
        {
            "name": r.name,
            "feature_groups": list(r.selection),
            "report": r.report.to_json() if r.report else None,
            "error": r.error,
        }
        for r in rows
    ]
    _write_json(payload, out_dir / "ablation.json")
    table = pipe_mod.format_ablation_table(rows)
    (out_dir / "ablation.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return 0


def cmd_cv(config: RunConfig) -> int:
    problems = config.require_paths("corpus")
    if problems:
        raise ConfigError("; ".join(problems))
    out_dir = Path(config.get("output_dir"))
    out_dir.mkdir(parents=True, exist_ok=True)
    config.echo("cv")

    corpus = corpus_mod.load_corpus(config.get("corpus"))
    lexicons = _load_lexicons(config)
    clusters = _build_clusters(config, corpus)
    mean_acc, reports = pipe_mod.cross_validate(
        corpus,
        config.get("cv_folds"),
        _grid(config),
        clusters,
        lexicons,
        seed=subseed(config.get("seed"), "cv-folds"),
        selection=config.get("feature_groups"),
        jobs=config.get("jobs"),
        **_train_kwargs(config),
    )
    payload = {
        "mean_accuracy": mean_acc,
        "folds": [r.to_json() for r in reports],
    }
    _write_json(payload, out_dir / "cv.json")
    print(f"mean accuracy over {config.get('cv_folds')} folds: {mean_acc:.3f}")
    return 0


def cmd_cluster(config: RunConfig) -> int:
    problems = config.require_paths("embeddings.path")
    if problems:
        raise ConfigError("; ".join(problems))
    out_dir = Path(config.get("output_dir"))
    out_dir.mkdir(parents=True, exist_ok=True)
    config.echo("cluster")

    table = emb_mod.load_embeddings(config.get("embeddings.path"))
    model = emb_mod.kmeans(
        table,
        k=config.get("clusters.k"),
        seed=subseed(config.get("seed"), "kmeans"),
        normalize=config.get("clusters.normalize"),
    )
    emb_mod.save_clusters(model, out_dir / "clusters.json")
    print(f"clusters written to {out_dir / 'clusters.json'}")
    return 0


def cmd_extract(config: RunConfig, plain: bool = False, dump_features: bool = False) -> int:
    problems = config.require_paths("corpus")
    if problems:
        raise ConfigError("; ".join(problems))
    out_dir = Path(config.get("output_dir"))
    out_dir.mkdir(parents=True, exist_ok=True)
    config.echo("extract")

    corpus = _load_corpus_arg(config, "corpus", plain)
    min_value = config.get("candidate_min_value")
    extractor = None
    if dump_features:
        model_path = config.get("model")
        if model_path:
            model = svm_mod.load_model(model_path)
            clusters, lexicons = model.clusters, model.lexicons
            selection = model.selection
        else:
            clusters = emb_mod.ClusterModel(
                k=1, centroids=np.zeros((1, 1)), assignment={}
            )
            lexicons = feat_mod.Lexicons.default()
            selection = feat_mod.ALL_GROUPS
        extractor = feat_mod.feature_groups(selection)

    out_path = out_dir / "candidates.jsonl"
    with open(out_path, "w", encoding="utf-8") as fh:
        for abstract in corpus:
            for c in cand_mod.extract_candidates(abstract, min_value):
                record = cand_mod.candidate_to_record(c)
                if extractor is not None:
                    record["features"] = {
                        f.name: f.value
                        for f in extractor(c, abstract, clusters, lexicons)
                    }
                fh.write(json.dumps(record, sort_keys=True))
                fh.write("\n")
    print(f"candidates written to {out_path}")
    return 0


def cmd_embed_train(config: RunConfig) -> int:
    problems = config.require_paths("corpus")
    if problems:
        raise ConfigError("; ".join(problems))
    out_dir = Path(config.get("output_dir"))
    out_dir.mkdir(parents=True, exist_ok=True)
    config.echo("embed-train")

    corpus = corpus_mod.load_corpus(config.get("corpus"))
    table = emb_mod.train_skipgram(
        _token_sentences(corpus),
        dimension=config.get("embeddings.dimension"),
        window=config.get("embeddings.window"),
        negatives=config.get("embeddings.negatives"),
        epochs=config.get("embeddings.epochs"),
        min_count=config.get("embeddings.min_count"),
        seed=subseed(config.get("seed"), "skipgram"),
    )
    emb_mod.save_embeddings(table, out_dir / "embeddings.txt")
    print(f"embeddings written to {out_dir / 'embeddings.txt'}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="global seed")
    parser.add_argument("--jobs", type=int, help="worker cap for parallel stages")
    parser.add_argument("--out-dir", dest="output_dir", help="output directory")
    parser.add_argument("--min-value", type=int, dest="candidate_min_value",
                        help="candidate threshold (default 10)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trialsize",
        description="Extract enrolled-subject counts from RCT abstracts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="grid-search and train a model")
    _add_common(p)
    p.add_argument("--train-corpus", dest="train_corpus")
    p.add_argument("--feature-groups", help="comma list: contextual,lexical,structural")
    p.add_argument("--grid-cost", help="comma list of C values")
    p.add_argument("--grid-gamma", help="comma list of gamma values")
    p.add_argument("--embeddings", dest="embeddings_path", help="embedding file")
    p.add_argument("--clusters", dest="clusters_path", help="cluster model file")
    p.add_argument("--k", type=int, dest="cluster_k", help="number of clusters")

    p = sub.add_parser("predict", help="decode sizes with a trained model")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--corpus")
    p.add_argument("--plain", action="store_true",
                   help="corpus is plain text with HEADING: lines")

    p = sub.add_parser("evaluate", help="score a model against gold sizes")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--corpus")

    p = sub.add_parser("ablate", help="single-family and leave-out rows")
    _add_common(p)
    p.add_argument("--train-corpus", dest="train_corpus")
    p.add_argument("--test-corpus", dest="test_corpus")
    p.add_argument("--grid-cost")
    p.add_argument("--grid-gamma")
    p.add_argument("--embeddings", dest="embeddings_path")
    p.add_argument("--clusters", dest="clusters_path")
    p.add_argument("--k", type=int, dest="cluster_k")

    p = sub.add_parser("cv", help="abstract-level k-fold cross-validation")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--folds", type=int, dest="cv_folds")
    p.add_argument("--grid-cost")
    p.add_argument("--grid-gamma")
    p.add_argument("--embeddings", dest="embeddings_path")
    p.add_argument("--clusters", dest="clusters_path")
    p.add_argument("--k", type=int, dest="cluster_k")

    p = sub.add_parser("cluster", help="k-means over an embedding file")
    _add_common(p)
    p.add_argument("--embeddings", dest="embeddings_path")
    p.add_argument("--k", type=int, dest="cluster_k")
    p.add_argument("--normalize", action="store_true",
                   help="length-normalize vectors before clustering")

    p = sub.add_parser("extract", help="emit rule-stage candidates as JSON lines")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--model", help="model supplying lexicons/clusters for --dump-features")
    p.add_argument("--plain", action="store_true")
    p.add_argument("--dump-features", action="store_true")

    p = sub.add_parser("embed-train", help="train skip-gram embeddings")
    _add_common(p)
    p.add_argument("--corpus")
    p.add_argument("--dimension", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--negatives", type=int)
    p.add_argument("--epochs", type=int)

    return parser


def _overrides_from_args(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    direct = (
        "seed", "jobs", "output_dir", "candidate_min_value", "train_corpus",
        "test_corpus", "corpus", "model", "cv_folds",
    )
    for name in direct:
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "feature_groups", None):
        overrides["feature_groups"] = [
            g.strip() for g in args.feature_groups.split(",") if g.strip()
        ]
    grid = {}
    if getattr(args, "grid_cost", None):
        grid["cost"] = [float(v) for v in args.grid_cost.split(",")]
    if getattr(args, "grid_gamma", None):
        grid["gamma"] = [float(v) for v in args.grid_gamma.split(",")]
    if grid:
        overrides["grid"] = grid
    embeddings = {}
    if getattr(args, "embeddings_path", None):
        embeddings["path"] = args.embeddings_path
    for name in ("dimension", "window", "negatives", "epochs"):
        value = getattr(args, name, None)
        if value is not None:
            embeddings[name] = value
    if embeddings:
        overrides["embeddings"] = embeddings
    clusters = {}
    if getattr(args, "clusters_path", None):
        clusters["path"] = args.clusters_path
    if getattr(args, "cluster_k", None) is not None:
        clusters["k"] = args.cluster_k
    if getattr(args, "normalize", False):
        clusters["normalize"] = True
    if clusters:
        overrides["clusters"] = clusters
    return overrides


_COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "cv": cmd_cv,
    "cluster": cmd_cluster,
    "embed-train": cmd_embed_train,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig.load(args.config, _overrides_from_args(args))
        if args.command == "predict":
            return cmd_predict(config, plain=args.plain)
        if args.command == "extract":
            return cmd_extract(config, plain=args.plain,
                               dump_features=args.dump_features)
        return _COMMANDS[args.command](config)
    except (
        ConfigError,
        corpus_mod.CorpusError,
        emb_mod.EmbeddingError,
        svm_mod.SvmError,
        svm_mod.ModelError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
