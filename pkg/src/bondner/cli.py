"""Command line pipeline: label -> train -> selftrain -> eval.

One JSON config document drives every subcommand; bundled presets can
fill in hyperparameters.  All outputs are deterministic for a fixed
config and seed.  Wall-clock information is confined to the pipeline's
run manifest so repeated runs diff clean everywhere else.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import __version__
from .corpus import DISTANT, GOLD, PRED, Corpus, LabelSchema, read_conll, write_conll_file
from .distant import (
    Gazetteer,
    MatchReport,
    StampRule,
    generate_distant_labels_with_stats,
    load_gazetteer,
    load_stamp_rules,
    match_report,
)
from .errors import BondError, ConfigError, NumericalError
from .evaluation import evaluate_corpus, metrics_to_json, token_confusion
from .optim import LrSchedule
from .stage1 import Stage1Config, predict_corpus, stage1_log_csv, train_stage1
from .stage2 import Stage2Config, stage2_log_csv, train_stage2
from .tagger import (
    FeatureConfig,
    FeatureMatrix,
    featurize,
    featurize_corpus,
    init_params,
    load_params,
    save_params,
)

PRESETS = ("conll03", "ontonotes5", "synthetic", "tweet", "webpage", "wikigold")

_TOP_KEYS = {"seed", "entity_types", "paths", "features", "optimizer", "stage1", "stage2", "notes"}
_PATH_KEYS = {"train", "dev", "test", "labeled", "gazetteers", "stamp_rules", "out"}
_FEATURE_KEYS = {"window", "dim", "hash_seed"}
_OPTIMIZER_KEYS = {"beta1", "beta2", "eps", "weight_decay"}
_STAGE1_KEYS = {"t1", "batch_size", "lr", "lr_decay", "eval_every"}
_STAGE2_KEYS = {
    "t2", "t3", "batch_size", "lr", "lr_decay", "epsilon",
    "mode", "reinit", "stall_patience", "per_minibatch_labels",
}


def max_workers() -> int:
    """Worker cap from BOND_THREADS; parallelism never changes results."""
    raw = os.environ.get("BOND_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"BOND_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"BOND_THREADS must be positive, got {n}")
    return n


def featurize_parallel(corpus: Corpus, config: FeatureConfig) -> FeatureMatrix:
    """featurize_corpus, fanned out over sentences when BOND_THREADS > 1.

    Sentences are independent and the map preserves order, so the
    result is identical to the serial path.
    """
    workers = max_workers()
    if workers == 1 or corpus.num_sentences < 2 * workers:
        return featurize_corpus(corpus, config)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        per_sentence = list(pool.map(lambda s: featurize(s, config), corpus.sentences))
    return FeatureMatrix.from_vectors(per_sentence, config.dim)


@dataclass(frozen=True)
class PipelineConfig:
    """A fully resolved run: schema, hyperparameters, and file locations."""

    seed: int
    schema: LabelSchema
    features: FeatureConfig
    stage1: Stage1Config
    stage2: Stage2Config
    train_path: Path | None
    dev_path: Path | None
    test_path: Path | None
    labeled_path: Path | None
    gazetteer_dir: Path | None
    stamp_rules_path: Path | None
    out_dir: Path
    digest: str


def _check_keys(section: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown {where} key(s): {', '.join(unknown)}")


def _merge(base: Mapping[str, Any], override: Mapping[str, Any]) -> dict[str, Any]:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_preset(name: str) -> dict[str, Any]:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    text = resources.files("bondner").joinpath("presets", f"{name}.json").read_text("utf-8")
    return json.loads(text)


def _resolve_path(paths: Mapping[str, Any], key: str, base: Path) -> Path | None:
    value = paths.get(key)
    if value is None:
        return None
    path = Path(value)
    if not path.is_absolute():
        path = base / path
    if key != "out" and not path.exists():
        raise ConfigError(f"paths.{key} does not exist: {path}")
    return path


def load_config(
    config_path: str | Path,
    preset: str | None = None,
    seed_override: int | None = None,
    out_override: str | None = None,
) -> PipelineConfig:
    """Merge preset defaults under the user config and validate everything.

    Relative paths are resolved against the config file's directory.
    Every referenced path must exist up front; the seed is mandatory.
    """
    config_path = Path(config_path)
    if not config_path.exists():
        raise ConfigError(f"config file does not exist: {config_path}")
    merged: dict[str, Any] = json.loads(config_path.read_text("utf-8"))
    if not isinstance(merged, dict):
        raise ConfigError("config must be a JSON object")
    if preset is not None:
        merged = _merge(load_preset(preset), merged)
    if seed_override is not None:
        merged["seed"] = seed_override
    if out_override is not None:
        merged.setdefault("paths", {})
        merged = _merge(merged, {"paths": {"out": out_override}})

    _check_keys(merged, _TOP_KEYS, "config")
    paths = merged.get("paths", {})
    features = merged.get("features", {})
    optimizer = merged.get("optimizer", {})
    stage1 = merged.get("stage1", {})
    stage2 = merged.get("stage2", {})
    _check_keys(paths, _PATH_KEYS, "paths")
    _check_keys(features, _FEATURE_KEYS, "features")
    _check_keys(optimizer, _OPTIMIZER_KEYS, "optimizer")
    _check_keys(stage1, _STAGE1_KEYS, "stage1")
    _check_keys(stage2, _STAGE2_KEYS, "stage2")

    if "seed" not in merged:
        raise ConfigError("seed is required (pass it in the config or with --seed)")
    seed = merged["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    types = merged.get("entity_types")
    if not types or not isinstance(types, list):
        raise ConfigError("entity_types must be a non-empty list")
    if "out" not in paths:
        raise ConfigError("paths.out is required (or pass --out)")

    base = config_path.parent
    digest = hashlib.sha256(
        json.dumps(merged, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()
    feature_config = FeatureConfig(
        window=features.get("window", 1),
        dim=features.get("dim", 2**15),
        hash_seed=features.get("hash_seed", 0),
    )
    stage1_config = Stage1Config(
        t1=stage1.get("t1", 400),
        batch_size=stage1.get("batch_size", 16),
        seed=seed,
        lr=LrSchedule(stage1.get("lr", 0.05), stage1.get("lr_decay", 0.0)),
        weight_decay=optimizer.get("weight_decay", 0.0),
        eval_every=stage1.get("eval_every", 50),
        beta1=optimizer.get("beta1", 0.9),
        beta2=optimizer.get("beta2", 0.98),
        adam_eps=optimizer.get("eps", 1e-8),
    )
    raw_t3 = stage2.get("t3", 40)
    stage2_config = Stage2Config(
        t2=stage2.get("t2", 8),
        t3=tuple(raw_t3) if isinstance(raw_t3, list) else raw_t3,
        epsilon=stage2.get("epsilon", 0.9),
        mode=stage2.get("mode", "soft_high_conf"),
        reinit=stage2.get("reinit", "off"),
        stall_patience=stage2.get("stall_patience", 2),
        batch_size=stage2.get("batch_size", 16),
        seed=seed,
        lr=LrSchedule(stage2.get("lr", 0.015), stage2.get("lr_decay", 0.0)),
        weight_decay=optimizer.get("weight_decay", 0.0),
        per_minibatch_labels=stage2.get("per_minibatch_labels", False),
        beta1=optimizer.get("beta1", 0.9),
        beta2=optimizer.get("beta2", 0.98),
        adam_eps=optimizer.get("eps", 1e-8),
    )
    return PipelineConfig(
        seed=seed,
        schema=LabelSchema(tuple(types)),
        features=feature_config,
        stage1=stage1_config,
        stage2=stage2_config,
        train_path=_resolve_path(paths, "train", base),
        dev_path=_resolve_path(paths, "dev", base),
        test_path=_resolve_path(paths, "test", base),
        labeled_path=_resolve_path(paths, "labeled", base),
        gazetteer_dir=_resolve_path(paths, "gazetteers", base),
        stamp_rules_path=_resolve_path(paths, "stamp_rules", base),
        out_dir=_resolve_path(paths, "out", base),
        digest=digest,
    )


def _load_knowledge(config: PipelineConfig) -> tuple[list[Gazetteer], tuple[StampRule, ...]]:
    if config.gazetteer_dir is None:
        raise ConfigError("paths.gazetteers is required for labeling")
    if not config.gazetteer_dir.is_dir():
        raise ConfigError(f"gazetteer path is not a directory: {config.gazetteer_dir}")
    gazetteers = []
    for path in sorted(config.gazetteer_dir.glob("*.txt")):
        etype = path.stem
        if etype not in config.schema.entity_types:
            raise ConfigError(
                f"gazetteer file {path.name} does not match any entity type "
                f"in {list(config.schema.entity_types)}"
            )
        gazetteers.append(load_gazetteer(path, etype))
    if not gazetteers:
        raise ConfigError(f"no *.txt gazetteer files in {config.gazetteer_dir}")
    rules = ()
    if config.stamp_rules_path is not None:
        rules = load_stamp_rules(config.stamp_rules_path)
    return gazetteers, rules


def _require(path: Path | None, key: str, command: str) -> Path:
    if path is None:
        raise ConfigError(f"paths.{key} is required for {command}")
    return path


def _labeled_path(config: PipelineConfig) -> Path:
    return config.labeled_path or config.out_dir / "distant.conll"


def _read_labeled(config: PipelineConfig) -> Corpus:
    path = _labeled_path(config)
    if not path.exists():
        raise ConfigError(f"labeled corpus not found (run `label` first?): {path}")
    corpus = read_conll(path, config.schema, layer=DISTANT)
    if not corpus.has_layer(DISTANT):
        raise ConfigError(f"labeled corpus {path} has no tag column")
    return corpus


def _read_dev(config: PipelineConfig) -> Corpus | None:
    if config.dev_path is None:
        return None
    dev = read_conll(config.dev_path, config.schema)
    return dev if dev.has_layer(GOLD) else None


def _report_json(report: MatchReport) -> str:
    doc = {
        "token": {
            "precision": round(report.token_precision, 6),
            "recall": round(report.token_recall, 6),
            "f1": round(report.token_f1, 6),
        },
        "entity": json.loads(metrics_to_json(report.entity)),
        "per_type_spans": {
            etype: {"matched": c.matched, "ambiguous": c.ambiguous, "unmatched": c.unmatched}
            for etype, c in sorted(report.per_type.items())
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _confusion_csv(corpus: Corpus, pred_layer: str) -> str:
    table = token_confusion(corpus.layer(GOLD), corpus.layer(pred_layer), corpus.schema)
    lines = ["gold," + ",".join(table.labels)]
    for label, row in zip(table.labels, table.counts):
        lines.append(label + "," + ",".join(str(int(n)) for n in row))
    return "\n".join(lines) + "\n"


def cmd_label(config: PipelineConfig, args: argparse.Namespace) -> int:
    """Attach the distant layer to the training corpus and write it out."""
    train_path = _require(config.train_path, "train", "label")
    gazetteers, rules = _load_knowledge(config)
    corpus = read_conll(train_path, config.schema)
    labeled, stats = generate_distant_labels_with_stats(corpus, gazetteers, rules)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    out = config.out_dir / "distant.conll"
    write_conll_file(labeled, out, layer=DISTANT)
    print(f"wrote {out}")
    if labeled.has_layer(GOLD):
        report = match_report(labeled, stats)
        report_path = config.out_dir / "match_report.json"
        report_path.write_text(_report_json(report), encoding="utf-8")
        print(f"wrote {report_path}")
        print(f"distant vs gold: {report.entity.summary()}")
    return 0


def cmd_train(config: PipelineConfig, args: argparse.Namespace) -> int:
    """Fixed-budget first-stage training on the distant layer."""
    corpus = _read_labeled(config)
    dev = _read_dev(config)
    fm = featurize_parallel(corpus, config.features)
    dev_fm = featurize_parallel(dev, config.features) if dev is not None else None
    model = init_params(config.features.dim, config.schema.num_labels, config.seed)
    params, log = train_stage1(
        corpus, model, config.stage1, config.features,
        dev_corpus=dev, features=fm, dev_features=dev_fm,
    )
    config.out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = config.out_dir / "stage1.ckpt"
    save_params(params, config.features, ckpt)
    log_path = config.out_dir / "stage1_log.csv"
    log_path.write_text(stage1_log_csv(log), encoding="utf-8")
    print(f"wrote {ckpt}")
    print(f"wrote {log_path}")
    return 0


def cmd_selftrain(config: PipelineConfig, args: argparse.Namespace) -> int:
    """Teacher-student self-training from a first-stage checkpoint."""
    corpus = _read_labeled(config)
    dev = _read_dev(config)
    named = getattr(args, "checkpoint", None)
    ckpt_in = Path(named) if named else config.out_dir / "stage1.ckpt"
    if not ckpt_in.exists():
        raise ConfigError(f"checkpoint not found (run `train` first?): {ckpt_in}")
    theta = load_params(ckpt_in, config.features)
    fm = featurize_parallel(corpus, config.features)
    dev_fm = featurize_parallel(dev, config.features) if dev is not None else None
    params, log = train_stage2(
        corpus, theta, config.stage2, config.features,
        dev_corpus=dev, features=fm, dev_features=dev_fm,
    )
    config.out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_out = config.out_dir / "bond.ckpt"
    save_params(params, config.features, ckpt_out)
    log_path = config.out_dir / "stage2_log.csv"
    log_path.write_text(stage2_log_csv(log), encoding="utf-8")
    print(f"wrote {ckpt_out}")
    print(f"wrote {log_path}")
    return 0


def cmd_eval(config: PipelineConfig, args: argparse.Namespace) -> int:
    """Entity-level scores for a checkpoint on one gold-labeled split."""
    split = args.split
    path = _require(getattr(config, f"{split}_path"), split, "eval")
    corpus = read_conll(path, config.schema)
    if not corpus.has_layer(GOLD):
        raise ConfigError(f"eval needs gold labels, but {path} has no tag column")
    named = getattr(args, "checkpoint", None)
    ckpt = Path(named) if named else config.out_dir / "bond.ckpt"
    if not ckpt.exists():
        raise ConfigError(f"checkpoint not found: {ckpt}")
    params = load_params(ckpt, config.features)
    fm = featurize_parallel(corpus, config.features)
    annotated = predict_corpus(params, corpus, fm)
    metrics = evaluate_corpus(annotated, PRED)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = config.out_dir / "metrics.json"
    metrics_path.write_text(metrics_to_json(metrics), encoding="utf-8")
    confusion_path = config.out_dir / "confusion.csv"
    confusion_path.write_text(_confusion_csv(annotated, PRED), encoding="utf-8")
    print(metrics.summary())
    return 0


def cmd_pipeline(config: PipelineConfig, args: argparse.Namespace) -> int:
    """label -> train -> selftrain, then a three-row test-set summary."""
    test_path = _require(config.test_path, "test", "pipeline")
    for phase in (cmd_label, cmd_train, cmd_selftrain):
        code = phase(config, args)
        if code != 0:
            return code

    test = read_conll(test_path, config.schema)
    if not test.has_layer(GOLD):
        raise ConfigError(f"pipeline needs gold test labels, but {test_path} has no tag column")
    gazetteers, rules = _load_knowledge(config)
    test_distant, _ = generate_distant_labels_with_stats(test, gazetteers, rules)
    fm = featurize_parallel(test, config.features)

    rows = [("KB Matching", evaluate_corpus(test_distant, DISTANT))]
    annotated = test
    for name, filename in (("Stage I", "stage1.ckpt"), ("BOND", "bond.ckpt")):
        params = load_params(config.out_dir / filename, config.features)
        annotated = predict_corpus(params, test, fm)
        rows.append((name, evaluate_corpus(annotated, PRED)))

    bond_metrics = rows[-1][1]
    (config.out_dir / "metrics.json").write_text(metrics_to_json(bond_metrics), encoding="utf-8")
    (config.out_dir / "confusion.csv").write_text(_confusion_csv(annotated, PRED), encoding="utf-8")

    lines = ["F1 (Precision/Recall) on the test set"]
    lines += [f"{name:<12} {metrics.summary()}" for name, metrics in rows]
    summary = "\n".join(lines) + "\n"
    (config.out_dir / "summary.txt").write_text(summary, encoding="utf-8")
    print(summary, end="")

    manifest = {
        "config_digest": config.digest,
        "seed": config.seed,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "versions": {
            "bondner": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
    }
    (config.out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return 0


COMMANDS = {
    "label": cmd_label,
    "train": cmd_train,
    "selftrain": cmd_selftrain,
    "eval": cmd_eval,
    "pipeline": cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bondner",
        description="Distantly supervised NER: gazetteer labeling plus two-stage self-training.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON config file")
    common.add_argument("--preset", default=None, help=f"one of: {', '.join(PRESETS)}")
    common.add_argument("--out", default=None, help="output directory (overrides paths.out)")
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("label", parents=[common], help="attach distant labels from gazetteers")
    sub.add_parser("train", parents=[common], help="first-stage training on distant labels")
    p = sub.add_parser("selftrain", parents=[common], help="teacher-student self-training")
    p.add_argument("--checkpoint", default=None, help="input checkpoint (default: OUT/stage1.ckpt)")
    p = sub.add_parser("eval", parents=[common], help="score a checkpoint on a gold split")
    p.add_argument("--checkpoint", default=None, help="checkpoint to score (default: OUT/bond.ckpt)")
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")
    sub.add_parser("pipeline", parents=[common], help="run all phases and summarize")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, args.preset, args.seed, args.out)
        return COMMANDS[args.command](config, args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (BondError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
