"""Command-line surface: train, eval, predict, inspect, sweep, gen-toy.

Exit codes: 0 success, 2 for configuration/dataset/vocabulary problems,
3 when training aborts on non-finite numbers.  TRANSGCN_LOG={error|info|
debug} sets verbosity (default info); logs go to stderr, results to stdout.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import _FLOAT_FIELDS, _INT_FIELDS, load_checkpoint, save_checkpoint
from .encoder import encode_arrays, materialize_relations
from .errors import (
    CheckpointError,
    ConfigError,
    NumericError,
    ParseError,
    ShapeError,
)
from .evaluator import (
    candidate_scores,
    degree_bucket_report,
    evaluate,
    layer_sweep,
)
from .kg import SPLIT_FILES, Triple, build_index, known_triple_set, load_dataset, write_dataset
from .kinship import generate_kinship
from .trainer import TrainConfig, TrainingAborted, param_count_report, train

logger = logging.getLogger("transgcn.cli")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

CONFIG_FIELDS = {f.name for f in dataclasses.fields(TrainConfig)}


def configure_logging() -> None:
    """Console verbosity follows TRANSGCN_LOG; file handlers see everything."""
    raw = os.environ.get("TRANSGCN_LOG", "info").lower()
    if raw not in _LOG_LEVELS:
        raise ConfigError(
            f"TRANSGCN_LOG must be one of {sorted(_LOG_LEVELS)}, got {raw!r}"
        )
    root = logging.getLogger("transgcn")
    root.setLevel(logging.DEBUG)
    console = next(
        (h for h in root.handlers if getattr(h, "_transgcn_console", False)), None
    )
    if console is None:
        console = logging.StreamHandler(sys.stderr)
        console.setFormatter(logging.Formatter("%(message)s"))
        console._transgcn_console = True
        root.addHandler(console)
    console.setLevel(_LOG_LEVELS[raw])


def read_config_file(path) -> dict[str, str]:
    """Flat `key = value` lines; `#` starts a comment."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from err
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key = key.strip()
        if key not in CONFIG_FIELDS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value.strip()
    return values


def _coerce(key: str, value: str):
    try:
        if key in _INT_FIELDS:
            return int(value)
        if key in _FLOAT_FIELDS:
            return float(value)
    except ValueError as err:
        raise ConfigError(f"config key {key!r} has a bad value {value!r}") from err
    return value


def resolve_config(args) -> TrainConfig:
    """Defaults, overlaid by the config file, overlaid by explicit flags."""
    values: dict = {}
    if getattr(args, "config", None):
        for key, raw in read_config_file(args.config).items():
            values[key] = _coerce(key, raw)
    for key in CONFIG_FIELDS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return TrainConfig(**values)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--assumption", choices=["translation", "rotation"])
    p.add_argument("--layers", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--negatives", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--norm", choices=["l1", "l2"])
    p.add_argument("--sampling", choices=["vanilla", "selfadv"])
    p.add_argument("--pretrain-epochs", type=int, dest="pretrain_epochs")
    p.add_argument("--eval-every", type=int, dest="eval_every")
    p.add_argument("--clip", type=float)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _plain(value):
    return value.value if hasattr(value, "value") else value


def _write_manifest(out: Path, data_dir: Path, config: TrainConfig) -> Path:
    manifest = {
        "tool_version": __version__,
        "config": {
            f.name: _plain(getattr(config, f.name))
            for f in dataclasses.fields(TrainConfig)
        },
        "seed": config.seed,
        "dataset": {
            "directory": str(data_dir),
            "sha256": {name: _sha256(data_dir / name) for name in SPLIT_FILES},
        },
        "artifacts": {
            "checkpoint": str(out / "model.ckpt"),
            "log": str(out / "train.log"),
            "manifest": str(out / "manifest.json"),
        },
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def cmd_train(args) -> int:
    data_dir = Path(args.data)
    kg = load_dataset(data_dir)
    config = resolve_config(args)
    init_state = None
    if args.init_from:
        prior = load_checkpoint(args.init_from)
        if (prior.entity_names != kg.entity_names
                or prior.relation_names != kg.relation_names):
            raise ConfigError(
                "warm-start checkpoint vocabulary does not match the dataset"
            )
        init_state = prior.state
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, data_dir, config)
    log_handler = logging.FileHandler(out / "train.log", mode="w", encoding="utf-8")
    log_handler.setFormatter(logging.Formatter("%(message)s"))
    log_handler.setLevel(logging.INFO)
    trainer_logger = logging.getLogger("transgcn.trainer")
    trainer_logger.addHandler(log_handler)
    try:
        checkpoint = train(kg, config, init_state=init_state)
    except TrainingAborted as err:
        save_checkpoint(err.checkpoint, out / "model.ckpt")
        print(f"error: {err} (last-good checkpoint saved)", file=sys.stderr)
        return 3
    finally:
        trainer_logger.removeHandler(log_handler)
        log_handler.close()
    save_checkpoint(checkpoint, out / "model.ckpt")
    best = checkpoint.best_valid_mrr
    shown = "n/a" if np.isnan(best) else f"{best:.6f}"
    print(f"checkpoint\t{out / 'model.ckpt'}")
    print(f"best_valid_mrr\t{shown}")
    print(f"best_epoch\t{checkpoint.epoch}")
    return 0


def _load_matching(args):
    checkpoint = load_checkpoint(args.checkpoint)
    kg = load_dataset(args.data)
    if kg.entity_names != checkpoint.entity_names:
        raise ConfigError(
            f"vocabulary mismatch: dataset has {kg.num_entities} entities, "
            f"checkpoint has {len(checkpoint.entity_names)} (or ordering differs)"
        )
    if kg.relation_names != checkpoint.relation_names:
        raise ConfigError(
            f"vocabulary mismatch: dataset has {kg.num_relations} relations, "
            f"checkpoint has {len(checkpoint.relation_names)} (or ordering differs)"
        )
    return checkpoint, kg


def cmd_eval(args) -> int:
    checkpoint, kg = _load_matching(args)
    config = checkpoint.config
    index = build_index(kg)
    entities, relations = encode_arrays(checkpoint.state, index)
    report = evaluate(
        kg,
        args.split,
        entities,
        relations,
        config.assumption,
        config.norm,
        threads=args.threads,
    )
    payload = report.to_dict()
    print(f"split\t{args.split}")
    print(f"mrr\t{report.mrr:.6f}")
    print(f"hits@1\t{report.hits1:.6f}")
    print(f"hits@3\t{report.hits3:.6f}")
    print(f"hits@10\t{report.hits10:.6f}")
    if args.buckets:
        rows = degree_bucket_report(report, index)
        payload["buckets"] = rows
        print("degree\tqueries\tmrr")
        for row in rows:
            print(f"[{row['min_degree']},{row['max_degree']})\t"
                  f"{row['queries']}\t{row['mrr']:.6f}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_predict(args) -> int:
    checkpoint, kg = _load_matching(args)
    config = checkpoint.config
    head, relation, tail = args.query
    holes = [x == "?" for x in (head, relation, tail)]
    if holes[1] or sum(holes) != 1:
        raise ConfigError("query must be exactly `h r ?` or `? r t`")
    if relation not in kg.relation_names:
        raise ConfigError(f"unknown relation name {relation!r}")
    rel_id = kg.relation_names.index(relation)
    entity_ids = {name: i for i, name in enumerate(kg.entity_names)}
    side = "tail" if holes[2] else "head"
    fixed = head if side == "tail" else tail
    if fixed not in entity_ids:
        raise ConfigError(f"unknown entity name {fixed!r}")
    fixed_id = entity_ids[fixed]
    triple = (
        Triple(fixed_id, rel_id, 0) if side == "tail" else Triple(0, rel_id, fixed_id)
    )
    index = build_index(kg)
    entities, relations = encode_arrays(checkpoint.state, index)
    scores = candidate_scores(
        entities, relations, triple, side, config.assumption, config.norm
    )
    known = known_triple_set(kg)

    def is_known(candidate: int) -> bool:
        if side == "tail":
            return (fixed_id, rel_id, candidate) in known
        return (candidate, rel_id, fixed_id) in known

    order = np.argsort(-scores, kind="stable")
    printed = 0
    rank = 0
    for candidate in order:
        candidate = int(candidate)
        flagged = is_known(candidate)
        if flagged and not args.keep_known:
            continue
        rank += 1
        if printed < args.k:
            row = f"{kg.entity_names[candidate]}\t{scores[candidate]:.6f}\t{rank}"
            if args.keep_known and flagged:
                row += "\tknown"
            print(row)
            printed += 1
        else:
            break
    return 0


def cmd_inspect(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    config = checkpoint.config
    for field in dataclasses.fields(TrainConfig):
        value = getattr(config, field.name)
        if hasattr(value, "value"):
            value = value.value
        print(f"config.{field.name}\t{value}")
    print(f"entities\t{len(checkpoint.entity_names)}")
    print(f"relations\t{len(checkpoint.relation_names)}")
    print(f"epoch\t{checkpoint.epoch}")
    best = checkpoint.best_valid_mrr
    print(f"best_valid_mrr\t{'n/a' if np.isnan(best) else f'{best:.6f}'}")
    report = param_count_report(
        config,
        len(checkpoint.entity_names),
        len(checkpoint.relation_names),
        rgcn_basis_B=args.basis,
    )
    for key, value in report.items():
        print(f"params.{key}\t{value}")
    if config.assumption.value == "rotation":
        rows = materialize_relations(checkpoint.state).values
        half = rows.shape[1] // 2
        modulus = np.hypot(rows[:, :half], rows[:, half:])
        print(f"rotation_modulus_max_deviation\t{np.max(np.abs(modulus - 1.0)):.3e}")
    return 0


def cmd_sweep(args) -> int:
    kg = load_dataset(args.data)
    config = resolve_config(args)
    try:
        counts = [int(x) for x in args.layer_counts.split(",") if x.strip() != ""]
    except ValueError:
        raise ConfigError(f"--layer-counts expects integers, got {args.layer_counts!r}")
    if not counts:
        raise ConfigError("--layer-counts is empty")
    rows = layer_sweep(kg, config, counts, split=args.split)
    print("layers\tmrr\thits@10")
    for row in rows:
        print(f"{row['layers']}\t{row['mrr']:.6f}\t{row['hits10']:.6f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.json").write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_gen_toy(args) -> int:
    kg = generate_kinship(
        seed=args.seed,
        founder_couples=args.couples,
        valid_size=args.valid_size,
        test_size=args.test_size,
    )
    write_dataset(kg, args.out)
    print(f"entities\t{kg.num_entities}")
    print(f"relations\t{kg.num_relations}")
    print(f"train\t{len(kg.train)}")
    print(f"valid\t{len(kg.valid)}")
    print(f"test\t{len(kg.test)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transgcn",
        description="Knowledge-graph embeddings with relation-aware graph convolutions.",
    )
    parser.add_argument("--version", action="version", version=f"transgcn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write artifacts")
    p_train.add_argument("--data", required=True, help="dataset directory")
    p_train.add_argument("--out", default="run", help="artifact directory")
    p_train.add_argument("--init-from", dest="init_from",
                         help="warm-start from an existing checkpoint")
    _add_config_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="filtered ranking metrics for a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--split", default="test", choices=["train", "valid", "test"])
    p_eval.add_argument("--buckets", action="store_true",
                        help="also report MRR by train degree")
    p_eval.add_argument("--threads", type=int, default=1)
    p_eval.add_argument("--out", default=".", help="directory for report.json")
    p_eval.set_defaults(func=cmd_eval)

    p_pred = sub.add_parser("predict", help="top-k completions for a partial triple")
    p_pred.add_argument("--checkpoint", required=True)
    p_pred.add_argument("--data", required=True)
    p_pred.add_argument("--k", type=int, default=10)
    p_pred.add_argument("--keep-known", action="store_true", dest="keep_known",
                        help="keep known completions, annotated, instead of filtering")
    p_pred.add_argument("query", nargs=3, metavar=("HEAD", "RELATION", "TAIL"),
                        help="use ? for the slot to predict")
    p_pred.set_defaults(func=cmd_predict)

    p_ins = sub.add_parser("inspect", help="summarize a checkpoint")
    p_ins.add_argument("--checkpoint", required=True)
    p_ins.add_argument("--basis", type=int, default=2,
                       help="basis count B for the R-GCN comparison")
    p_ins.set_defaults(func=cmd_inspect)

    p_sweep = sub.add_parser("sweep", help="train and evaluate across layer counts")
    p_sweep.add_argument("--data", required=True)
    p_sweep.add_argument("--layer-counts", default="0,1,2", dest="layer_counts")
    p_sweep.add_argument("--split", default="test", choices=["train", "valid", "test"])
    p_sweep.add_argument("--out", default=None)
    _add_config_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_toy = sub.add_parser("gen-toy", help="write the synthetic kinship dataset")
    p_toy.add_argument("--out", required=True)
    p_toy.add_argument("--seed", type=int, default=0)
    p_toy.add_argument("--couples", type=int, default=12)
    p_toy.add_argument("--valid-size", type=int, default=150, dest="valid_size")
    p_toy.add_argument("--test-size", type=int, default=150, dest="test_size")
    p_toy.set_defaults(func=cmd_gen_toy)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        configure_logging()
        return args.func(args)
    except NumericError as err:  # includes TrainingAborted escaping from sweep
        print(f"error: {err}", file=sys.stderr)
        return 3
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ConfigError, ParseError, CheckpointError, ShapeError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
