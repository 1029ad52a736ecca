"""Command-line entry point: convert, validate, train, eval, inspect.

Training reads a line-oriented ``key = value`` config file; every key can be
overridden by a command-line flag of the same name, and the ``HEHR_SEED``
environment variable overrides the configured seed (flags beat the
environment).  Commands only write their declared outputs; diagnostics go to
stderr and the exit status is zero exactly when no errors occurred.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import reporting
from .encoder import EncoderConfig
from .evaluation import DEFAULT_KS, FilterIndex, TupleScorer, evaluate
from .fact_format import (
    FactFormatError,
    convert_external,
    load_dataset,
    save_dataset,
    serialize_fact,
    validate_dataset,
)
from .graph_store import (
    GraphError,
    UnknownToken,
    build_graph,
    build_vocab,
    load_snapshot,
    resolve_records,
)
from .training import (
    CheckpointError,
    TrainConfig,
    TrainingError,
    embeddings_for_eval,
    load_checkpoint,
    save_checkpoint,
    train,
)

# Config schema: key -> (type, default).  Booleans are written true/false.
CONFIG_SCHEMA: dict[str, tuple[type, object]] = {
    # paths
    "train": (str, ""),
    "valid": (str, ""),
    "test": (str, ""),
    "checkpoint": (str, "model.ckpt"),
    "epoch_log": (str, "epochs.log"),
    "report_dir": (str, "report"),
    "figures": (bool, True),
    # encoder
    "embedding_dim": (int, 128),
    "num_layers": (int, 2),
    "activation": (str, "relu"),
    "inductive_init_value": (float, 0.5),
    "batch_norm": (bool, False),
    "self_residual": (bool, False),
    "qualifier_messages": (bool, True),
    "relation_update": (str, "edge_mean"),
    # training
    "mode": (str, "transductive"),
    "decoder": (str, "mdistmult"),
    "negative_ratio": (int, 10),
    "batch_size": (int, 128),
    "epochs": (int, 100),
    "learning_rate": (float, 1e-3),
    "adam_beta1": (float, 0.9),
    "adam_beta2": (float, 0.999),
    "adam_epsilon": (float, 1e-8),
    "seed": (int, 0),
    "corrupt_qualifiers": (bool, False),
    "hype_num_filters": (int, 4),
    "hype_width": (int, 3),
    "hype_stride": (int, 2),
    "eval_every": (int, 0),
    # evaluation
    "filtered": (bool, True),
    "tie_break": (str, "pessimistic"),
    "ks": (str, "1,3,5,10"),
    # concurrency cap; reductions are order-fixed, so results never depend on it
    "workers": (int, 1),
}


class ConfigError(Exception):
    pass


def _coerce(key: str, raw: str):
    if key not in CONFIG_SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    kind, _ = CONFIG_SCHEMA[key]
    if kind is bool:
        lowered = raw.strip().lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        return kind(raw.strip())
    except ValueError as err:
        raise ConfigError(f"{key}: {err}") from None


def parse_config_file(path: str) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, raw = stripped.partition("=")
            values[key.strip()] = _coerce(key.strip(), raw)
    return values


def resolve_config(file_values: dict, overrides: dict) -> dict:
    """Defaults, then file, then HEHR_SEED, then command-line flags."""
    config = {key: default for key, (_, default) in CONFIG_SCHEMA.items()}
    config.update(file_values)
    env_seed = os.environ.get("HEHR_SEED")
    if env_seed is not None:
        config["seed"] = _coerce("seed", env_seed)
    for key, value in overrides.items():
        if value is not None:
            config[key] = _coerce(key, value) if isinstance(value, str) else value
    return config


def _encoder_config(config: dict) -> EncoderConfig:
    return EncoderConfig(
        embedding_dim=config["embedding_dim"],
        num_layers=config["num_layers"],
        activation=config["activation"],
        mode=config["mode"] if config["mode"] != "shallow" else "transductive",
        inductive_init_value=config["inductive_init_value"],
        batch_norm=config["batch_norm"],
        self_residual=config["self_residual"],
        qualifier_messages=config["qualifier_messages"],
        relation_update=config["relation_update"],
    )


def _train_config(config: dict) -> TrainConfig:
    return TrainConfig(
        negative_ratio=config["negative_ratio"],
        batch_size=config["batch_size"],
        epochs=config["epochs"],
        learning_rate=config["learning_rate"],
        adam_beta1=config["adam_beta1"],
        adam_beta2=config["adam_beta2"],
        adam_epsilon=config["adam_epsilon"],
        seed=config["seed"],
        mode=config["mode"],
        decoder=config["decoder"],
        corrupt_qualifiers=config["corrupt_qualifiers"],
        hype_num_filters=config["hype_num_filters"],
        hype_width=config["hype_width"],
        hype_stride=config["hype_stride"],
        eval_every=config["eval_every"],
    )


def _load_clean(path: str, lenient: bool):
    records, diagnostics = load_dataset(path)
    for diag in diagnostics:
        print(f"{path}:{diag.line_number}: {diag.severity}: {diag.message}", file=sys.stderr)
    if diagnostics and not lenient:
        raise FactFormatError(f"{path}: {len(diagnostics)} malformed line(s)")
    return records


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_convert(args) -> int:
    with open(args.input, "r", encoding="utf-8") as handle:
        records, diagnostics = convert_external(
            args.format, handle, dedup=args.dedup, lenient=args.lenient
        )
    for diag in diagnostics:
        print(f"{args.input}:{diag.line_number}: {diag.severity}: {diag.message}", file=sys.stderr)
    save_dataset(records, args.output)
    print(f"wrote {len(records)} fact(s) to {args.output}")
    return 0


def cmd_validate(args) -> int:
    records, diagnostics = load_dataset(args.input)
    for diag in diagnostics:
        print(f"{args.input}:{diag.line_number}: {diag.severity}: {diag.message}", file=sys.stderr)
    report = validate_dataset(records)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        print(report.to_text())
    return 1 if any(d.severity == "error" for d in diagnostics) else 0


def cmd_train(args) -> int:
    file_values = parse_config_file(args.config) if args.config else {}
    overrides = {key: getattr(args, key, None) for key in CONFIG_SCHEMA}
    config = resolve_config(file_values, overrides)
    if not config["train"]:
        print("error: no training file configured (key 'train')", file=sys.stderr)
        return 1
    records = _load_clean(config["train"], lenient=False)

    enc_cfg = _encoder_config(config)
    train_cfg = _train_config(config)
    initial_state = None
    if args.resume:
        vocab = build_vocab(records)
        initial_state, _ = load_checkpoint(args.resume, vocab=vocab)
        enc_cfg = initial_state.enc_cfg

    eval_records = None
    if config["valid"] and config["eval_every"] > 0:
        eval_records = _load_clean(config["valid"], lenient=False)

    result = train(
        records, train_cfg, enc_cfg, eval_records=eval_records, initial_state=initial_state
    )
    save_checkpoint(result.state, config["checkpoint"], result.vocab)
    reporting.write_epoch_log(result.log, config["epoch_log"])
    for entry in result.log:
        print(reporting.format_epoch_line(entry))
    if config["figures"] and result.log:
        reporting.render_training_figures(result.log, os.path.dirname(config["epoch_log"]) or ".")
    print(f"checkpoint: {config['checkpoint']} (step {result.state.step})", file=sys.stderr)
    return 0


def _resolve_lenient(records, vocab):
    kept = []
    skipped = 0
    for record in records:
        try:
            kept.extend(resolve_records([record], vocab))
        except UnknownToken:
            skipped += 1
    return kept, skipped


def cmd_eval(args) -> int:
    overrides = {key: getattr(args, key, None) for key in CONFIG_SCHEMA}
    config = resolve_config({}, overrides)
    started = time.monotonic()

    train_records = _load_clean(args.train, lenient=False)
    vocab = build_vocab(train_records)
    state, header = load_checkpoint(args.checkpoint, vocab=vocab)
    graph = build_graph(train_records, vocab)
    test_records = _load_clean(args.test, lenient=False)

    hv, hr, vocab_eval = embeddings_for_eval(state, graph, vocab, test_records)
    test_facts = resolve_records(test_records, vocab_eval)

    filter_facts = list(resolve_records(train_records, vocab_eval)) + list(test_facts)
    skipped = 0
    if args.valid:
        valid_records = _load_clean(args.valid, lenient=False)
        valid_facts, skipped = _resolve_lenient(valid_records, vocab_eval)
        filter_facts.extend(valid_facts)
    if skipped:
        print(f"filter: skipped {skipped} fact(s) with out-of-vocabulary tokens", file=sys.stderr)

    ks = tuple(int(k) for k in str(config["ks"]).split(","))
    scorer = TupleScorer(hv, hr, state.decoder, state.hype_params())
    report = evaluate(
        test_facts,
        scorer,
        FilterIndex(filter_facts),
        ks=ks,
        filtered=config["filtered"],
        tie_break=config["tie_break"],
    )

    rows = []
    rank_iter = iter(report.ranks)
    for record, fact in zip(test_records, test_facts):
        for position in range(fact.arity):
            rows.append((serialize_fact(record), position, next(rank_iter)))
    extra = {
        "checkpoint": args.checkpoint,
        "test_file": args.test,
        "model": {
            "mode": header["mode"],
            "decoder": header["decoder"],
            "encoder": header["encoder"],
            "step": header["step"],
        },
        "wall_time_s": round(time.monotonic() - started, 6),
    }
    written = reporting.write_rank_report(
        report, config["report_dir"], query_rows=rows, extra=extra, figures=config["figures"]
    )
    print(report.to_text())
    print("report files: " + " ".join(written), file=sys.stderr)
    return 0


def cmd_inspect(args) -> int:
    with open(args.path, "rb") as handle:
        head = handle.read(8)
    if head.startswith(b"HEHRCKPT"):
        state, header = load_checkpoint(args.path)
        print(f"checkpoint: mode={header['mode']} decoder={header['decoder']} step={header['step']}")
        print(
            f"encoder: dim={header['encoder']['embedding_dim']} layers={header['encoder']['num_layers']} "
            f"activation={header['encoder']['activation']}"
        )
        print(f"trained_on: entities={header['num_entities']} relations={header['num_relations']}")
        print("parameters:")
        for name in sorted(state.params):
            shape = "x".join(str(s) for s in state.params[name].shape)
            print(f"  {name}: {shape}")
        return 0
    if head.startswith(b"HEHR"):
        graph = load_snapshot(args.path)
        print(f"graph snapshot: entities={graph.num_entities} relations={graph.num_relations} "
              f"hyperedges={graph.num_edges}")
        print(f"primary_incidence_rows: {len(graph.primary_edge)}")
        print(f"qualifier_incidence_rows: {len(graph.qual_edge)}")
        return 0

    records, diagnostics = load_dataset(args.path)
    for diag in diagnostics:
        print(f"{args.path}:{diag.line_number}: {diag.severity}: {diag.message}", file=sys.stderr)
    report = validate_dataset(records)
    edge_relations = report.relation_count - report.qualifier_only_relation_count
    print(f"entities: {report.entity_count}")
    print(
        f"relations: {report.relation_count} "
        f"(edge: {edge_relations}, qualifier-only: {report.qualifier_only_relation_count})"
    )
    print(f"hyperedges: {report.fact_count}")
    print(
        "arity_histogram: "
        + " ".join(f"{k}:{v}" for k, v in sorted(report.arity_histogram.items()))
    )
    print(f"qualifier_ratio: {report.qualifier_ratio:.6g}")
    return 1 if any(d.severity == "error" for d in diagnostics) else 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_config_overrides(parser: argparse.ArgumentParser, keys) -> None:
    for key in keys:
        kind, default = CONFIG_SCHEMA[key]
        if kind is bool:
            parser.add_argument(
                f"--{key}", choices=["true", "false"], default=None,
                help=f"override config key {key} (default {str(default).lower()})",
            )
        else:
            parser.add_argument(
                f"--{key}", default=None, metavar=kind.__name__.upper(),
                help=f"override config key {key} (default {default!r})",
            )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hehr",
        description="Link prediction on knowledge graphs with hyperedge and hyper-relational facts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert an external dataset to the fact file format")
    p.add_argument("--format", required=True,
                   choices=["triple_tsv", "hyperedge_csv", "hyper_relational_statements"])
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--dedup", action="store_true", help="drop exact duplicate facts")
    p.add_argument("--lenient", action="store_true", help="skip malformed rows with a warning")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("validate", help="report dataset statistics")
    p.add_argument("input")
    p.add_argument("--json", action="store_true", help="emit the report as JSON")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("config", nargs="?", help="key = value config file")
    p.add_argument("--resume", metavar="CHECKPOINT", help="continue from a checkpoint")
    _add_config_overrides(p, CONFIG_SCHEMA.keys())
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="rank test facts against a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--train", required=True, help="training fact file (rebuilds the graph)")
    p.add_argument("--test", required=True)
    p.add_argument("--valid", help="extra true facts for the filtered protocol")
    _add_config_overrides(p, ["report_dir", "figures", "filtered", "tie_break", "ks", "workers"])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", help="summarize a dataset, snapshot, or checkpoint")
    p.add_argument("path")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        FactFormatError,
        GraphError,
        TrainingError,
        CheckpointError,
        ConfigError,
        OSError,
        ValueError,
    ) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
