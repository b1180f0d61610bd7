"""Command-line interface.

Subcommands: search, retrain, eval, export, ablate. A config file is a
flat key=value text mirroring TrainConfig fields; command-line flags
override file values, and --seed controls every source of randomness.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os

from . import data as data_mod
from . import evaluate as eval_mod
from . import synthetic
from .train import TrainConfig, retrain, search

_BOOL_NAMES = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _coerce(field: dataclasses.Field, raw: str):
    if field.type in ("bool", bool):
        try:
            return _BOOL_NAMES[raw.strip().lower()]
        except KeyError:
            raise ValueError(f"{field.name}: expected a boolean, got {raw!r}") from None
    if field.name == "op_kinds":
        return tuple(k.strip() for k in raw.split(",") if k.strip())
    if field.type in ("int", int):
        return int(raw)
    if field.type in ("float", float):
        return float(raw)
    return raw


def load_config_file(path) -> dict:
    """Parse key=value lines; '#' starts a comment, blank lines are skipped."""
    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in fields:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _coerce(fields[key], raw)
    return values


def build_config(args) -> TrainConfig:
    values = load_config_file(args.config) if args.config else {}
    for f in dataclasses.fields(TrainConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    return TrainConfig(**values)


_FLAG_TYPES = {"int": int, "float": float, "str": str, int: int, float: float, str: str}


def _add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="key=value config file")
    for f in dataclasses.fields(TrainConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.name == "op_kinds":
            parser.add_argument(flag, type=lambda s: tuple(k.strip() for k in s.split(",")),
                                default=None, help="comma-separated candidate kinds")
        elif f.type in ("bool", bool):
            parser.add_argument(flag, type=lambda s: _BOOL_NAMES[s.lower()], default=None,
                                metavar="{true,false}")
        else:
            parser.add_argument(flag, type=_FLAG_TYPES[f.type], default=None)


def _prepare_data(data_path, cfg: TrainConfig):
    records = data_mod.load_tsv(data_path)
    label_map = data_mod.label_map_from_records(records)
    labels = [label_map[lab] for lab, _ in records]
    spec = data_mod.SplitSpec(
        train_fraction=cfg.train_fraction,
        test_fraction=cfg.test_fraction,
        validation_fraction_of_train=cfg.val_fraction,
        seed=cfg.seed,
    )
    train_idx, val_idx, test_idx = data_mod.split(labels, spec)
    vocab = data_mod.build_vocab(
        (records[i][1] for i in train_idx + val_idx), min_freq=cfg.min_freq
    )
    encoded = data_mod.encode_records(records, vocab, cfg.l_max, label_map)
    return records, label_map, vocab, encoded, (train_idx, val_idx, test_idx)


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def _run_search(args, cfg: TrainConfig):
    os.makedirs(args.out, exist_ok=True)
    _, label_map, vocab, encoded, (train_idx, val_idx, test_idx) = _prepare_data(args.data, cfg)
    run = search(
        [encoded[i] for i in train_idx],
        [encoded[i] for i in val_idx],
        cfg,
        len(vocab),
        len(label_map),
        log_path=os.path.join(args.out, "run_log.jsonl"),
    )
    eval_mod.save_architecture(run.derived, os.path.join(args.out, "architecture.json"))
    eval_mod.save_dot(run.derived, os.path.join(args.out, "architecture.dot"))
    _write_json(os.path.join(args.out, "alpha.json"), run.alpha)
    _write_json(os.path.join(args.out, "splits.json"),
                {"train": train_idx, "val": val_idx, "test": test_idx})
    _write_json(os.path.join(args.out, "label_map.json"), label_map)
    _write_json(os.path.join(args.out, "vocab.json"), vocab.to_json_dict())
    summary = {
        "seed": cfg.seed,
        "best_val_acc": run.best_val_acc,
        "edges_kept": len(run.derived.edges),
        "out": args.out,
    }
    print(json.dumps(summary))
    return run


def cmd_search(args):
    _run_search(args, build_config(args))


def cmd_retrain(args):
    cfg = build_config(args)
    os.makedirs(args.out, exist_ok=True)
    _, label_map, vocab, encoded, (train_idx, val_idx, test_idx) = _prepare_data(args.data, cfg)
    arch = eval_mod.load_architecture(args.arch)
    model, _ = retrain(
        arch,
        [encoded[i] for i in train_idx],
        [encoded[i] for i in val_idx],
        cfg,
        len(vocab),
        len(label_map),
        log_path=os.path.join(args.out, "retrain_log.jsonl"),
    )
    eval_mod.save_checkpoint(model, vocab, label_map, os.path.join(args.out, "checkpoint.json"),
                             l_max=cfg.l_max)
    test_ex = [encoded[i] for i in test_idx]
    preds = model.predict(test_ex, batch_size=cfg.batch_size)
    report = eval_mod.compute_metrics(preds, [ex.label for ex in test_ex], len(label_map))
    _write_json(os.path.join(args.out, "metrics.json"), report.to_json_dict())
    print(json.dumps({"test_accuracy": report.accuracy, "test_f1": report.f1, "out": args.out}))


def _select_examples(args, vocab, label_map, l_max):
    records = data_mod.load_tsv(args.data)
    encoded = [
        data_mod.encode(text, vocab, l_max, label=label_map[label])
        for label, text in records
    ]
    if getattr(args, "manifest", None):
        with open(args.manifest, encoding="utf-8") as fh:
            manifest = json.load(fh)
        encoded = [encoded[i] for i in manifest[args.subset]]
    return encoded


def cmd_eval(args):
    model, vocab, label_map, meta = eval_mod.load_checkpoint(args.model)
    examples = _select_examples(args, vocab, label_map, meta["l_max"])
    preds = model.predict(examples)
    report = eval_mod.compute_metrics(preds, [ex.label for ex in examples], model.n_classes)
    print(json.dumps(report.to_json_dict()))


def cmd_export(args):
    model, vocab, label_map, meta = eval_mod.load_checkpoint(args.model)
    if args.dot:
        eval_mod.save_dot(model.dag.arch, args.dot)
        print(json.dumps({"dot": args.dot}))
    if args.hist:
        if not args.data:
            raise SystemExit("--hist requires --data")
        examples = _select_examples(args, vocab, label_map, meta["l_max"])
        hist = eval_mod.state_histogram(model, examples)
        hist.to_csv(args.hist)
        print(json.dumps({"hist": args.hist, "degenerate": hist.degenerate}))


def cmd_ablate(args):
    cfg = eval_mod.ablate(build_config(args), args.drop)
    run = _run_search(args, cfg)
    if args.retrain:
        _, label_map, vocab, encoded, (train_idx, val_idx, test_idx) = _prepare_data(args.data, cfg)
        model, _ = retrain(
            run.derived,
            [encoded[i] for i in train_idx],
            [encoded[i] for i in val_idx],
            cfg,
            len(vocab),
            len(label_map),
        )
        test_ex = [encoded[i] for i in test_idx]
        preds = model.predict(test_ex, batch_size=cfg.batch_size)
        report = eval_mod.compute_metrics(preds, [ex.label for ex in test_ex], len(label_map))
        _write_json(os.path.join(args.out, "metrics.json"), report.to_json_dict())
        print(json.dumps({"test_accuracy": report.accuracy, "test_f1": report.f1}))


def cmd_synth(args):
    synthetic.write_tsv(synthetic.make_keyword_corpus(args.n, seed=args.seed), args.out)
    print(json.dumps({"out": args.out, "n": args.n}))


def main(argv=None):
    parser = argparse.ArgumentParser(prog="ddnas")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="run architecture search on one seed")
    p.add_argument("--data", required=True, help="label<TAB>text file")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("retrain", help="train a derived architecture from scratch")
    p.add_argument("--arch", required=True, help="architecture JSON from search")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_retrain)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a data file")
    p.add_argument("--model", required=True, help="checkpoint JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--manifest", help="splits.json from a search run")
    p.add_argument("--subset", default="test", choices=("train", "val", "test"))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export", help="write DOT and state-histogram exports")
    p.add_argument("--model", required=True)
    p.add_argument("--dot")
    p.add_argument("--hist")
    p.add_argument("--data")
    p.add_argument("--manifest")
    p.add_argument("--subset", default="test", choices=("train", "val", "test"))
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("ablate", help="search with an operation family or discretization removed")
    p.add_argument("--drop", required=True, choices=eval_mod.ABLATION_FAMILIES)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--retrain", action="store_true", help="also retrain the derived architecture")
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", help="write a synthetic keyword corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=600)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    args = parser.parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
