"""Command-line pipeline driver.

Every subcommand validates its inputs, writes its artifacts plus a
config.json snapshot into --out, and exits 0 on success. Failure
categories map to distinct exit codes:

    2  usage or malformed configuration
    3  missing input file
    4  unreadable data file
    5  incompatible or corrupt checkpoint
    6  training failure

A config file (--config, JSON keyed by flag dest names) supplies defaults;
explicit flags win. All randomness derives from --seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .augment import (
    AugmentationPolicy,
    SynonymTable,
    augment_dataset,
    synonym_augment_dataset,
    write_augmented_tsv,
)
from .checkpoint import CheckpointError
from .classify import (
    CnnConfig,
    RnnConfig,
    ab_experiment,
    cross_validate,
    evaluate,
    format_table,
    grid_search,
    load_classifier,
    save_classifier,
    train_cnn,
    train_rnn,
    write_records,
)
from .encoder import EncoderConfig, load_encoder, save_encoder
from .styletransfer import transfer_style, write_style_pairs
from .text import ParseError, build_vocab, load_tsv, load_vocab, read_tsv, save_vocab, tokenize
from .training import (
    MaskPolicy,
    SkipExample,
    TrainConfig,
    TrainingError,
    finetune_cmlm,
    pretrain_mlm,
    write_metrics,
)

RUN_CONFIG_FORMAT = "maskaug-run-config v1"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_PARSE = 4
EXIT_CHECKPOINT = 5
EXIT_TRAINING = 6


def _require(args: argparse.Namespace, *names: str) -> None:
    for name in names:
        if getattr(args, name, None) is None:
            raise ValueError(f"--{name.replace('_', '-')} is required (flag or config file)")


def _archive_config(args: argparse.Namespace, out: Path) -> None:
    payload = {"format": RUN_CONFIG_FORMAT, "subcommand": args.subcommand}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "subcommand", "config"):
            continue
        payload[key] = str(value) if isinstance(value, Path) else value
    (out / "config.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _out_dir(args: argparse.Namespace) -> Path:
    _require(args, "out")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _archive_config(args, out)
    return out


def _parse_k(text: str) -> "int | tuple[int, int]":
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    if len(parts) == 1:
        return int(parts[0])
    if len(parts) == 2:
        return (int(parts[0]), int(parts[1]))
    raise ValueError(f"--k must be 'K' or 'LO,HI', got {text!r}")


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in str(text).split(",") if p.strip())


def _load_dataset(args: argparse.Namespace, vocab, *, val_fraction=None, test=None, max_len=None):
    return load_tsv(
        args.data,
        vocab,
        max_len=max_len if max_len is not None else args.max_len,
        val_fraction=args.val_fraction if val_fraction is None else val_fraction,
        seed=args.seed,
        test_path=test,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_build_vocab(args) -> int:
    _require(args, "data")
    out = _out_dir(args)
    rows = read_tsv(args.data)
    vocab = build_vocab(
        (tokenize(text) for _, text in rows), min_freq=args.min_freq, max_size=args.max_size
    )
    save_vocab(vocab, out / "vocab.txt")
    print(f"wrote {out / 'vocab.txt'} ({len(vocab)} tokens)")
    return EXIT_OK


def cmd_pretrain(args) -> int:
    _require(args, "data", "vocab")
    out = _out_dir(args)
    vocab = load_vocab(args.vocab)
    dataset = _load_dataset(args, vocab)
    config = EncoderConfig(
        vocab_size=len(vocab),
        layers=args.layers,
        hidden=args.hidden,
        heads=args.heads,
        ff=args.ff,
        max_len=args.max_len,
        num_conditions=args.num_conditions,
        dropout=args.dropout_rate,
    )
    policy = MaskPolicy(mode="ratio", ratio=args.mask_ratio)
    cfg = TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
        patience=args.patience, seed=args.seed, clip_norm=args.clip_norm,
    )
    params, history = pretrain_mlm(dataset, config, policy, cfg)
    save_encoder(params, config, out / "encoder.ckpt")
    write_metrics(history, out / "metrics.tsv")
    final = [h for h in history if h["split"] == "val"][-1]
    print(
        f"wrote {out / 'encoder.ckpt'} "
        f"(val loss {final['loss']:.4f}, masked acc {final['masked_acc']:.4f})"
    )
    return EXIT_OK


def cmd_finetune(args) -> int:
    _require(args, "data", "vocab", "init")
    out = _out_dir(args)
    vocab = load_vocab(args.vocab)
    params, config = load_encoder(args.init)
    if config.vocab_size != len(vocab):
        raise CheckpointError(
            f"checkpoint vocabulary size {config.vocab_size} != vocab file {len(vocab)}"
        )
    dataset = _load_dataset(args, vocab, max_len=config.max_len)
    policy = MaskPolicy(mode="ratio", ratio=args.mask_ratio)
    cfg = TrainConfig(
        epochs=args.epochs, batch_size=args.batch_size, lr=args.lr,
        patience=args.patience, seed=args.seed, clip_norm=args.clip_norm,
    )
    tuned, tuned_config, history = finetune_cmlm(dataset, params, config, policy, cfg)
    save_encoder(tuned, tuned_config, out / "conditional.ckpt")
    write_metrics(history, out / "metrics.tsv")
    final = [h for h in history if h["split"] == "val"][-1]
    print(
        f"wrote {out / 'conditional.ckpt'} ({tuned_config.num_conditions} conditions, "
        f"val loss {final['loss']:.4f})"
    )
    return EXIT_OK


def cmd_augment(args) -> int:
    _require(args, "data", "vocab")
    out = _out_dir(args)
    vocab = load_vocab(args.vocab)
    dataset = _load_dataset(args, vocab, val_fraction=0.0)
    n_originals = len(dataset.train)
    policy = AugmentationPolicy(
        k=_parse_k(args.k),
        sampler=args.sampler,
        top_k=args.top_k,
        temperature=args.temperature,
        exclude_original=not args.keep_original,
        multiplier=args.multiplier,
        seed=args.seed,
    )
    if args.augmenter in ("cbert", "bert"):
        _require(args, "model")
        params, config = load_encoder(args.model)
        if config.vocab_size != len(vocab):
            raise CheckpointError(
                f"checkpoint vocabulary size {config.vocab_size} != vocab file {len(vocab)}"
            )
        augmented, report = augment_dataset(
            params, config, dataset, policy, unconditional=(args.augmenter == "bert")
        )
    elif args.augmenter == "synonym":
        _require(args, "synonyms")
        table = SynonymTable.load(args.synonyms)
        k = policy.k if isinstance(policy.k, int) else policy.k[1]
        augmented, report = synonym_augment_dataset(
            dataset, table, vocab, k=k, multiplier=args.multiplier, seed=args.seed
        )
    else:
        raise ValueError(f"unknown augmenter {args.augmenter!r}")
    write_augmented_tsv(out / "augmented.tsv", augmented, n_originals, report, vocab)
    (out / "report.json").write_text(
        json.dumps({"generated": report.generated, "skipped": report.skipped}, indent=2)
        + "\n",
        encoding="utf-8",
    )
    print(
        f"wrote {out / 'augmented.tsv'} "
        f"({n_originals} originals + {report.generated} generated, {report.skipped} skipped)"
    )
    return EXIT_OK


def _classifier_config(args) -> "CnnConfig | RnnConfig":
    if args.classifier == "cnn":
        return CnnConfig(
            num_filters=args.num_filters,
            emb_dim=args.emb_dim,
            hidden_dim=args.hidden_dim,
            dropout=args.dropout_rate,
            lr=args.lr,
            seed=args.seed,
            max_epochs=args.epochs,
            batch_size=args.batch_size,
            patience=args.patience,
        )
    if args.classifier == "rnn":
        return RnnConfig(
            emb_dim=args.emb_dim,
            state_dim=args.hidden_dim,
            dropout=args.dropout_rate,
            lr=args.lr,
            seed=args.seed,
            max_epochs=args.epochs,
            batch_size=args.batch_size,
            patience=args.patience,
        )
    raise ValueError(f"unknown classifier kind {args.classifier!r}")


def cmd_train_classifier(args) -> int:
    _require(args, "data", "vocab")
    out = _out_dir(args)
    vocab = load_vocab(args.vocab)
    dataset = _load_dataset(args, vocab, test=args.test)
    cfg = _classifier_config(args)
    trials = None
    if args.grid:
        cfg, trials = grid_search(dataset, args.classifier, cfg, vocab_size=len(vocab))
    train = train_cnn if args.classifier == "cnn" else train_rnn
    clf, report = train(dataset, cfg, vocab_size=len(vocab))
    save_classifier(clf, out / "classifier.ckpt")
    summary = {
        "accuracy": report.accuracy,
        "epochs_used": report.epochs_used,
        "seed": report.seed,
    }
    if trials is not None:
        summary["grid_trials"] = trials
    if args.cv:
        examples = dataset.train + dataset.val + dataset.test
        mean, per_fold = cross_validate(
            examples, dataset.num_labels, args.classifier, cfg,
            folds=args.cv, vocab_size=len(vocab),
        )
        summary["cv_accuracy"] = {"mean": mean, "folds": per_fold}
    if dataset.test:
        summary["accuracy"]["test"] = evaluate(clf, dataset.test).accuracy["test"]
    (out / "report.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    shown = ", ".join(f"{k} {v:.4f}" for k, v in summary["accuracy"].items())
    print(f"wrote {out / 'classifier.ckpt'} ({shown})")
    return EXIT_OK


def cmd_eval(args) -> int:
    _require(args, "data", "vocab", "classifier_ckpt")
    out = _out_dir(args)
    vocab = load_vocab(args.vocab)
    dataset = _load_dataset(args, vocab, val_fraction=0.0)
    clf = load_classifier(args.classifier_ckpt)
    report = evaluate(clf, dataset.train, "test")
    payload = {
        "accuracy": report.accuracy["test"],
        "confusion": report.confusion["test"].tolist(),
        "epochs_used": report.epochs_used,
        "seed": report.seed,
    }
    (out / "eval.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    print(f"accuracy {report.accuracy['test']:.4f} over {len(dataset.train)} examples")
    return EXIT_OK


def cmd_ab_experiment(args) -> int:
    _require(args, "data", "test", "vocab")
    out = _out_dir(args)
    vocab = load_vocab(args.vocab)
    dataset = _load_dataset(args, vocab, test=args.test)
    arms = [a.strip() for a in args.arms.split(",") if a.strip()]
    policy = AugmentationPolicy(
        k=_parse_k(args.k),
        sampler=args.sampler,
        top_k=args.top_k,
        temperature=args.temperature,
        multiplier=args.multiplier,
        seed=args.seed,
    )
    augmenters: dict[str, object] = {}
    for arm in arms:
        if arm == "none":
            augmenters[arm] = None
        elif arm == "cbert":
            _require(args, "model")
            params, config = load_encoder(args.model)
            augmenters[arm] = (
                lambda d, s, p=params, c=config: augment_dataset(p, c, d, policy, seed=s)[0]
            )
        elif arm == "bert":
            _require(args, "pretrained")
            params, config = load_encoder(args.pretrained)
            augmenters[arm] = (
                lambda d, s, p=params, c=config: augment_dataset(
                    p, c, d, policy, unconditional=True, seed=s
                )[0]
            )
        elif arm == "synonym":
            _require(args, "synonyms")
            table = SynonymTable.load(args.synonyms)
            k = policy.k if isinstance(policy.k, int) else policy.k[1]
            augmenters[arm] = (
                lambda d, s, t=table: synonym_augment_dataset(
                    d, t, vocab, k=k, multiplier=args.multiplier, seed=s
                )[0]
            )
        else:
            raise ValueError(f"unknown arm {arm!r}; choose from none,synonym,bert,cbert")
    records, summary = ab_experiment(
        dataset,
        augmenters,
        classifier=args.classifier,
        seeds=_parse_ints(args.seeds),
        cfg=_classifier_config(args),
        vocab_size=len(vocab),
    )
    write_records(records, out / "records.tsv")
    table = format_table(records, summary)
    (out / "table.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return EXIT_OK


def cmd_style_transfer(args) -> int:
    _require(args, "data", "vocab", "model", "classifier_ckpt")
    out = _out_dir(args)
    vocab = load_vocab(args.vocab)
    params, config = load_encoder(args.model)
    clf = load_classifier(args.classifier_ckpt)
    dataset = _load_dataset(args, vocab, val_fraction=0.0)
    if args.target_label is None and dataset.num_labels != 2:
        raise ValueError("--target-label is required for non-binary datasets")
    pairs = []
    skipped = 0
    examples = dataset.train if args.limit is None else dataset.train[: args.limit]
    for example in examples:
        target = (
            args.target_label if args.target_label is not None else 1 - example.label
        )
        if target == example.label:
            continue
        try:
            rewritten = transfer_style(params, config, clf, example, target, top_m=args.top_m)
        except SkipExample:
            skipped += 1
            continue
        pairs.append((example, rewritten))
    write_style_pairs(out / "pairs.tsv", pairs, vocab)
    note = f", {skipped} skipped" if skipped else ""
    print(f"wrote {out / 'pairs.tsv'} ({len(pairs)} pairs{note})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--out", help="run directory for artifacts and config.json")
    sp.add_argument("--seed", type=int, default=0, help="root seed for every stream")
    sp.add_argument("--config", help="JSON file of flag defaults; explicit flags win")


def _add_train_flags(sp: argparse.ArgumentParser, epochs: int) -> None:
    sp.add_argument("--epochs", type=int, default=epochs)
    sp.add_argument("--batch-size", type=int, default=32)
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--patience", type=int, default=3)
    sp.add_argument("--clip-norm", type=float, default=1.0)
    sp.add_argument("--val-fraction", type=float, default=0.1)
    sp.add_argument("--mask-ratio", type=float, default=0.15)


def _add_sampler_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--k", default="1,2", help="masked words per sentence: 'K' or 'LO,HI'")
    sp.add_argument("--sampler", choices=("greedy", "top_k", "temperature"), default="top_k")
    sp.add_argument("--top-k", type=int, default=10)
    sp.add_argument("--temperature", type=float, default=1.0)
    sp.add_argument("--multiplier", type=int, default=1)


def _add_classifier_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--classifier", choices=("cnn", "rnn"), default="cnn")
    sp.add_argument("--num-filters", type=int, default=32)
    sp.add_argument("--emb-dim", type=int, default=32)
    sp.add_argument("--hidden-dim", type=int, default=64)
    sp.add_argument("--dropout-rate", type=float, default=0.5)
    sp.add_argument("--epochs", type=int, default=30)
    sp.add_argument("--batch-size", type=int, default=32)
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--patience", type=int, default=5)
    sp.add_argument("--val-fraction", type=float, default=0.1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maskaug",
        description="masked-LM text augmentation pipeline",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("build-vocab", help="build a vocabulary file from a TSV dataset")
    sp.add_argument("--data", help="label<TAB>text file")
    sp.add_argument("--min-freq", type=int, default=1)
    sp.add_argument("--max-size", type=int, default=None)
    _add_common(sp)
    sp.set_defaults(func=cmd_build_vocab)

    sp = sub.add_parser("pretrain", help="masked-LM pretraining (neutral condition)")
    sp.add_argument("--data")
    sp.add_argument("--vocab")
    sp.add_argument("--layers", type=int, default=2)
    sp.add_argument("--hidden", type=int, default=64)
    sp.add_argument("--heads", type=int, default=2)
    sp.add_argument("--ff", type=int, default=256)
    sp.add_argument("--max-len", type=int, default=64)
    sp.add_argument("--num-conditions", type=int, default=2)
    sp.add_argument("--dropout-rate", type=float, default=0.1)
    _add_train_flags(sp, epochs=10)
    _add_common(sp)
    sp.set_defaults(func=cmd_pretrain)

    sp = sub.add_parser("finetune", help="label-conditional fine-tuning")
    sp.add_argument("--data")
    sp.add_argument("--vocab")
    sp.add_argument("--init", help="pretrained encoder checkpoint")
    _add_train_flags(sp, epochs=10)
    sp.add_argument("--max-len", type=int, default=64)
    _add_common(sp)
    sp.set_defaults(func=cmd_finetune)

    sp = sub.add_parser("augment", help="write an augmented copy of a dataset")
    sp.add_argument("--data")
    sp.add_argument("--vocab")
    sp.add_argument("--model", help="encoder checkpoint (cbert/bert augmenters)")
    sp.add_argument("--synonyms", help="synonym table file (synonym augmenter)")
    sp.add_argument("--augmenter", choices=("cbert", "bert", "synonym"), default="cbert")
    sp.add_argument("--keep-original", action="store_true",
                    help="allow a masked slot to re-sample its original word")
    sp.add_argument("--max-len", type=int, default=64)
    _add_sampler_flags(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_augment)

    sp = sub.add_parser("train-classifier", help="train a CNN or LSTM classifier")
    sp.add_argument("--data")
    sp.add_argument("--test", default=None)
    sp.add_argument("--vocab")
    sp.add_argument("--max-len", type=int, default=64)
    sp.add_argument("--grid", action="store_true",
                    help="search a small lr/dropout grid on validation accuracy first")
    sp.add_argument("--cv", type=int, default=None,
                    help="also report k-fold cross-validation accuracy")
    _add_classifier_flags(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_train_classifier)

    sp = sub.add_parser("eval", help="evaluate a trained classifier on a TSV file")
    sp.add_argument("--data")
    sp.add_argument("--vocab")
    sp.add_argument("--classifier-ckpt")
    sp.add_argument("--max-len", type=int, default=64)
    _add_common(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("ab-experiment", help="compare augmentation arms on one classifier")
    sp.add_argument("--data")
    sp.add_argument("--test")
    sp.add_argument("--vocab")
    sp.add_argument("--model", help="conditional encoder checkpoint (cbert arm)")
    sp.add_argument("--pretrained", help="unconditional encoder checkpoint (bert arm)")
    sp.add_argument("--synonyms", help="synonym table (synonym arm)")
    sp.add_argument("--arms", default="none,synonym,bert,cbert")
    sp.add_argument("--seeds", default="1,2,3")
    sp.add_argument("--max-len", type=int, default=64)
    _add_sampler_flags(sp)
    _add_classifier_flags(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_ab_experiment)

    sp = sub.add_parser("style-transfer", help="rewrite sentences under the opposite label")
    sp.add_argument("--data")
    sp.add_argument("--vocab")
    sp.add_argument("--model", help="conditional encoder checkpoint")
    sp.add_argument("--classifier-ckpt", help="trained classifier for attribution")
    sp.add_argument("--target-label", type=int, default=None)
    sp.add_argument("--top-m", type=int, default=1)
    sp.add_argument("--limit", type=int, default=None)
    sp.add_argument("--max-len", type=int, default=64)
    _add_common(sp)
    sp.set_defaults(func=cmd_style_transfer)

    return parser


def _config_defaults(argv: list[str]) -> dict:
    if "--config" not in argv:
        return {}
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ValueError("--config needs a file path")
    path = Path(argv[idx + 1])
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed config file {path}: {exc}") from None
    if not isinstance(payload, dict):
        raise ValueError(f"config file {path} must hold a JSON object")
    return payload


def main(argv: "list[str] | None" = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        defaults = _config_defaults(argv)
        parser = build_parser()
        if defaults:
            for action in parser._subparsers._group_actions[0].choices.values():
                known = {a.dest for a in action._actions}
                action.set_defaults(**{k: v for k, v in defaults.items() if k in known})
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error[missing-file]: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except ParseError as exc:
        print(f"error[parse]: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except CheckpointError as exc:
        print(f"error[checkpoint]: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except TrainingError as exc:
        print(f"error[training]: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except (ValueError, KeyError, IndexError) as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
