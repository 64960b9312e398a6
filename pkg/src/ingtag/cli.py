"""Command line entry point: ``ingtag {convert,train,eval,parse,synth}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .baseline import MajorityTagger, load_crf, save_crf, train_crf, viterbi
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .corpus import (
    DIALECTS,
    CorpusError,
    Phrase,
    load_alias_file,
    load_corpus,
    make_alias_table,
    phrase_from_text,
    read_dialect,
    split_train_dev,
    write_corpus,
)
from .features import EmbeddingError, load_embeddings
from .metrics import GRID_NAMES, evaluate, evaluate_predictor, format_grid, grid_evaluate
from .model import Hyper, parse, predict_labels
from .train import check_labeled, fit, prepare_model

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CHECKPOINT = 0, 2, 3, 4
DATA_ENV = "INGTAG_DATA_DIR"

log = logging.getLogger("ingtag")


class UsageError(Exception):
    pass


def data_path(p: str | Path) -> Path:
    """Resolve relative paths that do not exist against ``$INGTAG_DATA_DIR``."""
    path = Path(p)
    root = os.environ.get(DATA_ENV)
    if root and not path.is_absolute() and not path.exists():
        return Path(root) / path
    return path


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _aliases(args):
    return load_alias_file(args.label_alias) if args.label_alias else make_alias_table()


# ---------------------------------------------------------------------------
# convert
# ---------------------------------------------------------------------------


def cmd_convert(args) -> int:
    phrases = read_dialect(data_path(args.input), args.dialect, _aliases(args))
    write_corpus(phrases, args.output)
    n_tokens = sum(len(p) for p in phrases)
    print(f"phrases={len(phrases)} tokens={n_tokens}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def _hyper_from_args(args) -> Hyper:
    return Hyper(
        n_layers=args.n_layers,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        dropout_rate=args.dropout,
        max_epochs=args.max_epochs,
        patience=args.patience,
        seed=args.seed,
        score_fn=args.score_fn,
        residual=args.residual,
        positional=args.positional,
        qkv=not args.no_qkv,
        ffn_relu=args.ffn_relu,
        tune_embeddings=args.tune_embeddings,
        dim=args.dim,
    )


def _config_echo(args, hyper: Hyper | None) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    for k, v in cfg.items():
        if isinstance(v, Path):
            cfg[k] = str(v)
        elif isinstance(v, list):
            cfg[k] = [str(x) for x in v]
    if hyper is not None:
        cfg["hyper"] = hyper.to_dict()
    return cfg


class _Log:
    """Append-only JSON-lines log; wall-clock timings go to a sidecar file
    so the main log stays byte-identical across identical runs."""

    def __init__(self, path: str | None):
        self.path = Path(path) if path else None
        self.timing = Path(str(path) + ".timing") if path else None

    def write(self, record: dict) -> None:
        line = json.dumps(record, sort_keys=True)
        log.info(line)
        if self.path:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line + "\n")

    def time(self, record: dict) -> None:
        if self.timing:
            with open(self.timing, "a", encoding="utf-8") as f:
                f.write(json.dumps(record, sort_keys=True) + "\n")


def cmd_train(args) -> int:
    aliases = _aliases(args)
    train_set = load_corpus(data_path(args.data), aliases=aliases)
    check_labeled(train_set)
    if args.dev:
        dev_set = load_corpus(data_path(args.dev), aliases=aliases)
    else:
        train_set, dev_set = split_train_dev(train_set, args.dev_fraction, args.dev_seed)
    out = _Log(args.log)
    if args.baseline:
        out.write({"event": "config", "config": _config_echo(args, None)})
        t0 = time.perf_counter()
        model = train_crf(train_set, args.crf_epochs, args.seed, aliases)
        save_crf(model, args.out)
        record = {"event": "done", "kind": "crf", "features": len(model.feature_index)}
        if dev_set:
            record["dev_micro_f1"] = evaluate_predictor(lambda ph: viterbi(model, ph), dev_set).micro_f1
        out.write(record)
        out.time({"event": "done", "wall_seconds": time.perf_counter() - t0})
        return EXIT_OK

    hyper = _hyper_from_args(args)
    keep = {t.lower for ph in list(train_set) + list(dev_set) for t in ph.tokens}
    for extra in args.vocab_from or []:
        keep |= {t.lower for ph in load_corpus(data_path(extra), aliases=aliases) for t in ph.tokens}
    emb = load_embeddings(data_path(args.embeddings), args.dim, keep=keep, strict=not args.lenient, seed=args.seed)
    params = prepare_model(train_set, hyper, emb, aliases)
    out.write({"event": "config", "config": _config_echo(args, params.hyper),
               "train_phrases": len(train_set), "dev_phrases": len(dev_set),
               "vocab": len(params.vocab), "oov": len(params.vocab.oov)})
    t0 = time.perf_counter()

    def on_epoch(rec):
        out.write({"event": "epoch", **rec})
        out.time({"event": "epoch", "epoch": rec["epoch"], "wall_seconds": time.perf_counter() - t0})

    result = fit(params, train_set, dev_set, on_epoch=on_epoch)
    save_checkpoint(params, args.out)
    out.write({"event": "done", "best_epoch": result.best_epoch, "epochs": len(result.history)})
    out.time({"event": "done", "wall_seconds": time.perf_counter() - t0})
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def _load_predictor(path, baseline: bool, embeddings: str | None, tests):
    if baseline:
        model = load_crf(path)
        return lambda ph: viterbi(model, ph)
    params = load_checkpoint(path)
    if embeddings:
        keep = {t.lower for ph in tests for t in ph.tokens}
        extra = load_embeddings(data_path(embeddings), params.embeddings.dim, keep=keep)
        params.embeddings.add_pretrained(extra)
    return lambda ph: predict_labels(params, ph)


def cmd_eval(args) -> int:
    if args.grid:
        if len(args.checkpoints or []) != 3 or len(args.tests or []) != 3:
            raise UsageError("--grid needs --checkpoints and --tests, three each (AllRecipes FOOD.com Both)")
        tests = {}
        for name, p in zip(GRID_NAMES, args.tests):
            tests[name] = load_corpus(data_path(p))
            check_labeled(tests[name], f"test set {p}")
        all_test = [ph for ts in tests.values() for ph in ts]
        preds = {name: _load_predictor(c, args.baseline, args.embeddings, all_test)
                 for name, c in zip(GRID_NAMES, args.checkpoints)}
        grid = grid_evaluate(preds, tests)
        print(json.dumps(grid, indent=2, sort_keys=True) if args.json else format_grid(grid))
        return EXIT_OK
    if not args.checkpoint or not args.test:
        raise UsageError("eval needs CHECKPOINT and TEST (or --grid)")
    test = load_corpus(data_path(args.test))
    check_labeled(test, f"test set {args.test}")
    predict = _load_predictor(args.checkpoint, args.baseline, args.embeddings, test)
    report = evaluate_predictor(predict, test)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(report.table())
    return EXIT_OK


# ---------------------------------------------------------------------------
# parse
# ---------------------------------------------------------------------------


def cmd_parse(args) -> int:
    params = load_checkpoint(args.checkpoint)
    if args.file:
        with open(args.file, encoding="utf-8") as f:
            texts = [line.rstrip("\n") for line in f if line.strip()]
    elif args.phrase is not None:
        texts = [args.phrase]
    else:
        raise UsageError("parse needs a PHRASE argument or --file")
    phrases: list[Phrase] = [phrase_from_text(t) for t in texts]
    if args.embeddings:
        keep = {t.lower for ph in phrases for t in ph.tokens}
        params.embeddings.add_pretrained(load_embeddings(data_path(args.embeddings), params.embeddings.dim, keep=keep))
    for ph in phrases:
        result = parse(params, ph)
        if args.json:
            print(json.dumps(result.to_json(), sort_keys=False))
            continue
        print(ph.raw)
        for surface, lab, conf in result.tokens:
            print(f"  {surface:<20} {lab.title:<12} {conf:.4f}")
        for lab, spans in result.attributes.items():
            print(f"  -> {lab.key}: {'; '.join(spans)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    from .synthetic import make_dataset

    paths = make_dataset(args.outdir, args.n_train, args.n_test, args.dim, args.seed)
    for k, p in paths.items():
        print(f"{k}: {p}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ingtag",
        description="Ingredient phrase tagger. Relative data paths that do not exist "
                    f"are looked up under ${DATA_ENV}.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("convert", help="normalise an upstream corpus to the canonical TSV", formatter_class=fmt)
    p.add_argument("input", help="upstream corpus file")
    p.add_argument("output", help="canonical TSV to write")
    p.add_argument("--dialect", default="conll", help=f"input dialect, one of {sorted(DIALECTS)}")
    p.add_argument("--label-alias", default=None, help="JSON map of extra label strings to classes")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("train", help="train the attention tagger (or the CRF baseline)", formatter_class=fmt)
    p.add_argument("--data", required=True, help="training corpus (TSV)")
    p.add_argument("--dev", default=None, help="dev corpus for early stopping; default: split off the training data")
    p.add_argument("--dev-fraction", type=float, default=0.1, help="dev share when --dev is not given")
    p.add_argument("--dev-seed", type=int, default=13, help="seed of the dev split")
    p.add_argument("--embeddings", default=None, help="word-vector text file (required unless --baseline)")
    p.add_argument("--vocab-from", nargs="*", default=None, help="extra corpora whose tokens keep their pretrained vectors")
    p.add_argument("--lenient", action="store_true", help="skip malformed embedding lines instead of failing")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", default=None, help="append-only JSON-lines training log")
    p.add_argument("--seed", type=int, default=13, help="seed for init, shuffling, dropout and OOV vectors")
    p.add_argument("--n-layers", type=_positive_int, default=4, help="number of attention layers N")
    p.add_argument("--lr", type=float, default=5e-5, help="learning rate")
    p.add_argument("--batch-size", type=_positive_int, default=1, help="phrases per optimiser step")
    p.add_argument("--dropout", type=float, default=0.1, help="dropout rate after each feed-forward layer")
    p.add_argument("--max-epochs", type=int, default=20, help="epoch budget")
    p.add_argument("--patience", type=_positive_int, default=3, help="epochs without dev improvement before stopping")
    p.add_argument("--dim", type=_positive_int, default=300, help="word-vector dimension d")
    p.add_argument("--score-fn", choices=("dot", "additive"), default="dot", help="attention matching score")
    p.add_argument("--residual", action="store_true", help="add residual connections")
    p.add_argument("--positional", action="store_true", help="add sinusoidal position vectors")
    p.add_argument("--no-qkv", action="store_true", help="drop the query/key/value projections")
    p.add_argument("--ffn-relu", action="store_true", help="ReLU after the feed-forward linear layer")
    p.add_argument("--tune-embeddings", action="store_true", help="also train pretrained word vectors")
    p.add_argument("--label-alias", default=None, help="JSON map of extra label strings to classes")
    p.add_argument("--baseline", action="store_true", help="train the CRF baseline instead")
    p.add_argument("--crf-epochs", type=int, default=10, help="perceptron epochs for --baseline")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="per-entity metrics, or the 3x3 train/test grid", formatter_class=fmt)
    p.add_argument("checkpoint", nargs="?", help="trained checkpoint")
    p.add_argument("test", nargs="?", help="labelled test corpus (TSV)")
    p.add_argument("--baseline", action="store_true", help="checkpoints are CRF baselines")
    p.add_argument("--grid", action="store_true", help="train x test micro-F1 grid")
    p.add_argument("--checkpoints", nargs="*", help="grid: models trained on AllRecipes, FOOD.com, Both")
    p.add_argument("--tests", nargs="*", help="grid: test sets AllRecipes, FOOD.com, Both")
    p.add_argument("--embeddings", default=None, help="word vectors for tokens the checkpoint lacks")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("parse", help="label phrases and group them into attributes", formatter_class=fmt)
    p.add_argument("checkpoint", help="trained tagger checkpoint")
    p.add_argument("phrase", nargs="?", help="ingredient phrase text")
    p.add_argument("--file", default=None, help="one phrase per line")
    p.add_argument("--embeddings", default=None, help="word vectors for tokens the checkpoint lacks")
    p.add_argument("--json", action="store_true", help="one JSON record per phrase")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("synth", help="write a synthetic labelled corpus and word vectors", formatter_class=fmt)
    p.add_argument("outdir", help="directory for train.tsv, test.tsv and vectors.txt")
    p.add_argument("--n-train", type=int, default=400, help="training phrases")
    p.add_argument("--n-test", type=int, default=200, help="test phrases")
    p.add_argument("--dim", type=_positive_int, default=300, help="vector dimension")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "train" and not args.baseline and not args.embeddings:
        parser.error("train needs --embeddings unless --baseline is given")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"ingtag: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except CheckpointError as e:
        print(f"ingtag: checkpoint error: {e}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except (CorpusError, EmbeddingError, OSError, ValueError) as e:
        print(f"ingtag: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
