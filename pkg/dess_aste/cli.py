"""
Command-line entry point

    dess stats --data train.txt
    dess train --preset toy --data train.txt --dev dev.txt --test test.txt --checkpoint model.npz
    dess eval --checkpoint model.npz --data test.txt
    dess predict --checkpoint model.npz --data test.txt --out predictions.jsonl
    dess attn-export --checkpoint model.npz --data test.txt --out heatmaps/ --layer -1 --head mean --pgm
    dess fetch --dataset 14res --out data/

Exit codes: 0 on success, 2 for bad flags, 1 for runtime faults.
"""

import argparse
import asyncio
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Set, TextIO, Union, get_args

from dotenv import load_dotenv

from .checkpoint import load_checkpoint, save_checkpoint
from .config import ENCODER_SHAPES, PRESETS, read_config_file, resolve_config
from .corpus import Sentence, Triplet, dataset_stats, load_file, load_split
from .errors import DessError, ValidationError
from .evaluation import categorize_errors, exact_match
from .export import HeadSelector, export_attention
from .fetch import DATASETS, fetch_dataset
from .literals import SplitName
from .logging_utils import configure_logging, log_event
from .model import predict_sentences
from .training import train


logger = logging.getLogger(__name__)


def _head_selector(value: str) -> HeadSelector:
    if value == "mean":
        return value
    try:
        head = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'mean', got {value!r}")
    if head < 0:
        raise argparse.ArgumentTypeError("head index must be >= 0")
    return head


def _dump(payload: Any, stream: TextIO) -> None:
    stream.write(json.dumps(payload, sort_keys=True) + "\n")


def _triplets_json(triplets: Set[Triplet]) -> List[Dict[str, object]]:
    return [t.to_json() for t in sorted(triplets, key=Triplet.sort_key)]


def read_predictions(path: Union[str, Path], split: SplitName) -> Dict[str, Set[Triplet]]:
    """
    Predictions as JSON lines (``{"id", "triplets"}``, as written by ``predict``)
    or as an ASTE file whose lines align with the gold file.
    """
    path = Path(path)
    if path.suffix != ".jsonl":
        return {s.id: set(s.gold) for s in load_file(path, split)}
    predictions: Dict[str, Set[Triplet]] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                predictions[record["id"]] = {Triplet.from_json(t) for t in record["triplets"]}
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValidationError(f"malformed prediction record: {exc}", path=str(path), line_number=number) from exc
    return predictions


def _load_sentences(args: argparse.Namespace) -> List[Sentence]:
    return load_file(args.data, args.split, args.heads)


def cmd_stats(args: argparse.Namespace, out: TextIO) -> int:
    if not (args.dev or args.test):
        _dump(dataset_stats(_load_sentences(args)).to_json(), out)
        return 0
    payload = {"train": dataset_stats(load_file(args.data, "train", args.heads)).to_json()}
    for name in ("dev", "test"):
        path = getattr(args, name)
        if path:
            payload[name] = dataset_stats(load_file(path, name)).to_json()
    _dump(payload, out)
    return 0


def cmd_train(args: argparse.Namespace, out: TextIO) -> int:
    config = read_config_file(args.config) if args.config else None
    overrides = {"seed": args.seed, "epochs": args.epochs, "stop_at_f1": args.stop_at_f1}
    model_config, train_config = resolve_config(args.preset, config, overrides, encoder_shape=args.shape)
    heads = {k: v for k, v in (("train", args.heads), ("dev", args.dev_heads), ("test", args.test_heads)) if v}
    split = load_split(args.data, args.dev, args.test, heads)

    checkpoint_path = Path(args.checkpoint)
    log_path = Path(args.log) if args.log else checkpoint_path.with_suffix(".csv")
    result = train(split, model_config, train_config, log_path=log_path)
    save_checkpoint(result.checkpoint, checkpoint_path)
    log_event(logger, "checkpoint_saved", path=str(checkpoint_path), epoch=result.checkpoint.epoch)
    _dump({
        "best_epoch": result.checkpoint.epoch,
        "epochs_run": result.epochs_run,
        "dev": result.checkpoint.dev_metrics.to_json(),
        "test": result.test_metrics.to_json(),
        "checkpoint": str(checkpoint_path),
        "log": str(log_path),
    }, out)
    return 0


def cmd_eval(args: argparse.Namespace, out: TextIO) -> int:
    sentences = _load_sentences(args)
    gold = {s.id: set(s.gold) for s in sentences}
    if args.predictions:
        predictions = read_predictions(args.predictions, args.split)
    elif args.checkpoint:
        checkpoint = load_checkpoint(args.checkpoint)
        predictions = predict_sentences(checkpoint.build_model(), checkpoint.vocab, sentences)
    else:
        raise ValidationError("eval needs --checkpoint or --predictions")
    _dump({
        "metrics": exact_match(predictions, gold).to_json(),
        "errors": categorize_errors(predictions, gold).to_json(),
    }, out)
    return 0


def cmd_predict(args: argparse.Namespace, out: TextIO) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    sentences = _load_sentences(args)
    predictions = predict_sentences(checkpoint.build_model(), checkpoint.vocab, sentences)
    lines = [json.dumps({"id": s.id, "triplets": _triplets_json(predictions[s.id])}, sort_keys=True) for s in sentences]
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write("".join(line + "\n" for line in lines))
    else:
        out.write("".join(line + "\n" for line in lines))
    return 0


def cmd_attn_export(args: argparse.Namespace, out: TextIO) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    written = export_attention(
        checkpoint.build_model(),
        checkpoint.vocab,
        _load_sentences(args),
        args.out,
        layer=args.layer,
        head=args.head,
        pgm=args.pgm,
    )
    _dump({"files": [str(p) for p in written]}, out)
    return 0


def cmd_fetch(args: argparse.Namespace, out: TextIO) -> int:
    files = asyncio.run(fetch_dataset(args.dataset, args.out, overwrite=args.overwrite))
    _dump(files.to_json(), out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dess", description="Dual-encoder aspect sentiment triplet extraction.")
    sub = parser.add_subparsers(dest="command", required=True)

    def data_command(name: str, help_text: str, split_default: str = "test") -> argparse.ArgumentParser:
        command = sub.add_parser(name, help=help_text)
        command.add_argument("--data", required=True, help="ASTE file (tokens####[triplets] per line).")
        command.add_argument("--heads", help="Dependency-head sidecar for --data.")
        command.add_argument("--split", choices=get_args(SplitName), default=split_default,
                             help="Split name used for sentence ids (default: %(default)s).")
        return command

    stats = data_command("stats", "Sentence and triplet counts.", split_default="train")
    stats.add_argument("--dev", help="Also report a dev file.")
    stats.add_argument("--test", help="Also report a test file.")
    stats.set_defaults(handler=cmd_stats)

    training = data_command("train", "Train with dev-based early stopping.", split_default="train")
    training.add_argument("--dev", required=True)
    training.add_argument("--test", required=True)
    training.add_argument("--dev-heads")
    training.add_argument("--test-heads")
    training.add_argument("--config", help="JSON or TOML file layered over the preset.")
    training.add_argument("--preset", choices=sorted(PRESETS), default=os.getenv("DESS_PRESET", "paper-main"))
    training.add_argument("--shape", choices=sorted(ENCODER_SHAPES), help="Encoder shape replacing the preset's.")
    training.add_argument("--seed", type=int)
    training.add_argument("--epochs", type=int)
    training.add_argument("--stop-at-f1", type=float, help="End training once dev F1 reaches this value.")
    training.add_argument("--checkpoint", required=True, help="Output checkpoint archive (.npz).")
    training.add_argument("--log", help="Epoch log CSV (default: next to the checkpoint).")
    training.set_defaults(handler=cmd_train)

    evaluate = data_command("eval", "Exact-match metrics and error report.")
    evaluate.add_argument("--checkpoint")
    evaluate.add_argument("--predictions", help="JSON-lines from predict, or an ASTE file aligned with --data.")
    evaluate.set_defaults(handler=cmd_eval)

    predict = data_command("predict", "Write predicted triplets as JSON lines.")
    predict.add_argument("--checkpoint", required=True)
    predict.add_argument("--out", help="Output file (default: stdout).")
    predict.set_defaults(handler=cmd_predict)

    attention = data_command("attn-export", "Export attention matrices as CSV (and PGM).")
    attention.add_argument("--checkpoint", required=True)
    attention.add_argument("--out", required=True, help="Output directory.")
    attention.add_argument("--layer", type=int, default=-1, help="Encoder layer, -1 = last.")
    attention.add_argument("--head", type=_head_selector, default="mean", help="Head index or 'mean'.")
    attention.add_argument("--pgm", action="store_true", help="Also write a grayscale PGM heatmap.")
    attention.set_defaults(handler=cmd_attn_export)

    fetch = sub.add_parser("fetch", help="Download an ASTE-Data-V2 benchmark.")
    fetch.add_argument("--dataset", choices=DATASETS, required=True)
    fetch.add_argument("--out", required=True, help="Destination directory.")
    fetch.add_argument("--overwrite", action="store_true")
    fetch.set_defaults(handler=cmd_fetch)
    return parser


def run(argv: Optional[Sequence[str]] = None, out: Optional[TextIO] = None, err: Optional[TextIO] = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args, out)
    except (DessError, OSError) as exc:
        err.write(f"dess {args.command}: {exc}\n")
        log_event(logger, "command_failed", logging.ERROR, command=args.command, error=str(exc))
        return 1


def main() -> None:
    load_dotenv()
    configure_logging()
    sys.exit(run())


if __name__ == "__main__":
    main()
