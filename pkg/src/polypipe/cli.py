"""Command-line interface.

Subcommands: ``train`` (build or extend a package), ``eval`` (score a
package against a gold treebank), ``annotate`` (raw or pretokenized input to
JSON or CoNLL-U), and ``package inspect``.  Package arguments may be a
directory or a bare name resolved under $POLYPIPE_CACHE_DIR (default
~/.cache/polypipe).

Exit codes: 0 success, 1 usage error, 2 data error, 3 checksum error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from polypipe import conllu, document, ner as ner_mod, packaging, pipeline, scorer

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CHECKSUM = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit2(message)


class SystemExit2(Exception):
    pass


def cache_dir() -> Path:
    return Path(os.environ.get("POLYPIPE_CACHE_DIR",
                               Path.home() / ".cache" / "polypipe"))


def resolve_package(arg: str) -> Path:
    path = Path(arg)
    if path.exists():
        return path
    candidate = cache_dir() / arg
    if candidate.exists():
        return candidate
    raise pipeline.PipelineError(
        f"package {arg!r} not found (looked in {cache_dir()})")


def build_parser() -> _Parser:
    parser = _Parser(prog="polypipe",
                     description="multilingual NLP pipeline with a shared "
                                 "encoder and per-language adapter bundles")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train bundles into a package")
    p_train.add_argument("--mode", default="adapters",
                         choices=["adapters", "multilingual", "no-adapters"])
    p_train.add_argument("--component", nargs="+", default=["all"],
                         choices=["splitter", "mwt", "tagparse", "lemma",
                                  "ner", "all"])
    p_train.add_argument("--treebank", nargs="+", required=True)
    p_train.add_argument("--lang", nargs="+", required=True)
    p_train.add_argument("--ner-data", nargs="*", default=[],
                         help="LANG=PATH pairs of token/tag corpora")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--pretrain-corpus", default=None,
                         help="text file for vocabulary/encoder pretraining")
    p_train.add_argument("--vocab-size", type=int, default=None)
    p_train.add_argument("--pretrain-steps", type=int, default=None)
    p_train.add_argument("--epochs", type=int, default=None,
                         help="override every per-component epoch count")
    p_train.add_argument("--max-len", type=int, default=None)

    p_eval = sub.add_parser("eval", help="score a package on a gold treebank")
    p_eval.add_argument("--package", required=True)
    p_eval.add_argument("--lang", required=True)
    p_eval.add_argument("--gold", required=True)
    p_eval.add_argument("--ner", default=None)
    p_eval.add_argument("--json", action="store_true",
                        help="machine-readable report")
    p_eval.add_argument("--timing", action="store_true",
                        help="append a throughput report")

    p_ann = sub.add_parser("annotate", help="annotate text from a package")
    p_ann.add_argument("--package", required=True)
    p_ann.add_argument("--lang", required=True)
    p_ann.add_argument("--pretokenized", action="store_true",
                       help="input lines are sentences of space-separated "
                            "tokens; the splitter is bypassed")
    p_ann.add_argument("--format", default="json", choices=["json", "conllu"])
    p_ann.add_argument("--input", default=None,
                       help="input file (default: standard input)")

    p_pkg = sub.add_parser("package", help="package utilities")
    pkg_sub = p_pkg.add_subparsers(dest="pkg_command", required=True)
    p_inspect = pkg_sub.add_parser("inspect",
                                   help="print manifest, sizes, checksums")
    p_inspect.add_argument("dir")

    return parser


def _cmd_train(args) -> int:
    hyper = pipeline.TrainConfig()
    if args.vocab_size is not None:
        hyper.vocab_size = args.vocab_size
    if args.pretrain_steps is not None:
        hyper.pretrain_steps = args.pretrain_steps
    if args.max_len is not None:
        hyper.max_len = args.max_len
    if args.epochs is not None:
        hyper.splitter_epochs = args.epochs
        hyper.tagparse_epochs = args.epochs
        hyper.ner_epochs = args.epochs
        hyper.transducer_epochs = args.epochs
    ner_paths = {}
    for item in args.ner_data:
        lang, _, path = item.partition("=")
        if not path:
            raise pipeline.PipelineError(
                f"--ner-data expects LANG=PATH, got {item!r}")
        ner_paths[lang] = path
    corpus = None
    if args.pretrain_corpus:
        corpus = Path(args.pretrain_corpus).read_text(encoding="utf-8")
    log = pipeline.train(args.mode.replace("-", "_"), args.component,
                         args.treebank, args.lang, args.out, hyper,
                         args.seed, ner_paths or None, corpus)
    print(json.dumps(log, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_eval(args) -> int:
    pkg = resolve_package(args.package)
    pl, _ = pipeline.load_package(pkg, languages=[args.lang])
    gold = conllu.load_conllu_file(args.gold)
    ner_corpus = None
    if args.ner:
        ner_corpus = ner_mod.parse_ner_corpus(
            Path(args.ner).read_text(encoding="utf-8"))
    report = pipeline.evaluate(pl, args.lang, gold, ner_corpus)
    print(report.to_json() if args.json else report.format_table())
    if args.timing:
        recon = conllu.reconstruct_document(gold)
        print(json.dumps(pipeline.timing_report(pl, args.lang, [recon.text]),
                         indent=2))
    return EXIT_OK


def _cmd_annotate(args) -> int:
    pkg = resolve_package(args.package)
    pl, _ = pipeline.load_package(pkg, languages=[args.lang])
    if args.input:
        raw = Path(args.input).read_text(encoding="utf-8")
    else:
        raw = sys.stdin.read()
    if args.pretokenized:
        sentences = [line.split() for line in raw.splitlines() if line.strip()]
        doc = pl.annotate(args.lang, pretokenized=sentences)
    else:
        doc = pl.annotate(args.lang, text=raw)
    if args.format == "json":
        print(json.dumps(document.to_json_dict(doc), ensure_ascii=False,
                         indent=2))
    else:
        sys.stdout.write(conllu.serialize_conllu(document.to_conllu(doc)))
    return EXIT_OK


def _cmd_package(args) -> int:
    if args.pkg_command == "inspect":
        info = packaging.inspect_package(resolve_package(args.dir))
        print(json.dumps(info, indent=2, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "annotate":
            return _cmd_annotate(args)
        if args.command == "package":
            return _cmd_package(args)
        return EXIT_USAGE
    except SystemExit2 as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except packaging.ChecksumError as exc:
        print(f"checksum error: {exc}", file=sys.stderr)
        return EXIT_CHECKSUM
    except (conllu.ConlluError, pipeline.DataError, pipeline.PipelineError,
            packaging.PackageError, scorer.ScorerError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
