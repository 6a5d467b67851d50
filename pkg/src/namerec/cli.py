"""Command line front end.

Stages exchange files.  Next to each artifact a ``<file>.meta.json``
sidecar records the producing stage, its effective configuration, the
configuration hash and the artifact's content hash; a later stage
refuses an input whose sidecar names the wrong stage or whose content
no longer matches.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .acg import build_acg, read_graph, write_graph
from .corpus import cleanse, extract_corpus, read_records, scan_corpus, write_records
from .embed import TrainConfig, TrainingDivergedError, read_table, train, write_table
from .evaluation import cross_validate, plan_synthetic_corpus, render_synthetic_corpus, write_units
from .lexicon import Lexicon
from .recommend import NoKnownCalleesError, parse_query, recommend

logger = logging.getLogger("namerec")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_FORMAT = 4
EXIT_RUNTIME = 5

ENV_CORPUS = "NAMEREC_CORPUS"
ENV_LEXICON = "NAMEREC_LEXICON"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class PipelineConfig:
    dim: int = 100
    loops: int = 5000
    batch_size: int = 200
    negatives: int = 10
    lr0: float = 0.75
    lr_decay: float = 0.04
    alpha: float = 0.5
    seed: int = 0
    decay_per: str = "epoch"
    loop_unit: str = "step"
    trace_every: int = 100
    negative_eta: str = "lr/k"
    corpus: Optional[str] = None
    out: Optional[str] = None
    top_k: int = 10
    folds: int = 5
    lexicon: Optional[str] = None
    workers: int = 1

    def train_config(self) -> TrainConfig:
        names = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{k: v for k, v in asdict(self).items() if k in names})


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def write_meta(path: Path, stage: str, config: dict) -> None:
    meta = {
        "stage": stage,
        "config": config,
        "config_hash": config_hash(config),
        "sha256": _file_hash(path),
        "version": __version__,
    }
    _meta_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def check_input(path: Path, stage: str) -> Optional[dict]:
    """Validate ``path`` against its sidecar; return the sidecar (or None)."""
    if not path.is_file():
        raise CliError(f"input file not found: {path}", EXIT_MISSING_INPUT)
    meta_file = _meta_path(path)
    if not meta_file.is_file():
        logger.warning("%s has no metadata sidecar; accepting it unchecked", path)
        return None
    try:
        meta = json.loads(meta_file.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError(f"{meta_file}: unreadable metadata ({exc})", EXIT_FORMAT) from None
    if meta.get("stage") != stage:
        raise CliError(
            f"{path} was produced by stage {meta.get('stage')!r}, expected {stage!r}", EXIT_FORMAT
        )
    if meta.get("sha256") != _file_hash(path):
        raise CliError(f"{path} does not match the content hash in {meta_file}", EXIT_FORMAT)
    if meta.get("config", {}) and meta.get("config_hash") != config_hash(meta["config"]):
        raise CliError(f"{meta_file}: config hash does not match its config", EXIT_FORMAT)
    return meta


def _upstream(meta: Optional[dict]) -> Optional[str]:
    return meta["config_hash"] if meta else None


def _load_lexicon(path: Optional[str]) -> Lexicon:
    if path is None:
        return Lexicon.load()
    p = Path(path)
    if not p.is_file():
        raise CliError(f"lexicon file not found: {p}", EXIT_MISSING_INPUT)
    return Lexicon.load(p)


def _train_config_from(args) -> TrainConfig:
    try:
        cfg = PipelineConfig(
            dim=args.dim, loops=args.loops, batch_size=args.batch, negatives=args.negatives,
            lr0=args.lr, lr_decay=args.lr_decay, alpha=args.alpha, seed=args.seed,
            decay_per=args.decay_per, loop_unit=args.loop_unit, trace_every=args.trace_every,
            negative_eta=args.negative_eta,
        )
        return cfg.train_config()
    except ValueError as exc:
        raise CliError(f"invalid training configuration: {exc}", EXIT_USAGE) from None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _extract_pairs(corpus: Optional[str], extensions, workers: int, do_cleanse: bool):
    if corpus is None:
        raise CliError(f"no corpus given (use --corpus or ${ENV_CORPUS})", EXIT_USAGE)
    root = Path(corpus)
    if not root.is_dir():
        raise CliError(f"corpus directory not found: {root}", EXIT_MISSING_INPUT)
    skipped: list[str] = []
    units = scan_corpus(root, extensions, skipped=skipped)
    pairs = extract_corpus(units, workers=workers)
    dropped = {"test_package": 0, "serial_numbered": 0}
    if do_cleanse:
        pairs, dropped = cleanse(pairs)
    stats = {"files": len(units), "undecodable_files": len(skipped), "dropped_files": dropped}
    return pairs, stats


def cmd_extract(args) -> int:
    pairs, stats = _extract_pairs(args.corpus, args.ext, args.workers, not args.no_cleanse)
    out = Path(args.out)
    with open(out, "w", encoding="utf-8", newline="\n") as fp:
        n = write_records((r for _u, rs in pairs for r in rs), fp)
    write_meta(out, "records", {"extensions": list(args.ext), "cleanse": not args.no_cleanse})
    logger.info("%d records from %d files (%s)", n, stats["files"], stats["dropped_files"])
    return EXIT_OK


def cmd_graph(args) -> int:
    src = Path(args.records)
    meta = check_input(src, "records")
    try:
        with open(src, encoding="utf-8") as fp:
            records = read_records(fp)
    except ValueError as exc:
        raise CliError(f"{src}: {exc}", EXIT_FORMAT) from None
    g = build_acg(records)
    out = Path(args.out)
    with open(out, "w", encoding="utf-8", newline="\n") as fp:
        write_graph(g, fp)
    write_meta(out, "graph", {"upstream": _upstream(meta)})
    logger.info("graph: %d nodes, %d edges", len(g.nodes), len(g.edges))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _train_config_from(args)
    src = Path(args.graph)
    meta = check_input(src, "graph")
    try:
        with open(src, encoding="utf-8") as fp:
            g = read_graph(fp)
    except ValueError as exc:
        raise CliError(f"{src}: {exc}", EXIT_FORMAT) from None
    if len(g) == 0:
        raise CliError(f"{src}: graph is empty", EXIT_FORMAT)
    try:
        result = train(g, cfg)
    except TrainingDivergedError as exc:
        raise CliError(str(exc), EXIT_RUNTIME) from None
    config = {"train": cfg.to_dict(), "upstream": _upstream(meta)}
    out = Path(args.out)
    with open(out, "w", encoding="utf-8", newline="\n") as fp:
        write_table(result.table, fp)
    write_meta(out, "embeddings", config)
    if args.trace:
        trace = Path(args.trace)
        with open(trace, "w", encoding="utf-8", newline="\n") as fp:
            fp.write("step,loss\n")
            for step, value in result.loss_trace:
                fp.write(f"{step},{value!r}\n")
        write_meta(trace, "loss_trace", config)
    first, last = result.loss_trace[0][1], result.loss_trace[-1][1]
    logger.info("trained %d vectors; loss %.6g -> %.6g", len(result.table), first, last)
    return EXIT_OK


def cmd_recommend(args) -> int:
    src = Path(args.embeddings)
    check_input(src, "embeddings")
    try:
        with open(src, encoding="utf-8") as fp:
            table = read_table(fp)
    except ValueError as exc:
        raise CliError(f"{src}: {exc}", EXIT_FORMAT) from None

    if args.query_callees is not None:
        callees = {c.strip() for c in args.query_callees.split(",") if c.strip()}
    else:
        if args.query_file == "-":
            text = sys.stdin.read()
        elif args.query_file is not None:
            qpath = Path(args.query_file)
            if not qpath.is_file():
                raise CliError(f"query file not found: {qpath}", EXIT_MISSING_INPUT)
            text = qpath.read_text(encoding="utf-8")
        else:
            text = args.query
        try:
            callees = parse_query(text)
        except ValueError as exc:
            raise CliError(f"bad query: {exc}", EXIT_FORMAT) from None
    try:
        result = recommend(table, callees, args.top)
    except NoKnownCalleesError as exc:
        raise CliError(
            f"no known callees in query (unknown: {', '.join(exc.skipped) or 'none'})", EXIT_RUNTIME
        ) from None
    text = json.dumps(result.to_dict(), indent=2, ensure_ascii=False) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _train_config_from(args)
    lexicon = _load_lexicon(args.lexicon)
    if args.folds < 2:
        raise CliError("--folds must be >= 2", EXIT_USAGE)
    pairs, stats = _extract_pairs(args.corpus, args.ext, args.workers, not args.no_cleanse)
    try:
        report, tables = cross_validate(pairs, args.folds, args.seed, cfg, args.top, lexicon)
    except TrainingDivergedError as exc:
        raise CliError(str(exc), EXIT_RUNTIME) from None
    except ValueError as exc:
        raise CliError(str(exc), EXIT_RUNTIME) from None
    config = {
        "train": cfg.to_dict(),
        "folds": args.folds,
        "seed": args.seed,
        "top_k": args.top,
        "extensions": list(args.ext),
        "cleanse": not args.no_cleanse,
        "lexicon_hash": lexicon.hash,
    }
    report.config = {**config, "config_hash": config_hash(config)}
    report.cleansing = stats

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in (
        ("report.json", report.to_json()),
        ("report.txt", report.to_text()),
        ("per_verb.csv", report.per_verb_csv()),
    ):
        path = out / name
        path.write_text(text, encoding="utf-8", newline="\n")
        write_meta(path, "report", config)
    for i, table in enumerate(tables):
        path = out / f"fold{i + 1}.emb"
        with open(path, "w", encoding="utf-8", newline="\n") as fp:
            write_table(table, fp)
        write_meta(path, "embeddings", {**config, "fold": i + 1})
    sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        plan = plan_synthetic_corpus(
            args.families, args.methods_per_family, args.pool_size, args.seed,
            methods_per_file=args.methods_per_file,
        )
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    units = render_synthetic_corpus(plan, args.seed)
    write_units(units, args.out)
    logger.info("wrote %d files to %s", len(units), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    d = TrainConfig()
    p.add_argument("--dim", type=int, default=d.dim, help="embedding dimension")
    p.add_argument("--loops", type=int, default=d.loops, help="number of SGD steps (or epochs, see --loop-unit)")
    p.add_argument("--batch", type=int, default=d.batch_size, help="methods per minibatch")
    p.add_argument("--negatives", type=int, default=d.negatives, help="negative samples per method")
    p.add_argument("--lr", type=float, default=d.lr0, help="initial learning rate")
    p.add_argument("--lr-decay", type=float, default=d.lr_decay, help="multiplicative learning-rate decay")
    p.add_argument("--alpha", type=float, default=d.alpha, help="weight of the callee-mean term")
    p.add_argument("--seed", type=int, default=d.seed, help="random seed")
    p.add_argument("--decay-per", choices=("epoch", "step"), default=d.decay_per,
                   help="apply the decay after every epoch or every step")
    p.add_argument("--loop-unit", choices=("step", "epoch"), default=d.loop_unit,
                   help="what --loops counts")
    p.add_argument("--trace-every", type=int, default=d.trace_every,
                   help="record the full loss every N steps (0: start and end only)")
    p.add_argument("--negative-eta", choices=("lr/k", "lr"), default=d.negative_eta,
                   help="step size of each negative update")


def _add_corpus_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", default=os.environ.get(ENV_CORPUS),
                   help=f"source tree to scan (env ${ENV_CORPUS})")
    p.add_argument("--ext", nargs="+", default=[".java"], help="source file extensions")
    p.add_argument("--workers", type=int, default=1, help="parallel extraction processes")
    p.add_argument("--no-cleanse", action="store_true", help="keep test packages and serial-numbered files")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="namerec", description="Method-name recommendation from call-graph embeddings.",
        formatter_class=fmt,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("extract", help="corpus -> method records (JSON Lines)", formatter_class=fmt)
    _add_corpus_flags(p)
    p.add_argument("--out", required=True, help="records file to write")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("graph", help="records -> aggregated call graph", formatter_class=fmt)
    p.add_argument("--records", required=True, help="records file from 'extract'")
    p.add_argument("--out", required=True, help="graph file to write")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("train", help="graph -> embedding table", formatter_class=fmt)
    p.add_argument("--graph", required=True, help="graph file from 'graph'")
    p.add_argument("--out", required=True, help="embedding file to write")
    p.add_argument("--trace", default=None, help="optional loss trace CSV")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("recommend", help="embedding table + query -> candidates", formatter_class=fmt)
    p.add_argument("--embeddings", required=True, help="embedding file from 'train'")
    q = p.add_mutually_exclusive_group(required=True)
    q.add_argument("--query-callees", default=None, help="comma-separated callee names")
    q.add_argument("--query", default=None, help='JSON {"callees": [...]} or a method body')
    q.add_argument("--query-file", default=None, help="file holding a query ('-' for stdin)")
    p.add_argument("--top", type=int, default=10, help="number of candidates")
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("evaluate", help="k-fold cross-validated evaluation", formatter_class=fmt)
    _add_corpus_flags(p)
    p.add_argument("--out-dir", default="evaluation", help="directory for reports and fold tables")
    p.add_argument("--folds", type=int, default=5, help="number of cross-validation folds")
    p.add_argument("--top", type=int, default=10, help="candidates considered per method")
    p.add_argument("--lexicon", default=os.environ.get(ENV_LEXICON),
                   help=f"verb lexicon file (env ${ENV_LEXICON}; packaged list when unset)")
    _add_train_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="write a synthetic corpus", formatter_class=fmt)
    p.add_argument("--out", required=True, help="directory to write into")
    p.add_argument("--families", type=int, default=10, help="number of method families")
    p.add_argument("--methods-per-family", type=int, default=20, help="methods per family")
    p.add_argument("--pool-size", type=int, default=15, help="callee names per family")
    p.add_argument("--methods-per-file", type=int, default=5, help="methods per source file")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"namerec {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
