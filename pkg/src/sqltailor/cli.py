"""Command line interface: build, ask, serve, eval, gen-corpus."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import EngineConfig, load_config
from .documents import load_column_stats, read_schema_file
from .evaluation import build_log_store, read_pairs, run_eval, split_workload
from .pipeline import BuildInputs, Engine, build_store
from .synthetic import generate_corpus

logger = logging.getLogger(__name__)


def _base_config(args) -> EngineConfig:
    config = load_config(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    if getattr(args, "tokens", None) is not None:
        config = replace(config, total_tokens=args.tokens)
    return config


def _cmd_build(args) -> int:
    config = _base_config(args)
    result = build_store(
        BuildInputs(schema_path=args.schema, logs_path=args.logs, stats_path=args.stats),
        config,
        args.out,
    )
    for diag in result.diagnostics:
        print(f"warning: {diag}", file=sys.stderr)
    counts = result.manifest["counts"]
    print(
        f"built store at {args.out}: {counts['table']} table docs, "
        f"{counts['column']} column docs, {counts['hint']} hint docs"
    )
    alloc = result.store.allocation or {}
    print(
        f"allocation: t_tbl={alloc.get('t_tbl')} t_col={alloc.get('t_col')} "
        f"t_hint={alloc.get('t_hint')} (T={alloc.get('T')}, score={alloc.get('score'):.4f})"
    )
    return 0


def _cmd_ask(args) -> int:
    config = load_config(args.config) if args.config else None
    engine = Engine.from_store_dir(args.store, config=config)
    record = engine.answer(args.question, arm=args.arm)
    print(f"pipeline: {record.pipeline_used}")
    print(f"question_id: {record.question_id}")
    if args.show_prompt:
        print("--- prompt ---")
        print(record.prompt)
        print("--- end prompt ---")
    print(record.sql if record.sql_found else f"(no SQL found) {record.sql}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = load_config(args.config) if args.config else None
    engine = Engine.from_store_dir(args.store, config=config)
    app = create_app(engine)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_eval(args) -> int:
    config = _base_config(args)
    pairs, diagnostics = read_pairs(args.pairs)
    for diag in diagnostics:
        print(f"warning: {diag}", file=sys.stderr)
    split = split_workload(pairs, args.split, seed=config.seed)
    catalog = read_schema_file(args.schema)
    stats = load_column_stats(args.stats) if args.stats else None
    store = build_log_store(pairs, split, catalog, config, stats=stats, out_dir=args.store)
    ks = tuple(int(k) for k in args.k.split(","))
    report = run_eval(store, split, pairs, config, ks=ks, with_generation=args.exact_match)
    report_path = Path(args.store) / "eval_report.json"
    report_path.write_text(
        json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(report.summary())
    print(f"report written to {report_path}")
    return 0


def _cmd_gen_corpus(args) -> int:
    bundle = generate_corpus(seed=args.seed, n_tables=args.tables, n_pairs=args.pairs)
    paths = bundle.write(args.out)
    print(json.dumps(paths, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sqltailor")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="run the offline pipeline into a store directory")
    p.add_argument("--schema", required=True, help="file of CREATE TABLE statements")
    p.add_argument("--stats", default=None, help="JSON column-stats sidecar")
    p.add_argument("--logs", required=True, help="SQL query log")
    p.add_argument("--out", required=True, help="store output directory")
    p.add_argument("--tokens", type=int, default=None, help="total prompt token limit T")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("ask", help="answer one question against a built store")
    p.add_argument("question")
    p.add_argument("--store", required=True)
    p.add_argument("--arm", choices=("auto", "specialized", "generic"), default="auto")
    p.add_argument("--show-prompt", action="store_true")
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_ask)

    p = sub.add_parser("serve", help="serve the HTTP JSON API")
    p.add_argument("--store", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("eval", help="split pairs, build a log-side store, evaluate")
    p.add_argument("--store", required=True, help="directory for the log-side store + report")
    p.add_argument("--pairs", required=True, help="JSON-lines {id, question, sql}")
    p.add_argument("--schema", required=True)
    p.add_argument("--stats", default=None)
    p.add_argument("--split", choices=("random", "disjoint"), default="random")
    p.add_argument("--k", default="1,5", help="comma-separated recall cutoffs")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tokens", type=int, default=None)
    p.add_argument("--exact-match", action="store_true", help="also score generated SQL")
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("gen-corpus", help="write a synthetic benchmark corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--tables", type=int, default=50)
    p.add_argument("--pairs", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen_corpus)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
