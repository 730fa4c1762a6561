"""Evaluation harness: workload splits, top-K recall, retrieval/pipeline reports.

Documents and embeddings are always built from log-side pairs only; test-side
SQL is used exclusively for relevance labeling and scoring.
"""
from __future__ import annotations

import hashlib
import json
import logging
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .allocation import ContextAllocation
from .config import EngineConfig
from .documents import CLASS_TABLE, SchemaCatalog, relevance_sets
from .pipeline import build_store_from_sources
from .prompting import assemble_prompt, extract_sql
from .providers import make_embedding_provider, make_generative_provider
from .retrieval import MODE_RAW, MODE_TAILORED, retrieve
from .sqlparser import LexError, QueryRecord, extract_subcomponents, parse_sql
from .store import DocumentStore, persist_atomically
from .tokens import TokenCounter

logger = logging.getLogger(__name__)


class DisjointImpossible(RuntimeError):
    pass


@dataclass(frozen=True)
class QuestionSqlPair:
    id: str
    question: str
    sql: str


@dataclass
class EvalSplit:
    mode: str  # "random" | "disjoint"
    log_ids: set[str]
    test_ids: set[str]
    seed: int


def read_pairs(path: str | Path) -> tuple[list[QuestionSqlPair], list[str]]:
    """JSON-lines {id, question, sql}; pairs with unparseable SQL are excluded."""
    pairs: list[QuestionSqlPair] = []
    diagnostics: list[str] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        obj = json.loads(line)
        pair = QuestionSqlPair(id=str(obj["id"]), question=obj["question"], sql=obj["sql"])
        try:
            parse_sql(pair.sql)
        except LexError as exc:
            diagnostics.append(f"excluded pair {pair.id} (line {lineno}): {exc}")
            continue
        pairs.append(pair)
    return pairs, diagnostics


def _pair_tables(pair: QuestionSqlPair) -> set[str]:
    return set(extract_subcomponents(parse_sql(pair.sql)).tables)


def split_workload(
    pairs: Sequence[QuestionSqlPair], mode: str, seed: int = 0
) -> EvalSplit:
    """Random: each pair goes to either side with equal probability.
    Disjoint: connected components of the pair/table graph, assigned
    alternately (largest first) so the two sides share no tables."""
    if len(pairs) < 2:
        raise ValueError("need at least 2 pairs to split")

    if mode == "random":
        rng = random.Random(seed)
        log_ids, test_ids = set(), set()
        for pair in pairs:
            (log_ids if rng.random() < 0.5 else test_ids).add(pair.id)
        return EvalSplit(mode=mode, log_ids=log_ids, test_ids=test_ids, seed=seed)

    if mode != "disjoint":
        raise ValueError(f"unknown split mode {mode!r}")

    # Union-find over tables; pairs join all their tables into one component.
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: str, b: str) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    tables_of: dict[str, set[str]] = {}
    for pair in pairs:
        tables = _pair_tables(pair)
        tables_of[pair.id] = tables
        tlist = sorted(tables)
        for a, b in zip(tlist, tlist[1:]):
            union(a, b)

    components: dict[str, list[str]] = {}
    for i, pair in enumerate(pairs):
        tables = tables_of[pair.id]
        root = find(sorted(tables)[0]) if tables else f"__tableless_{i}"
        components.setdefault(root, []).append(pair.id)

    if len(components) < 2:
        raise DisjointImpossible("all pairs share one table component")

    ordered = sorted(components.values(), key=lambda ids: (-len(ids), min(ids)))
    log_ids: set[str] = set()
    test_ids: set[str] = set()
    for i, ids in enumerate(ordered):
        (log_ids if i % 2 == 0 else test_ids).update(ids)

    log_tables = set().union(*(tables_of[i] for i in log_ids)) if log_ids else set()
    test_tables = set().union(*(tables_of[i] for i in test_ids)) if test_ids else set()
    if log_tables & test_tables:
        raise DisjointImpossible("component partition left shared tables")
    return EvalSplit(mode=mode, log_ids=log_ids, test_ids=test_ids, seed=seed)


def topk_recall(
    rankings: dict[str, Sequence[str]],
    relevant: dict[str, set[str]],
    k: int,
) -> float:
    """Fraction of questions whose top-K ranked documents include every
    relevant document of the scored class. No relevant docs counts as 1."""
    if not rankings:
        return 0.0
    hits = 0
    for qid, ranked in rankings.items():
        needed = relevant.get(qid, set())
        if needed <= set(list(ranked)[:k]):
            hits += 1
    return hits / len(rankings)


@dataclass
class EvalReport:
    provenance: dict
    recall: dict
    configs: list[dict]
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "provenance": self.provenance,
            "recall": self.recall,
            "configs": self.configs,
            "warnings": self.warnings,
        }

    def summary(self) -> str:
        lines = ["configuration            precision  tokens   recall-ready"]
        for cfg in self.configs:
            name = f"{cfg['embedding']}/{cfg['allocation']}"
            precision = cfg.get("precision")
            tokens = cfg.get("mean_prompt_tokens")
            lines.append(
                f"{name:<24} {precision if precision is None else f'{precision:.3f}':>9}"
                f"  {tokens if tokens is None else f'{tokens:.0f}':>6}"
            )
        for mode, rates in self.recall.items():
            for k, rate in rates.items():
                lines.append(f"top-{k} table recall [{mode}]: "
                             f"{'n/a' if rate is None else f'{rate:.3f}'}")
        return "\n".join(lines)


def _manifest_hash(manifest: dict) -> str:
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def build_log_store(
    pairs: Sequence[QuestionSqlPair],
    split: EvalSplit,
    catalog: SchemaCatalog,
    config: EngineConfig,
    stats: dict | None = None,
    out_dir: str | Path | None = None,
) -> DocumentStore:
    """Build the store from log-side pairs only (ids become query ids)."""
    records = [
        QueryRecord(id=p.id, text=p.sql) for p in pairs if p.id in split.log_ids
    ]
    store, _diagnostics = build_store_from_sources(catalog, records, config, stats=stats)
    if out_dir is not None:
        persist_atomically(store, out_dir)
    return store


def run_eval(
    store: DocumentStore,
    split: EvalSplit,
    pairs: Sequence[QuestionSqlPair],
    config: EngineConfig,
    ks: Sequence[int] = (1, 5),
    with_generation: bool = False,
    executor: Optional[Callable[[str], object]] = None,
) -> EvalReport:
    """Score raw vs tailored embeddings under fixed vs optimized allocations."""
    manifest_query_ids = set(store.manifest.get("query_ids", []))
    if not manifest_query_ids <= split.log_ids:
        raise ValueError("store was not built from log-side pairs only")
    if split.mode == "disjoint":
        log_tables = {
            t for p in pairs if p.id in split.log_ids for t in _pair_tables(p)
        }
        test_tables = {
            t for p in pairs if p.id in split.test_ids for t in _pair_tables(p)
        }
        if log_tables & test_tables:
            raise DisjointImpossible("log and test table sets overlap")

    test_pairs = [p for p in pairs if p.id in split.test_ids]
    provenance = {
        "manifest_hash": _manifest_hash(store.manifest),
        "seed": split.seed,
        "split_mode": split.mode,
        "log_pairs": len(split.log_ids),
        "test_pairs": len(test_pairs),
    }

    modes = (MODE_RAW, MODE_TAILORED)
    if not test_pairs:
        return EvalReport(
            provenance=provenance,
            recall={mode: {str(k): None for k in ks} for mode in modes},
            configs=[
                {"embedding": mode, "allocation": alloc, "precision": None,
                 "mean_prompt_tokens": None, "mean_retrieval_seconds": None}
                for mode in modes
                for alloc in ("fixed", "bo")
            ],
            warnings=["empty test set; rates are null"],
        )

    emb_provider = make_embedding_provider(
        config.embedding_provider, config.dimension, config.embedding_endpoint
    )
    counter = TokenCounter()

    subs_by_qid = {p.id: extract_subcomponents(parse_sql(p.sql)) for p in test_pairs}
    rel_by_doc = relevance_sets(store.documents, subs_by_qid)
    relevant_all: dict[str, set[str]] = {p.id: set() for p in test_pairs}
    relevant_tables: dict[str, set[str]] = {p.id: set() for p in test_pairs}
    for doc in store.documents:
        for qid in rel_by_doc.get(doc.id, ()):
            relevant_all[qid].add(doc.id)
            if doc.doc_class == CLASS_TABLE:
                relevant_tables[qid].add(doc.id)

    question_embs = {p.id: emb_provider.embed(p.question).astype(np.float64) for p in test_pairs}

    # Table-document rankings per embedding mode (allocation-independent).
    table_docs = [d for d in store.documents if d.doc_class == CLASS_TABLE]
    table_rows = [store.row_of[d.id] for d in table_docs]
    recall: dict[str, dict[str, float]] = {}
    for mode in modes:
        matrix = (store.tailored_matrix() if mode == MODE_TAILORED else store.raw_matrix())
        matrix = matrix.astype(np.float64)[table_rows]
        rankings: dict[str, list[str]] = {}
        for pair in test_pairs:
            q = question_embs[pair.id]
            norms = np.linalg.norm(matrix, axis=1)
            qnorm = float(np.linalg.norm(q))
            with np.errstate(divide="ignore", invalid="ignore"):
                sims = (matrix @ q) / (norms * qnorm) if qnorm > 0 else np.zeros(len(table_docs))
            sims = np.where(norms == 0.0, 0.0, sims)
            order = sorted(
                range(len(table_docs)),
                key=lambda i: (-sims[i], -table_docs[i].observed_count, table_docs[i].id),
            )
            rankings[pair.id] = [table_docs[i].id for i in order]
        recall[mode] = {
            str(k): topk_recall(rankings, relevant_tables, k) for k in ks
        }

    T = int(store.allocation["T"]) if store.allocation else config.total_tokens
    third = T // 3
    fixed_alloc = ContextAllocation(t_tbl=third, t_col=third, t_hint=T - 2 * third, T=T)
    bo_alloc = (
        ContextAllocation(
            t_tbl=store.allocation["t_tbl"],
            t_col=store.allocation["t_col"],
            t_hint=store.allocation["t_hint"],
            T=T,
        )
        if store.allocation
        else fixed_alloc
    )
    gen_provider = (
        make_generative_provider(config.generative_provider, config.generative_endpoint)
        if with_generation
        else None
    )

    configs = []
    for mode in modes:
        for alloc_name, alloc in (("fixed", fixed_alloc), ("bo", bo_alloc)):
            precisions: list[float] = []
            tokens: list[int] = []
            seconds: list[float] = []
            matches: list[bool] = []
            executions: list[bool] = []
            for pair in test_pairs:
                start = time.perf_counter()
                result = retrieve(pair.question, alloc, store, emb_provider, embedding_mode=mode)
                seconds.append(time.perf_counter() - start)
                retrieved = result.document_ids()
                needed = relevant_all[pair.id]
                if retrieved:
                    precisions.append(len(retrieved & needed) / len(retrieved))
                else:
                    precisions.append(0.0)
                prompt = assemble_prompt(pair.question, result, store, counter)
                tokens.append(prompt.token_count)
                if gen_provider is not None:
                    response = gen_provider.generate(prompt.rendered)
                    extraction = extract_sql(response)
                    try:
                        generated = extract_subcomponents(parse_sql(extraction.sql))
                        matches.append(generated == subs_by_qid[pair.id])
                    except LexError:
                        matches.append(False)
                    if executor is not None:
                        # Execution-match accuracy via the pluggable executor.
                        try:
                            executions.append(
                                executor(extraction.sql) == executor(pair.sql)
                            )
                        except Exception:
                            executions.append(False)
            entry = {
                "embedding": mode,
                "allocation": alloc_name,
                "precision": float(np.mean(precisions)),
                "mean_prompt_tokens": float(np.mean(tokens)),
                "mean_retrieval_seconds": float(np.mean(seconds)),
            }
            if gen_provider is not None:
                entry["exact_match"] = float(np.mean(matches))
                if executor is not None:
                    entry["execution_match"] = float(np.mean(executions))
            configs.append(entry)

    return EvalReport(provenance=provenance, recall=recall, configs=configs)
