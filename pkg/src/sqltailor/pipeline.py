"""Offline store build and the online question-answering engine.

The offline pipeline runs parse -> documents -> proxies -> weights ->
allocation and persists everything as one immutable store directory. The
engine serves questions from a loaded store, routes between the specialized
and generic arms with the ε-greedy policy, joins user feedback back to the
recorded arm, and can rebuild the store atomically (old store and feedback
survive any failed rebuild; a successful one clears the reward buffers).
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .allocation import ContextAllocation, bayes_optimize
from .bandit import ARM_GENERIC, ARM_SPECIALIZED, BanditState, select_pipeline
from .config import EngineConfig
from .documents import (
    SchemaCatalog,
    build_hint_documents,
    build_schema_documents,
    load_column_stats,
    read_schema_file,
    relevance_sets,
    sort_documents,
)
from .embedding import (
    TrainingSet,
    build_relevance_mask,
    compute_proxy_sets,
    fit_weights,
    generate_synthetic_question,
    materialize_tailored,
)
from .providers import (
    EmbeddingProvider,
    GenerativeProvider,
    make_embedding_provider,
    make_generative_provider,
)
from .prompting import TEMPLATE_ID, PromptAssembly, SqlExtraction, assemble_prompt, extract_sql
from .retrieval import (
    MODE_TAILORED,
    RetrievalResult,
    ScoredCorpus,
    make_f1_objective,
    retrieve,
    retrieve_generic,
)
from .sqlparser import QueryRecord, parse_workload, read_query_log
from .store import DocumentStore, load_store, persist_atomically
from .tokens import TokenCounter

logger = logging.getLogger(__name__)


class UnknownQuestionError(KeyError):
    pass


class DuplicateFeedbackError(ValueError):
    pass


@dataclass
class BuildInputs:
    schema_path: str
    logs_path: str
    stats_path: Optional[str] = None


@dataclass
class BuildResult:
    store: DocumentStore
    manifest: dict
    diagnostics: list[str]


def _token_counter(config: EngineConfig, gen_provider: GenerativeProvider) -> TokenCounter:
    if config.token_mode == "provider":
        return TokenCounter(mode="provider", provider_fn=gen_provider.count_tokens)
    return TokenCounter(mode="whitespace")


def build_store_from_sources(
    catalog: SchemaCatalog,
    records: Sequence[QueryRecord],
    config: EngineConfig,
    stats: dict | None = None,
    emb_provider: EmbeddingProvider | None = None,
    gen_provider: GenerativeProvider | None = None,
    build_inputs: dict | None = None,
) -> tuple[DocumentStore, list[str]]:
    """Run the full offline pipeline in memory; returns (store, diagnostics)."""
    emb_provider = emb_provider or make_embedding_provider(
        config.embedding_provider, config.dimension, config.embedding_endpoint
    )
    gen_provider = gen_provider or make_generative_provider(
        config.generative_provider, config.generative_endpoint
    )
    counter = _token_counter(config, gen_provider)

    parsed, diagnostics = parse_workload(records)
    docs = sort_documents(
        build_schema_documents(catalog, stats, counter)
        + build_hint_documents(parsed, counter, known_tables=catalog.table_names())
    )
    doc_ids = [d.id for d in docs]

    raw = np.stack([emb_provider.embed(d.content) for d in docs]).astype(np.float32)

    subs_by_qid = {record.id: subs for record, subs in parsed}
    rel = relevance_sets(docs, subs_by_qid)

    query_embeddings: dict[str, np.ndarray] = {}
    synthq_embeddings: dict[str, np.ndarray] = {}
    synth_texts: dict[str, str] = {}
    for record, subs in parsed:
        query_embeddings[record.id] = emb_provider.embed(record.text).astype(np.float64)
        slices = [
            catalog.tables[t].create_sql for t in subs.tables if t in catalog.tables
        ]
        question = generate_synthetic_question(record, slices, gen_provider)
        if question is None:
            diagnostics.append(f"no synthetic question for {record.id}")
            continue
        synth_texts[record.id] = question.text
        synthq_embeddings[record.id] = emb_provider.embed(question.text).astype(np.float64)

    proxy_sets = compute_proxy_sets(doc_ids, raw, rel, query_embeddings, synthq_embeddings)

    question_ids = sorted(synthq_embeddings)
    mask = build_relevance_mask(question_ids, doc_ids, rel)
    training = TrainingSet(
        proxy_sets, [synthq_embeddings[qid] for qid in question_ids], mask
    )
    fit = fit_weights(training)
    tailored = materialize_tailored(proxy_sets, fit.weights)
    if tailored.size == 0:
        tailored = np.zeros_like(raw)

    weights_json = dict(fit.weights.to_json())
    weights_json.update(
        {
            "initial_objective": fit.initial_objective,
            "final_objective": fit.final_objective,
            "iterations": fit.iterations,
            "converged": fit.converged,
        }
    )

    corpus = ScoredCorpus(docs, tailored, [synthq_embeddings[q] for q in question_ids])
    relevant_per_question = [
        {doc_id for doc_id in doc_ids if qid in rel.get(doc_id, ())}
        for qid in question_ids
    ]
    objective = make_f1_objective(corpus, relevant_per_question)
    bo = bayes_optimize(
        objective, T=config.total_tokens, budget=config.bo_budget, seed=config.seed
    )
    allocation_json = {
        "T": config.total_tokens,
        "p": bo.point.p,
        "p_tbl": bo.point.p_tbl,
        "p_col": bo.point.p_col,
        "t_tbl": bo.allocation.t_tbl,
        "t_col": bo.allocation.t_col,
        "t_hint": bo.allocation.t_hint,
        "objective_kind": objective.kind,
        "score": bo.score,
        "seed": config.seed,
    }

    manifest = {
        "config": config.to_json(),
        "template_id": TEMPLATE_ID,
        "query_ids": sorted(subs_by_qid),
        "synthetic_question_ids": question_ids,
        "diagnostics": diagnostics,
        "build_inputs": build_inputs or {},
        "bo_defaults": {
            "initial_design": "latin_hypercube",
            "kernel": "matern52",
            "acquisition": "expected_improvement",
            "budget": config.bo_budget,
        },
    }
    store = DocumentStore(
        documents=docs,
        dimension=config.dimension,
        emb_raw=raw,
        emb_tailored=tailored,
        weights=weights_json,
        allocation=allocation_json,
        manifest=manifest,
    )
    return store, diagnostics


def build_store(
    inputs: BuildInputs, config: EngineConfig, out_dir: str | Path
) -> BuildResult:
    """File-based build; persists atomically, never clobbering a previous store."""
    catalog = read_schema_file(inputs.schema_path)
    stats = load_column_stats(inputs.stats_path) if inputs.stats_path else None
    records = read_query_log(inputs.logs_path)
    store, diagnostics = build_store_from_sources(
        catalog,
        records,
        config,
        stats=stats,
        build_inputs={
            "schema": str(inputs.schema_path),
            "logs": str(inputs.logs_path),
            "stats": str(inputs.stats_path) if inputs.stats_path else None,
        },
    )
    manifest = persist_atomically(store, out_dir)
    return BuildResult(store=store, manifest=manifest, diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# Serving engine
# ---------------------------------------------------------------------------

def generate_sql(prompt: str, provider: GenerativeProvider) -> SqlExtraction:
    """Invoke the generative provider and pull the SQL out of its response."""
    return extract_sql(provider.generate(prompt))


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class AnswerRecord:
    question_id: str
    question: str
    pipeline_used: str
    documents: list[dict]
    sql: str
    sql_found: bool
    prompt: str
    prompt_tokens: int
    created_at: str
    answered_at: str
    retrieval: Optional[RetrievalResult] = field(repr=False, default=None)

    def to_json(self) -> dict:
        return {
            "question_id": self.question_id,
            "question": self.question,
            "pipeline_used": self.pipeline_used,
            "documents": self.documents,
            "sql": self.sql,
            "sql_found": self.sql_found,
            "prompt_tokens": self.prompt_tokens,
            "created_at": self.created_at,
            "answered_at": self.answered_at,
        }


class Engine:
    """Serves questions over an immutable store; all mutation is serialized."""

    def __init__(
        self,
        store: DocumentStore,
        config: EngineConfig,
        store_dir: Optional[str | Path] = None,
        emb_provider: EmbeddingProvider | None = None,
        gen_provider: GenerativeProvider | None = None,
        clock: Callable[[], str] = _utc_now,
    ):
        self.config = config
        self.store = store
        self.store_dir = Path(store_dir) if store_dir is not None else None
        self.emb_provider = emb_provider or make_embedding_provider(
            config.embedding_provider, config.dimension, config.embedding_endpoint
        )
        self.gen_provider = gen_provider or make_generative_provider(
            config.generative_provider, config.generative_endpoint
        )
        self.clock = clock
        self.bandit = BanditState(
            epsilon=config.epsilon, window=config.window, seed=config.seed
        )
        self.counter = _token_counter(config, self.gen_provider)
        self._answers: dict[str, AnswerRecord] = {}
        self._feedback_seen: set[str] = set()
        self._sequence = 0
        self._lock = threading.RLock()

    @classmethod
    def from_store_dir(
        cls, store_dir: str | Path, config: EngineConfig | None = None, **kw
    ) -> "Engine":
        store = load_store(store_dir)
        if config is None:
            from .config import merge_env

            stored = store.manifest.get("config", {})
            config = merge_env(EngineConfig(**{**EngineConfig().to_json(), **stored}))
        return cls(store, config, store_dir=store_dir, **kw)

    # -- allocation helpers --------------------------------------------------

    def _specialized_allocation(self) -> ContextAllocation:
        alloc = self.store.allocation
        if alloc:
            return ContextAllocation(
                t_tbl=alloc["t_tbl"], t_col=alloc["t_col"], t_hint=alloc["t_hint"], T=alloc["T"]
            )
        T = self.config.total_tokens
        third = T // 3
        return ContextAllocation(t_tbl=third, t_col=third, t_hint=T - 2 * third, T=T)

    def _total_budget(self) -> int:
        if self.store.allocation:
            return int(self.store.allocation["T"])
        return self.config.total_tokens

    # -- serving ---------------------------------------------------------------

    def answer(self, question: str, arm: str = "auto") -> AnswerRecord:
        if not question.strip():
            raise ValueError("question must be non-empty")
        with self._lock:
            store = self.store
            if arm == "auto":
                pipeline = select_pipeline(self.bandit)
            elif arm in (ARM_SPECIALIZED, ARM_GENERIC):
                pipeline = arm
            else:
                raise ValueError(f"unknown arm {arm!r}")
            self._sequence += 1
            question_id = f"a{self._sequence:06d}"
        created_at = self.clock()

        if pipeline == ARM_SPECIALIZED:
            retrieval = retrieve(
                question,
                self._specialized_allocation(),
                store,
                self.emb_provider,
                embedding_mode=MODE_TAILORED,
            )
        else:
            retrieval = retrieve_generic(
                question, self._total_budget(), store, self.emb_provider
            )

        prompt: PromptAssembly = assemble_prompt(question, retrieval, store, self.counter)
        extraction = generate_sql(prompt.rendered, self.gen_provider)

        record = AnswerRecord(
            question_id=question_id,
            question=question,
            pipeline_used=pipeline,
            documents=[
                {"id": d.id, "class": d.doc_class, "score": d.score, "tokens": d.tokens}
                for d in retrieval.all_documents()
            ],
            sql=extraction.sql,
            sql_found=extraction.found,
            prompt=prompt.rendered,
            prompt_tokens=prompt.token_count,
            created_at=created_at,
            answered_at=self.clock(),
            retrieval=retrieval,
        )
        with self._lock:
            self._answers[question_id] = record
        return record

    def record_feedback(self, question_id: str, useful: bool) -> dict:
        with self._lock:
            if question_id not in self._answers:
                raise UnknownQuestionError(question_id)
            if question_id in self._feedback_seen:
                raise DuplicateFeedbackError(question_id)
            self._feedback_seen.add(question_id)
            arm = self._answers[question_id].pipeline_used
            self.bandit.record(arm, 1 if useful else 0)
            return self.bandit.stats()

    def rebuild(self) -> dict:
        """Re-run the offline pipeline from the recorded inputs; atomic swap."""
        inputs = (self.store.manifest or {}).get("build_inputs") or {}
        if not inputs.get("schema") or not inputs.get("logs") or self.store_dir is None:
            raise RuntimeError("store records no build inputs; cannot rebuild")
        result = build_store(
            BuildInputs(
                schema_path=inputs["schema"],
                logs_path=inputs["logs"],
                stats_path=inputs.get("stats"),
            ),
            self.config,
            self.store_dir,
        )
        with self._lock:
            self.store = result.store
            self.bandit.reset()
            self._answers.clear()
            self._feedback_seen.clear()
        return result.manifest

    def stats(self) -> dict:
        with self._lock:
            out = self.bandit.stats()
            out["allocation"] = self.store.allocation
            out["weights"] = self.store.weights
            out["documents"] = len(self.store)
            return out


__all__ = [
    "AnswerRecord",
    "BuildInputs",
    "BuildResult",
    "DuplicateFeedbackError",
    "Engine",
    "UnknownQuestionError",
    "build_store",
    "build_store_from_sources",
    "generate_sql",
]
