"""Question-time document retrieval.

Documents are scored by cosine similarity against the question embedding
(always produced by the raw embedding provider) and each class budget is
filled independently in descending score order with a skip-and-continue
policy: a document that does not fit the remaining budget is skipped, later
smaller ones may still fit.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .allocation import AllocationObjective, ContextAllocation
from .documents import CLASS_COLUMN, CLASS_TABLE, Document, HINT_CLASSES
from .providers import EmbeddingProvider
from .store import DocumentStore

logger = logging.getLogger(__name__)

BUCKET_TABLES = "tables"
BUCKET_COLUMNS = "columns"
BUCKET_HINTS = "hints"
BUCKETS = (BUCKET_TABLES, BUCKET_COLUMNS, BUCKET_HINTS)

MODE_RAW = "raw"
MODE_TAILORED = "tailored"


def bucket_of(doc_class: str) -> str:
    if doc_class == CLASS_TABLE:
        return BUCKET_TABLES
    if doc_class == CLASS_COLUMN:
        return BUCKET_COLUMNS
    if doc_class in HINT_CLASSES:
        return BUCKET_HINTS
    raise ValueError(f"unknown document class {doc_class!r}")


@dataclass(frozen=True)
class RetrievedDoc:
    id: str
    doc_class: str
    score: float
    tokens: int


@dataclass
class RetrievalResult:
    buckets: dict[str, list[RetrievedDoc]] = field(default_factory=dict)
    tokens_used: dict[str, int] = field(default_factory=dict)
    question_embedding: np.ndarray | None = None
    mode: str = MODE_TAILORED

    def all_documents(self) -> list[RetrievedDoc]:
        out: list[RetrievedDoc] = []
        for bucket in BUCKETS:
            out.extend(self.buckets.get(bucket, []))
        return out

    def document_ids(self) -> set[str]:
        return {d.id for d in self.all_documents()}


def _similarities(matrix: np.ndarray, query: np.ndarray) -> np.ndarray:
    if matrix.shape[0] == 0:
        return np.zeros(0)
    norms = np.linalg.norm(matrix, axis=1)
    qnorm = float(np.linalg.norm(query))
    if qnorm == 0.0:
        logger.debug("zero question embedding; all similarities 0")
        return np.zeros(matrix.shape[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = (matrix @ query) / (norms * qnorm)
    sims[norms == 0.0] = 0.0
    return sims


def _rank(docs: Sequence[Document], scores: Sequence[float]) -> list[tuple[Document, float]]:
    order = sorted(
        range(len(docs)),
        key=lambda i: (-scores[i], -docs[i].observed_count, docs[i].id),
    )
    return [(docs[i], float(scores[i])) for i in order]


def greedy_fill(
    ranked: Iterable[tuple[Document, float]], budget: int
) -> tuple[list[RetrievedDoc], int]:
    picked: list[RetrievedDoc] = []
    used = 0
    for doc, score in ranked:
        if used + doc.token_count > budget:
            continue
        picked.append(
            RetrievedDoc(id=doc.id, doc_class=doc.doc_class, score=score, tokens=doc.token_count)
        )
        used += doc.token_count
    return picked, used


def retrieve(
    question_text: str,
    allocation: ContextAllocation,
    store: DocumentStore,
    provider: EmbeddingProvider,
    embedding_mode: str = MODE_TAILORED,
) -> RetrievalResult:
    """Fill each class budget independently in decreasing similarity order."""
    query = provider.embed(question_text).astype(np.float64)
    result = RetrievalResult(question_embedding=query, mode=embedding_mode)
    if len(store) == 0:
        result.buckets = {b: [] for b in BUCKETS}
        result.tokens_used = {b: 0 for b in BUCKETS}
        return result

    matrix = (
        store.tailored_matrix() if embedding_mode == MODE_TAILORED else store.raw_matrix()
    ).astype(np.float64)
    sims = _similarities(matrix, query)

    budgets = {
        BUCKET_TABLES: allocation.t_tbl,
        BUCKET_COLUMNS: allocation.t_col,
        BUCKET_HINTS: allocation.t_hint,
    }
    for bucket in BUCKETS:
        idxs = [i for i, d in enumerate(store.documents) if bucket_of(d.doc_class) == bucket]
        ranked = _rank([store.documents[i] for i in idxs], [sims[i] for i in idxs])
        picked, used = greedy_fill(ranked, budgets[bucket])
        result.buckets[bucket] = picked
        result.tokens_used[bucket] = used
    return result


def retrieve_generic(
    question_text: str,
    total_tokens: int,
    store: DocumentStore,
    provider: EmbeddingProvider,
) -> RetrievalResult:
    """Generic baseline: schema documents only, raw embeddings, one pooled budget."""
    query = provider.embed(question_text).astype(np.float64)
    result = RetrievalResult(question_embedding=query, mode=MODE_RAW)
    result.buckets = {b: [] for b in BUCKETS}
    result.tokens_used = {b: 0 for b in BUCKETS}
    if len(store) == 0:
        return result

    schema_docs = store.schema_documents()
    rows = [store.row_of[d.id] for d in schema_docs]
    matrix = store.raw_matrix().astype(np.float64)[rows]
    sims = _similarities(matrix, query)
    ranked = _rank(schema_docs, list(sims))
    picked, _used = greedy_fill(ranked, total_tokens)
    for doc in picked:
        bucket = bucket_of(doc.doc_class)
        result.buckets[bucket].append(doc)
        result.tokens_used[bucket] += doc.tokens
    return result


# ---------------------------------------------------------------------------
# Allocation surrogate: retrieval F1 on a fixed question set
# ---------------------------------------------------------------------------

class ScoredCorpus:
    """Per-question, per-bucket rankings precomputed once, so every candidate
    allocation evaluates with plain greedy fills."""

    def __init__(
        self,
        documents: Sequence[Document],
        doc_matrix: np.ndarray,
        question_embeddings: Sequence[np.ndarray],
    ):
        self.documents = list(documents)
        self.rankings: list[dict[str, list[tuple[Document, float]]]] = []
        matrix = doc_matrix.astype(np.float64)
        by_bucket: dict[str, list[int]] = {b: [] for b in BUCKETS}
        for i, doc in enumerate(self.documents):
            by_bucket[bucket_of(doc.doc_class)].append(i)
        for q in question_embeddings:
            sims = _similarities(matrix, np.asarray(q, dtype=np.float64))
            per_bucket = {}
            for bucket, idxs in by_bucket.items():
                per_bucket[bucket] = _rank(
                    [self.documents[i] for i in idxs], [sims[i] for i in idxs]
                )
            self.rankings.append(per_bucket)

    def fill(self, allocation: ContextAllocation) -> list[set[str]]:
        budgets = {
            BUCKET_TABLES: allocation.t_tbl,
            BUCKET_COLUMNS: allocation.t_col,
            BUCKET_HINTS: allocation.t_hint,
        }
        out: list[set[str]] = []
        for per_bucket in self.rankings:
            ids: set[str] = set()
            for bucket in BUCKETS:
                picked, _ = greedy_fill(per_bucket[bucket], budgets[bucket])
                ids.update(d.id for d in picked)
            out.append(ids)
        return out


def retrieval_f1(
    corpus: ScoredCorpus,
    relevant_sets: Sequence[set[str]],
    allocation: ContextAllocation,
) -> float:
    """Mean harmonic mean of retrieval precision and recall over the questions.

    Questions with no relevant documents are skipped (precision/recall
    undefined there); no scoreable questions means 0.
    """
    retrieved_sets = corpus.fill(allocation)
    scores: list[float] = []
    for retrieved, relevant in zip(retrieved_sets, relevant_sets):
        if not relevant:
            continue
        hit = len(retrieved & relevant)
        if not retrieved or hit == 0:
            scores.append(0.0)
            continue
        precision = hit / len(retrieved)
        recall = hit / len(relevant)
        scores.append(2.0 * precision * recall / (precision + recall))
    return float(np.mean(scores)) if scores else 0.0


def make_f1_objective(
    corpus: ScoredCorpus, relevant_sets: Sequence[set[str]]
) -> AllocationObjective:
    return AllocationObjective(
        fn=lambda allocation: retrieval_f1(corpus, relevant_sets, allocation),
        kind="retrieval_f_surrogate",
    )
