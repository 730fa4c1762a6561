"""Tailored document embeddings.

Each document gets four proxy embeddings (raw content, co-occurring documents,
relevant SQL text, synthetic questions); the tailored embedding is their
weighted sum with one global weight vector shared by all documents. The
weights live on the probability simplex (cosine similarity is invariant to
scaling the weight vector, so the unconstrained sum is scale-degenerate) and
are fit by projected gradient descent on the total cosine loss over the
synthetic question workload.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .providers import (
    EmbeddingProvider,
    GenerativeProvider,
    ProviderUnavailable,
    SYNTH_QUESTION_MARKER,
)
from .sqlparser import QueryRecord

logger = logging.getLogger(__name__)

_TINY = 1e-12


class NonFiniteGradient(RuntimeError):
    pass


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between a and b; zero vectors score 0 by convention."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        logger.debug("cosine_similarity on a zero vector; returning 0")
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def cosine_loss(e_q: np.ndarray, e_doc: np.ndarray, relevant: bool) -> float:
    cos = cosine_similarity(e_q, e_doc)
    if relevant:
        return 1.0 - cos
    return max(0.0, cos)


@dataclass
class WeightVector:
    w1: float
    w2: float
    w3: float
    w4: float

    def __post_init__(self):
        arr = self.as_array()
        if np.any(arr < -1e-9) or abs(float(arr.sum()) - 1.0) > 1e-6:
            raise ValueError(f"weights must lie on the probability simplex, got {arr}")

    def as_array(self) -> np.ndarray:
        return np.array([self.w1, self.w2, self.w3, self.w4], dtype=np.float64)

    @staticmethod
    def from_array(arr: Sequence[float]) -> "WeightVector":
        return WeightVector(*[float(x) for x in arr])

    def to_json(self) -> dict:
        return {"w1": self.w1, "w2": self.w2, "w3": self.w3, "w4": self.w4}


UNIFORM_WEIGHTS = (0.25, 0.25, 0.25, 0.25)


@dataclass
class ProxySet:
    """The four per-document embeddings combined into the tailored embedding."""

    e_raw: np.ndarray
    e_cooccur: np.ndarray
    e_sql: np.ndarray
    e_synthq: np.ndarray

    def stack(self) -> np.ndarray:
        return np.stack(
            [self.e_raw, self.e_cooccur, self.e_sql, self.e_synthq]
        ).astype(np.float64)


@dataclass(frozen=True)
class SyntheticQuestion:
    query_id: str
    text: str


def tailored_embedding(proxies: ProxySet, weights: WeightVector) -> np.ndarray:
    vec = weights.as_array() @ proxies.stack()
    if float(np.linalg.norm(vec)) == 0.0:
        logger.debug("tailored embedding collapsed to zero; falling back to raw")
        return proxies.e_raw.astype(np.float64)
    return vec


def embed_raw(text: str, provider: EmbeddingProvider) -> np.ndarray:
    return provider.embed(text)


# ---------------------------------------------------------------------------
# Synthetic questions
# ---------------------------------------------------------------------------

def synthetic_question_prompt(query: QueryRecord, schema_slices: Sequence[str]) -> str:
    parts = [
        SYNTH_QUESTION_MARKER,
        "```sql",
        query.text,
        "```",
    ]
    if schema_slices:
        parts.append("Schema of the tables involved:")
        parts.extend(schema_slices)
    return "\n".join(parts)


def generate_synthetic_question(
    query: QueryRecord,
    schema_slices: Sequence[str],
    provider: GenerativeProvider,
    retries: int = 1,
) -> Optional[SyntheticQuestion]:
    """One deterministic question per query; empty output means skip."""
    prompt = synthetic_question_prompt(query, schema_slices)
    text = ""
    for attempt in range(retries + 1):
        try:
            text = provider.generate(prompt)
            break
        except ProviderUnavailable as exc:
            if attempt == retries:
                logger.warning("synthetic question for %s failed: %s", query.id, exc)
                return None
    if not text.strip():
        logger.warning("empty synthetic question for %s; skipping", query.id)
        return None
    return SyntheticQuestion(query_id=query.id, text=text.strip())


# ---------------------------------------------------------------------------
# Proxy embeddings
# ---------------------------------------------------------------------------

def compute_proxy_sets(
    doc_ids: Sequence[str],
    raw_matrix: np.ndarray,
    relevant_qids_by_doc: dict[str, set[str]],
    query_embeddings: dict[str, np.ndarray],
    synthq_embeddings: dict[str, np.ndarray],
) -> list[ProxySet]:
    """Proxy sets for every document, in doc_ids order.

    A document with no relevant past queries gets all proxies equal to its raw
    embedding, so tailoring is a no-op without workload signal; the same
    fallback applies per proxy when its average set is empty.
    """
    n = len(doc_ids)
    row = {doc_id: i for i, doc_id in enumerate(doc_ids)}
    raw = raw_matrix.astype(np.float64)

    def mean_or(vectors: list[np.ndarray], fallback: np.ndarray) -> np.ndarray:
        if not vectors:
            return fallback.copy()
        return np.mean(np.stack(vectors), axis=0)

    proxies: list[ProxySet] = []
    for i, doc_id in enumerate(doc_ids):
        e_raw = raw[i]
        qids = sorted(relevant_qids_by_doc.get(doc_id, ()))
        if not qids:
            proxies.append(ProxySet(e_raw, e_raw.copy(), e_raw.copy(), e_raw.copy()))
            continue
        e_sql = mean_or(
            [query_embeddings[q] for q in qids if q in query_embeddings], e_raw
        )
        e_synthq = mean_or(
            [synthq_embeddings[q] for q in qids if q in synthq_embeddings], e_raw
        )
        qid_set = set(qids)
        co_rows = [
            row[other]
            for other in doc_ids
            if other != doc_id and relevant_qids_by_doc.get(other) and qid_set & relevant_qids_by_doc[other]
        ]
        e_cooccur = mean_or([raw[j] for j in co_rows], e_raw)
        proxies.append(ProxySet(e_raw, e_cooccur, e_sql, e_synthq))
    return proxies


def compute_proxies(
    doc_id: str,
    doc_ids: Sequence[str],
    raw_matrix: np.ndarray,
    relevant_qids_by_doc: dict[str, set[str]],
    query_embeddings: dict[str, np.ndarray],
    synthq_embeddings: dict[str, np.ndarray],
) -> ProxySet:
    idx = list(doc_ids).index(doc_id)
    return compute_proxy_sets(
        doc_ids, raw_matrix, relevant_qids_by_doc, query_embeddings, synthq_embeddings
    )[idx]


def materialize_tailored(
    proxy_sets: Sequence[ProxySet], weights: WeightVector
) -> np.ndarray:
    rows = [tailored_embedding(p, weights) for p in proxy_sets]
    if not rows:
        return np.zeros((0, 0), dtype=np.float32)
    return np.stack(rows).astype(np.float32)


# ---------------------------------------------------------------------------
# Objective and weight fitting
# ---------------------------------------------------------------------------

class TrainingSet:
    """Precomputed quantities for fast objective/gradient evaluation.

    For question q and document d with proxy matrix P_d (4 x dim):
      cos(q, d; w) = (sum_k w_k S_k[q, d]) / (|q| * sqrt(w^T G_d w))
    with S_k[q, d] = q . P_d[k] and G_d the 4x4 proxy Gram matrix.
    """

    def __init__(
        self,
        proxy_sets: Sequence[ProxySet],
        question_embeddings: Sequence[np.ndarray],
        relevant: np.ndarray,  # bool (n_questions, n_docs)
    ):
        self.n_docs = len(proxy_sets)
        self.n_questions = len(question_embeddings)
        if relevant.shape != (self.n_questions, self.n_docs):
            raise ValueError("relevance mask shape mismatch")
        self.relevant = relevant.astype(bool)
        if self.n_docs and self.n_questions:
            P = np.stack([p.stack() for p in proxy_sets])  # (D, 4, dim)
            Q = np.stack([q.astype(np.float64) for q in question_embeddings])  # (Q, dim)
            self.S = np.einsum("qe,dke->kqd", Q, P)  # (4, Q, D)
            self.gram = np.einsum("dke,dle->dkl", P, P)  # (D, 4, 4)
            self.qnorm = np.linalg.norm(Q, axis=1)  # (Q,)
        else:
            self.S = np.zeros((4, self.n_questions, self.n_docs))
            self.gram = np.zeros((self.n_docs, 4, 4))
            self.qnorm = np.ones(self.n_questions)

    def _cosines(self, w: np.ndarray):
        numer = np.tensordot(w, self.S, axes=(0, 0))  # (Q, D)
        u = self.gram @ w  # (D, 4)
        msq = u @ w  # (D,)
        m = np.sqrt(np.maximum(msq, 0.0))
        denom = np.outer(np.maximum(self.qnorm, _TINY), np.maximum(m, _TINY))
        cos = numer / denom
        cos[:, m <= _TINY] = 0.0  # degenerate documents score 0
        return cos, m, u

    def objective(self, weights: WeightVector | np.ndarray) -> float:
        w = weights.as_array() if isinstance(weights, WeightVector) else np.asarray(weights, float)
        if self.n_docs == 0 or self.n_questions == 0:
            return 0.0
        cos, _m, _u = self._cosines(w)
        loss = np.where(self.relevant, 1.0 - cos, np.maximum(0.0, cos))
        return float(loss.sum())

    def objective_and_gradient(self, w: np.ndarray) -> tuple[float, np.ndarray]:
        if self.n_docs == 0 or self.n_questions == 0:
            return 0.0, np.zeros(4)
        cos, m, u = self._cosines(w)
        loss = np.where(self.relevant, 1.0 - cos, np.maximum(0.0, cos))
        total = float(loss.sum())

        # dcos/dw_k = S_k/(|q| m) - cos * u_k / m^2
        sign = np.where(self.relevant, -1.0, np.where(cos > 0.0, 1.0, 0.0))  # (Q, D)
        live = m > _TINY
        sign = sign * live[None, :]
        inv_qm = 1.0 / np.outer(np.maximum(self.qnorm, _TINY), np.maximum(m, _TINY))
        a = sign * inv_qm  # (Q, D)
        grad_part1 = np.einsum("qd,kqd->k", a, self.S)
        b = (sign * cos).sum(axis=0)  # (D,)
        inv_msq = np.where(live, 1.0 / np.maximum(m * m, _TINY), 0.0)
        grad_part2 = (b * inv_msq) @ u  # (4,)
        grad = grad_part1 - grad_part2
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradient(f"gradient is not finite: {grad}")
        return total, grad


def objective(weights: WeightVector, training_set: TrainingSet) -> float:
    return training_set.objective(weights)


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = 1} (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u + (1.0 - css) / np.arange(1, len(v) + 1) > 0)[0][-1]
    lam = (1.0 - css[rho]) / (rho + 1.0)
    return np.maximum(v + lam, 0.0)


@dataclass
class WeightFitConfig:
    init: tuple[float, float, float, float] = UNIFORM_WEIGHTS
    learning_rate: float = 0.05
    max_iterations: int = 500
    min_improvement: float = 1e-6
    patience: int = 20
    min_step: float = 1e-12


@dataclass
class WeightFitResult:
    weights: WeightVector
    initial_objective: float
    final_objective: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list)


def fit_weights(training_set: TrainingSet, config: WeightFitConfig | None = None) -> WeightFitResult:
    """Projected gradient descent with backtracking halving; deterministic."""
    cfg = config or WeightFitConfig()
    w = project_to_simplex(np.asarray(cfg.init, dtype=np.float64))
    value, grad = training_set.objective_and_gradient(w)
    initial = value
    history = [value]
    stall = 0
    iterations = 0
    converged = False
    for iterations in range(1, cfg.max_iterations + 1):
        step = cfg.learning_rate
        improved = False
        while step >= cfg.min_step:
            candidate = project_to_simplex(w - step * grad)
            cand_value = training_set.objective(candidate)
            if cand_value <= value:
                improvement = value - cand_value
                w, value = candidate, cand_value
                _unused, grad = training_set.objective_and_gradient(w)
                improved = improvement > cfg.min_improvement
                break
            step /= 2.0
        history.append(value)
        stall = 0 if improved else stall + 1
        if stall >= cfg.patience:
            converged = True
            break
    return WeightFitResult(
        weights=WeightVector.from_array(w),
        initial_objective=initial,
        final_objective=value,
        iterations=iterations,
        converged=converged,
        history=history,
    )


def optimize_weights(training_set: TrainingSet, config: WeightFitConfig | None = None) -> WeightVector:
    return fit_weights(training_set, config).weights


def build_relevance_mask(
    question_ids: Sequence[str],
    doc_ids: Sequence[str],
    relevant_qids_by_doc: dict[str, set[str]],
) -> np.ndarray:
    mask = np.zeros((len(question_ids), len(doc_ids)), dtype=bool)
    for d, doc_id in enumerate(doc_ids):
        qids = relevant_qids_by_doc.get(doc_id, set())
        for q, qid in enumerate(question_ids):
            if qid in qids:
                mask[q, d] = True
    return mask
