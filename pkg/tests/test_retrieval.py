from __future__ import annotations

import numpy as np
import pytest

from sqltailor.allocation import ContextAllocation
from sqltailor.documents import (
    ALL_CLASSES,
    CLASS_COLUMN,
    CLASS_JOIN,
    CLASS_TABLE,
    Document,
    sort_documents,
)
from sqltailor.providers import MockEmbeddingProvider
from sqltailor.retrieval import (
    BUCKET_COLUMNS,
    BUCKET_HINTS,
    BUCKET_TABLES,
    BUCKETS,
    MODE_RAW,
    MODE_TAILORED,
    ScoredCorpus,
    bucket_of,
    greedy_fill,
    make_f1_objective,
    retrieval_f1,
    retrieve,
    retrieve_generic,
)
from sqltailor.store import DocumentStore, empty_store
from sqltailor.tokens import TokenCounter, count_tokens


class TestTokenCounter:
    def test_sql_line(self):
        assert count_tokens("SELECT * FROM t") == 4

    def test_empty(self):
        assert count_tokens("") == 0

    def test_punctuation_split(self):
        assert count_tokens("a,b") == 3

    def test_additive_over_separator(self):
        a, b = "SELECT a FROM t", "Filter: x = 3"
        assert count_tokens(a + "\n\n" + b) == count_tokens(a) + count_tokens(b)

    def test_provider_mode(self):
        counter = TokenCounter(mode="provider", provider_fn=lambda s: 7)
        assert counter.count("anything") == 7

    def test_provider_mode_requires_fn(self):
        with pytest.raises(ValueError):
            TokenCounter(mode="provider").count("x")


def doc(i, doc_class, tokens, observed=1, content=None):
    return Document(
        id=f"{doc_class}:{i:03d}",
        doc_class=doc_class,
        content=content or f"doc {i} {doc_class} text",
        token_count=tokens,
        observed_count=observed,
        source_query_ids=(),
        subject_tables=(),
        payload={},
    )


def make_store(docs, dim=32, seed=0):
    rng = np.random.default_rng(seed)
    docs = sort_documents(docs)
    n = len(docs)
    raw = rng.normal(size=(n, dim)).astype(np.float32)
    tailored = rng.normal(size=(n, dim)).astype(np.float32)
    return DocumentStore(documents=docs, dimension=dim, emb_raw=raw, emb_tailored=tailored)


class TestGreedyFill:
    def test_skip_and_continue(self):
        # Greedy-policy oracle: 60/50/40 tokens, budget 100, scores .9/.8/.7
        # -> first and third documents.
        docs = [doc(1, CLASS_TABLE, 60), doc(2, CLASS_TABLE, 50), doc(3, CLASS_TABLE, 40)]
        ranked = list(zip(docs, [0.9, 0.8, 0.7]))
        picked, used = greedy_fill(ranked, 100)
        assert [p.id for p in picked] == [docs[0].id, docs[2].id]
        assert used == 100

    def test_zero_budget_picks_nothing(self):
        docs = [doc(1, CLASS_JOIN, 5)]
        picked, used = greedy_fill(list(zip(docs, [0.99])), 0)
        assert picked == [] and used == 0

    def test_higher_score_wins_when_budget_fits_one(self):
        docs = [doc(1, CLASS_TABLE, 10), doc(2, CLASS_TABLE, 10)]
        ranked = list(zip(docs, [0.9, 0.8]))
        picked, _ = greedy_fill(ranked, 10)
        assert [p.id for p in picked] == [docs[0].id]


class TestRetrieve:
    def test_empty_store_gives_empty_result(self):
        store = empty_store(8)
        alloc = ContextAllocation(10, 10, 10, 100)
        result = retrieve("anything", alloc, store, MockEmbeddingProvider(8))
        assert result.document_ids() == set()

    def test_budget_zero_for_hints(self):
        docs = [doc(1, CLASS_TABLE, 4), doc(2, CLASS_JOIN, 4), doc(3, CLASS_JOIN, 4)]
        store = make_store(docs)
        alloc = ContextAllocation(t_tbl=100, t_col=100, t_hint=0, T=300)
        result = retrieve("q", alloc, store, MockEmbeddingProvider(32))
        assert result.buckets[BUCKET_HINTS] == []
        assert result.tokens_used[BUCKET_HINTS] == 0

    def test_scores_nonincreasing_within_bucket(self):
        docs = [doc(i, CLASS_TABLE, 3) for i in range(10)]
        store = make_store(docs)
        alloc = ContextAllocation(t_tbl=30, t_col=0, t_hint=0, T=100)
        result = retrieve("question words", alloc, store, MockEmbeddingProvider(32))
        scores = [d.score for d in result.buckets[BUCKET_TABLES]]
        assert scores == sorted(scores, reverse=True)

    def test_tie_break_by_observed_count_then_id(self):
        docs = [
            doc(1, CLASS_TABLE, 3, observed=1),
            doc(2, CLASS_TABLE, 3, observed=5),
            doc(3, CLASS_TABLE, 3, observed=5),
        ]
        store = make_store(docs)
        # Equal embeddings give equal scores for every question.
        store.emb_raw[:] = store.emb_raw[0]
        store.emb_tailored[:] = store.emb_tailored[0]
        alloc = ContextAllocation(t_tbl=9, t_col=0, t_hint=0, T=100)
        result = retrieve("q", alloc, store, MockEmbeddingProvider(32))
        assert [d.id for d in result.buckets[BUCKET_TABLES]] == [
            "table:002", "table:003", "table:001"
        ]

    def test_mode_equivalence_without_workload_signal(self):
        # Tailored equals raw when every document lacks workload evidence.
        docs = [doc(i, ALL_CLASSES[i % 5], 2 + i % 4) for i in range(12)]
        store = make_store(docs)
        store.emb_tailored = store.emb_raw.copy()  # the zero-evidence fallback
        alloc = ContextAllocation(t_tbl=8, t_col=8, t_hint=8, T=100)
        emb = MockEmbeddingProvider(32)
        for question in ("what is in table one", "rows of foo", "x = 3"):
            raw = retrieve(question, alloc, store, emb, embedding_mode=MODE_RAW)
            tailored = retrieve(question, alloc, store, emb, embedding_mode=MODE_TAILORED)
            assert raw.buckets == tailored.buckets

    def test_determinism(self):
        docs = [doc(i, ALL_CLASSES[i % 5], 2 + i % 4) for i in range(15)]
        store = make_store(docs)
        alloc = ContextAllocation(t_tbl=8, t_col=8, t_hint=8, T=100)
        emb = MockEmbeddingProvider(32)
        a = retrieve("same question", alloc, store, emb)
        b = retrieve("same question", alloc, store, emb)
        assert a.buckets == b.buckets and a.tokens_used == b.tokens_used


class TestRetrieveGeneric:
    def test_schema_documents_only(self):
        docs = [doc(1, CLASS_TABLE, 4), doc(2, CLASS_COLUMN, 4), doc(3, CLASS_JOIN, 4)]
        store = make_store(docs)
        result = retrieve_generic("q", 100, store, MockEmbeddingProvider(32))
        assert result.buckets[BUCKET_HINTS] == []
        assert result.mode == MODE_RAW
        ids = result.document_ids()
        assert ids and all(not i.startswith("join") for i in ids)

    def test_single_pooled_budget(self):
        docs = [doc(i, CLASS_TABLE, 10) for i in range(5)]
        docs += [doc(i + 10, CLASS_COLUMN, 10) for i in range(5)]
        store = make_store(docs)
        result = retrieve_generic("q", 35, store, MockEmbeddingProvider(32))
        total = sum(result.tokens_used.values())
        assert total <= 35

    def test_never_touches_tailored_matrix(self):
        docs = [doc(1, CLASS_TABLE, 4), doc(2, CLASS_COLUMN, 4)]
        inner = make_store(docs)

        class PoisonedStore(DocumentStore):
            def tailored_matrix(self):
                raise AssertionError("generic arm read tailored embeddings")

        store = PoisonedStore(
            documents=inner.documents,
            dimension=inner.dimension,
            emb_raw=inner.emb_raw,
            emb_tailored=inner.emb_tailored,
        )
        result = retrieve_generic("q", 100, store, MockEmbeddingProvider(32))
        assert result.document_ids()


def independent_greedy(docs, scores, budget):
    """Scalar-loop oracle reimplementing the ranked skip-and-continue fill."""
    order = sorted(
        range(len(docs)), key=lambda i: (-scores[i], -docs[i].observed_count, docs[i].id)
    )
    picked, used = [], 0
    for i in order:
        if used + docs[i].token_count <= budget:
            picked.append(docs[i].id)
            used += docs[i].token_count
    return picked, used


class TestRandomizedProperties:
    def test_budget_safety_and_rank_dominance(self):
        rng = np.random.default_rng(1234)
        emb = MockEmbeddingProvider(16)
        for case in range(300):
            n = int(rng.integers(1, 25))
            docs = sort_documents(
                [
                    doc(
                        i,
                        ALL_CLASSES[int(rng.integers(0, 5))],
                        tokens=int(rng.integers(1, 60)),
                        observed=int(rng.integers(1, 6)),
                    )
                    for i in range(n)
                ]
            )
            store = make_store(docs, dim=16, seed=case)
            alloc = ContextAllocation(
                t_tbl=int(rng.integers(0, 120)),
                t_col=int(rng.integers(0, 120)),
                t_hint=int(rng.integers(0, 120)),
                T=400,
            )
            result = retrieve(f"question {case}", alloc, store, emb)

            budgets = {
                BUCKET_TABLES: alloc.t_tbl,
                BUCKET_COLUMNS: alloc.t_col,
                BUCKET_HINTS: alloc.t_hint,
            }
            q = result.question_embedding
            matrix = store.tailored_matrix().astype(np.float64)
            qnorm = np.linalg.norm(q)
            norms = np.linalg.norm(matrix, axis=1)
            if qnorm == 0.0:
                sims = np.zeros(len(store.documents))  # degenerate-input rule
            else:
                sims = matrix @ q / (norms * qnorm)
                sims = np.where(norms == 0.0, 0.0, sims)
            for bucket in BUCKETS:
                picked = result.buckets[bucket]
                assert sum(d.tokens for d in picked) <= budgets[bucket]

                idxs = [i for i, d in enumerate(store.documents) if bucket_of(d.doc_class) == bucket]
                bucket_docs = [store.documents[i] for i in idxs]
                bucket_scores = [float(sims[i]) for i in idxs]
                expected, _ = independent_greedy(bucket_docs, bucket_scores, budgets[bucket])
                assert [d.id for d in picked] == expected

                # Dominance: a same-or-smaller doc with a higher score is never
                # passed over in favor of a retrieved lower-scoring one.
                picked_ids = {d.id for d in picked}
                by_id = {d.id: (s, d.token_count) for d, s in zip(bucket_docs, bucket_scores)}
                for b in picked:
                    for d_doc in bucket_docs:
                        score, tokens = by_id[d_doc.id]
                        if (
                            d_doc.id not in picked_ids
                            and score > by_id[b.id][0]
                            and tokens <= by_id[b.id][1]
                        ):
                            raise AssertionError("rank dominance violated")


class TestSurrogateObjective:
    def make_corpus(self, seed=0):
        rng = np.random.default_rng(seed)
        docs = sort_documents(
            [doc(i, ALL_CLASSES[i % 5], tokens=2 + i % 5) for i in range(12)]
        )
        matrix = rng.normal(size=(len(docs), 16))
        questions = [rng.normal(size=16) for _ in range(10)]
        relevant = [
            {d.id for d in docs if rng.random() < 0.3} for _ in questions
        ]
        return docs, matrix, questions, relevant

    def test_zero_allocation_scores_zero(self):
        docs, matrix, questions, relevant = self.make_corpus()
        corpus = ScoredCorpus(docs, matrix, questions)
        alloc = ContextAllocation(0, 0, 0, 100)
        assert retrieval_f1(corpus, relevant, alloc) == 0.0

    def test_perfect_when_everything_relevant_and_retrieved(self):
        docs, matrix, questions, _ = self.make_corpus()
        corpus = ScoredCorpus(docs, matrix, questions)
        relevant = [{d.id for d in docs} for _ in questions]
        alloc = ContextAllocation(300, 300, 300, 1000)
        assert retrieval_f1(corpus, relevant, alloc) == 1.0

    def test_matches_scalar_loop_oracle(self):
        docs, matrix, questions, relevant = self.make_corpus(seed=3)
        corpus = ScoredCorpus(docs, matrix, questions)
        alloc = ContextAllocation(8, 6, 7, 100)

        # Straight-line reimplementation.
        scores = []
        for qi, q in enumerate(questions):
            retrieved = set()
            for bucket in BUCKETS:
                bucket_docs = [d for d in docs if bucket_of(d.doc_class) == bucket]
                sims = []
                for d in bucket_docs:
                    row = [i for i, dd in enumerate(docs) if dd.id == d.id][0]
                    v = matrix[row]
                    sims.append(float(v @ q / (np.linalg.norm(v) * np.linalg.norm(q))))
                budget = {
                    BUCKET_TABLES: alloc.t_tbl,
                    BUCKET_COLUMNS: alloc.t_col,
                    BUCKET_HINTS: alloc.t_hint,
                }[bucket]
                ids, _ = independent_greedy(bucket_docs, sims, budget)
                retrieved.update(ids)
            needed = relevant[qi]
            if not needed:
                continue
            hit = len(retrieved & needed)
            if not retrieved or hit == 0:
                scores.append(0.0)
                continue
            precision = hit / len(retrieved)
            recall = hit / len(needed)
            scores.append(2 * precision * recall / (precision + recall))
        expected = float(np.mean(scores)) if scores else 0.0

        assert retrieval_f1(corpus, relevant, alloc) == pytest.approx(expected)

    def test_objective_wrapper_kind(self):
        docs, matrix, questions, relevant = self.make_corpus()
        corpus = ScoredCorpus(docs, matrix, questions)
        objective = make_f1_objective(corpus, relevant)
        assert objective.kind == "retrieval_f_surrogate"
        assert 0.0 <= objective(ContextAllocation(10, 10, 10, 100)) <= 1.0
