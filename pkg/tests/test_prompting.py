from __future__ import annotations

import numpy as np

from sqltailor.documents import CLASS_JOIN, CLASS_TABLE, Document, sort_documents
from sqltailor.prompting import INSTRUCTIONS, assemble_prompt, extract_sql
from sqltailor.retrieval import BUCKET_HINTS, BUCKET_TABLES, RetrievalResult, RetrievedDoc
from sqltailor.store import DocumentStore
from sqltailor.tokens import count_tokens


def make_store_with(docs):
    docs = sort_documents(docs)
    z = np.zeros((len(docs), 4), dtype=np.float32)
    return DocumentStore(documents=docs, dimension=4, emb_raw=z, emb_tailored=z.copy())


def table_doc(name, content):
    return Document(
        id=f"tbl:{name}", doc_class=CLASS_TABLE, content=content,
        token_count=count_tokens(content), observed_count=1,
        source_query_ids=(), subject_tables=(name,), payload={"table": name},
    )


def join_doc(content, observed):
    return Document(
        id="join:abc", doc_class=CLASS_JOIN, content=content,
        token_count=count_tokens(content), observed_count=observed,
        source_query_ids=("q0",), subject_tables=(), payload={"conditions": ["a.x = b.y"], "tables": ["a", "b"]},
    )


class TestAssemblePrompt:
    def test_empty_retrieval_instructions_and_question_only(self):
        store = make_store_with([])
        prompt = assemble_prompt("What is up?", RetrievalResult(), store)
        assert [name for name, _ in prompt.sections] == ["instructions", "question"]
        assert prompt.rendered.startswith(INSTRUCTIONS)
        assert prompt.rendered.endswith("Question: What is up?")

    def test_byte_identical_rendering(self):
        doc = table_doc("t", "CREATE TABLE t (a integer)")
        store = make_store_with([doc])
        retrieval = RetrievalResult(
            buckets={BUCKET_TABLES: [RetrievedDoc(doc.id, doc.doc_class, 0.9, doc.token_count)]}
        )
        one = assemble_prompt("q?", retrieval, store)
        two = assemble_prompt("q?", retrieval, store)
        assert one.rendered == two.rendered

    def test_hint_line_carries_observation_counter(self):
        doc = join_doc("Join path: tables a, b are joined via a.x = b.y.", observed=2)
        store = make_store_with([doc])
        retrieval = RetrievalResult(
            buckets={BUCKET_HINTS: [RetrievedDoc(doc.id, doc.doc_class, 0.5, doc.token_count)]}
        )
        prompt = assemble_prompt("q?", retrieval, store)
        assert "observed 2 times in past queries" in prompt.rendered

    def test_token_count_is_sum_of_sections(self):
        doc = table_doc("t", "CREATE TABLE t (a integer, b text)")
        store = make_store_with([doc])
        retrieval = RetrievalResult(
            buckets={BUCKET_TABLES: [RetrievedDoc(doc.id, doc.doc_class, 0.9, doc.token_count)]}
        )
        prompt = assemble_prompt("how many rows?", retrieval, store)
        assert prompt.token_count == sum(prompt.section_tokens.values())
        assert prompt.token_count == count_tokens(prompt.rendered)


class TestExtractSql:
    def test_fenced_block(self):
        got = extract_sql("```sql\nSELECT 1\n```")
        assert got.sql == "SELECT 1" and got.found

    def test_bare_select(self):
        got = extract_sql("SELECT a FROM t")
        assert got.sql == "SELECT a FROM t" and got.found

    def test_with_statement(self):
        got = extract_sql("Sure!\nWITH x AS (SELECT 1) SELECT * FROM x")
        assert got.sql.startswith("WITH x") and got.found

    def test_no_sql_flagged(self):
        got = extract_sql("I cannot answer")
        assert not got.found
        assert got.sql == "I cannot answer"

    def test_fenced_preferred_over_later_text(self):
        got = extract_sql("intro\n```sql\nSELECT 2\n```\nSELECT ignored")
        assert got.sql == "SELECT 2"
