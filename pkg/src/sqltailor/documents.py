"""Document store construction: schema documents, hint documents, relevance.

Five document classes: per-table schema docs (the CREATE TABLE text), per-column
docs (name, table, top values), and three hint classes mined from the workload
(join paths, filter predicates, group-by conditions). Hints observed by several
queries merge into one document with an observation counter.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

from .sqlparser import QueryRecord, QuerySubcomponents
from .tokens import TokenCounter

CLASS_TABLE = "table"
CLASS_COLUMN = "column"
CLASS_JOIN = "join_hint"
CLASS_FILTER = "filter_hint"
CLASS_GROUPBY = "groupby_hint"

SCHEMA_CLASSES = (CLASS_TABLE, CLASS_COLUMN)
HINT_CLASSES = (CLASS_JOIN, CLASS_FILTER, CLASS_GROUPBY)
ALL_CLASSES = SCHEMA_CLASSES + HINT_CLASSES

_CLASS_ORDER = {cls: i for i, cls in enumerate(ALL_CLASSES)}

MAX_TOP_VALUES = 10


class DuplicateTableError(ValueError):
    pass


@dataclass
class ColumnSchema:
    name: str
    decl_type: str = ""
    nullable: bool = True
    primary_key: bool = False


@dataclass
class TableSchema:
    name: str
    columns: list[ColumnSchema]
    create_sql: str


@dataclass
class SchemaCatalog:
    tables: dict[str, TableSchema] = field(default_factory=dict)

    def table_names(self) -> set[str]:
        return set(self.tables)

    def add(self, table: TableSchema) -> None:
        if table.name in self.tables:
            raise DuplicateTableError(f"duplicate table {table.name!r}")
        self.tables[table.name] = table


@dataclass(frozen=True)
class Document:
    id: str
    doc_class: str
    content: str
    token_count: int
    observed_count: int
    source_query_ids: tuple[str, ...]
    subject_tables: tuple[str, ...]
    payload: dict

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "class": self.doc_class,
            "content": self.content,
            "token_count": self.token_count,
            "observed_count": self.observed_count,
            "source_query_ids": list(self.source_query_ids),
            "subject_tables": list(self.subject_tables),
            "payload": self.payload,
        }

    @staticmethod
    def from_json(obj: dict) -> "Document":
        return Document(
            id=obj["id"],
            doc_class=obj["class"],
            content=obj["content"],
            token_count=obj["token_count"],
            observed_count=obj["observed_count"],
            source_query_ids=tuple(obj["source_query_ids"]),
            subject_tables=tuple(obj["subject_tables"]),
            payload=obj["payload"],
        )


@dataclass(frozen=True)
class RelevanceLabel:
    question_or_query_id: str
    document_id: str
    relevant: bool


# ---------------------------------------------------------------------------
# Schema ingestion
# ---------------------------------------------------------------------------

_CREATE_RE = re.compile(
    r"^\s*CREATE\s+TABLE\s+(?:IF\s+NOT\s+EXISTS\s+)?(?P<name>[\w.$\"`]+)\s*\(",
    re.IGNORECASE,
)
_CONSTRAINT_STARTS = {"PRIMARY", "FOREIGN", "UNIQUE", "KEY", "CONSTRAINT", "CHECK", "INDEX"}


def _split_top_level(body: str) -> list[str]:
    parts, depth, current = [], 0, []
    in_string = False
    for ch in body:
        if ch == "'":
            in_string = not in_string
        if not in_string:
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
            elif ch == "," and depth == 0:
                parts.append("".join(current).strip())
                current = []
                continue
        current.append(ch)
    tail = "".join(current).strip()
    if tail:
        parts.append(tail)
    return parts


def parse_create_table(statement: str) -> Optional[TableSchema]:
    m = _CREATE_RE.match(statement)
    if not m:
        return None
    name = m.group("name").strip('"`').lower()
    open_idx = statement.index("(", m.start("name"))
    depth = 0
    close_idx = len(statement)
    for i in range(open_idx, len(statement)):
        if statement[i] == "(":
            depth += 1
        elif statement[i] == ")":
            depth -= 1
            if depth == 0:
                close_idx = i
                break
    body = statement[open_idx + 1 : close_idx]
    columns: list[ColumnSchema] = []
    pk_columns: set[str] = set()
    for item in _split_top_level(body):
        words = item.split()
        if not words:
            continue
        head = words[0].upper()
        if head in _CONSTRAINT_STARTS:
            if head == "PRIMARY":
                inner = re.search(r"\(([^)]*)\)", item)
                if inner:
                    pk_columns.update(
                        c.strip().strip('"`').lower() for c in inner.group(1).split(",")
                    )
            continue
        col_name = words[0].strip('"`').lower()
        decl_type = words[1].lower() if len(words) > 1 else ""
        upper = item.upper()
        nullable = "NOT NULL" not in upper
        primary = "PRIMARY KEY" in upper
        columns.append(ColumnSchema(col_name, decl_type, nullable, primary))
    for col in columns:
        if col.name in pk_columns:
            col.primary_key = True
    return TableSchema(name=name, columns=columns, create_sql=statement.strip())


def parse_schema_text(text: str) -> SchemaCatalog:
    catalog = SchemaCatalog()
    for statement in text.split(";"):
        if not statement.strip():
            continue
        table = parse_create_table(statement)
        if table is not None:
            catalog.add(table)
    return catalog


def read_schema_file(path: str | Path) -> SchemaCatalog:
    return parse_schema_text(Path(path).read_text(encoding="utf-8"))


def load_column_stats(path: str | Path) -> dict:
    """Sidecar stats: {table: {column: [[value, count], ...]}}, top 10 kept."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    stats: dict = {}
    for table, cols in raw.items():
        stats[table.lower()] = {}
        for col, pairs in cols.items():
            ordered = sorted(pairs, key=lambda vc: (-vc[1], str(vc[0])))
            stats[table.lower()][col.lower()] = ordered[:MAX_TOP_VALUES]
    return stats


# ---------------------------------------------------------------------------
# Document builders
# ---------------------------------------------------------------------------

def build_schema_documents(
    catalog: SchemaCatalog,
    stats: dict | None = None,
    counter: TokenCounter | None = None,
) -> list[Document]:
    if not catalog.tables:
        raise ValueError("catalog is empty")
    counter = counter or TokenCounter()
    stats = stats or {}
    docs: list[Document] = []
    for name in sorted(catalog.tables):
        table = catalog.tables[name]
        content = table.create_sql
        docs.append(
            Document(
                id=f"tbl:{name}",
                doc_class=CLASS_TABLE,
                content=content,
                token_count=counter.count(content),
                observed_count=1,
                source_query_ids=(),
                subject_tables=(name,),
                payload={"table": name},
            )
        )
        for col in table.columns:
            parts = [f"Column {col.name} of table {name}"]
            if col.decl_type:
                parts.append(f" (type {col.decl_type})")
            parts.append(".")
            values = stats.get(name, {}).get(col.name, [])
            if values:
                rendered = ", ".join(str(v) for v, _count in values)
                parts.append(f" Most common values: {rendered}.")
            content = "".join(parts)
            docs.append(
                Document(
                    id=f"col:{name}.{col.name}",
                    doc_class=CLASS_COLUMN,
                    content=content,
                    token_count=counter.count(content),
                    observed_count=1,
                    source_query_ids=(),
                    subject_tables=(name,),
                    payload={"table": name, "column": col.name},
                )
            )
    return sort_documents(docs)


def _digest(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha1(blob).hexdigest()[:12]


def _join_content(tables: tuple[str, ...], conditions: tuple[str, ...]) -> str:
    return (
        f"Join path: tables {', '.join(tables)} are joined via "
        f"{' and '.join(conditions)}."
    )


def _filter_content(predicate: str, tables: tuple[str, ...]) -> str:
    if tables:
        noun = "table" if len(tables) == 1 else "tables"
        return f"Filter used in past queries: {predicate} (references {noun} {', '.join(tables)})."
    return f"Filter used in past queries: {predicate}."


def _groupby_content(columns: tuple[str, ...], tables: tuple[str, ...]) -> str:
    base = f"Past queries group by {', '.join(columns)}"
    if tables:
        noun = "table" if len(tables) == 1 else "tables"
        return f"{base} (references {noun} {', '.join(tables)})."
    return base + "."


def build_hint_documents(
    parsed: Iterable[tuple[QueryRecord, QuerySubcomponents]],
    counter: TokenCounter | None = None,
    known_tables: set[str] | None = None,
) -> list[Document]:
    """One JoinHint per distinct (table set, join conditions), one FilterHint per
    distinct canonical predicate, one GroupByHint per distinct group-by list.
    Duplicates merge with observed_count incremented by the query's own count."""
    counter = counter or TokenCounter()

    joins: dict[tuple, dict] = {}
    filters: dict[str, dict] = {}
    groups: dict[tuple, dict] = {}

    for record, subs in parsed:
        if subs.join_conditions:
            key = (subs.tables, subs.join_conditions)
            entry = joins.setdefault(key, {"count": 0, "sources": set()})
            entry["count"] += record.observed_count
            entry["sources"].add(record.id)
        for flt in subs.filters:
            entry = filters.setdefault(
                flt.predicate, {"count": 0, "sources": set(), "tables": set()}
            )
            entry["count"] += record.observed_count
            entry["sources"].add(record.id)
            entry["tables"].update(flt.tables)
        if subs.group_by:
            key = subs.group_by
            entry = groups.setdefault(key, {"count": 0, "sources": set(), "tables": set()})
            entry["count"] += record.observed_count
            entry["sources"].add(record.id)
            entry["tables"].update(subs.group_by_tables)

    def subject(tables: Iterable[str]) -> tuple[str, ...]:
        names = set(tables)
        if known_tables is not None:
            names &= known_tables
        return tuple(sorted(names))

    docs: list[Document] = []
    for (tables, conditions), entry in joins.items():
        payload = {"tables": list(tables), "conditions": list(conditions)}
        content = _join_content(tables, conditions)
        docs.append(
            Document(
                id=f"join:{_digest(payload)}",
                doc_class=CLASS_JOIN,
                content=content,
                token_count=counter.count(content),
                observed_count=entry["count"],
                source_query_ids=tuple(sorted(entry["sources"])),
                subject_tables=subject(tables),
                payload=payload,
            )
        )
    for predicate, entry in filters.items():
        tables = tuple(sorted(entry["tables"]))
        payload = {"predicate": predicate, "tables": list(tables)}
        content = _filter_content(predicate, tables)
        docs.append(
            Document(
                id=f"filter:{_digest({'predicate': predicate})}",
                doc_class=CLASS_FILTER,
                content=content,
                token_count=counter.count(content),
                observed_count=entry["count"],
                source_query_ids=tuple(sorted(entry["sources"])),
                subject_tables=subject(tables),
                payload=payload,
            )
        )
    for columns, entry in groups.items():
        tables = tuple(sorted(entry["tables"]))
        payload = {"columns": list(columns), "tables": list(tables)}
        content = _groupby_content(columns, tables)
        docs.append(
            Document(
                id=f"group:{_digest({'columns': list(columns)})}",
                doc_class=CLASS_GROUPBY,
                content=content,
                token_count=counter.count(content),
                observed_count=entry["count"],
                source_query_ids=tuple(sorted(entry["sources"])),
                subject_tables=subject(tables),
                payload=payload,
            )
        )
    return sort_documents(docs)


def sort_documents(docs: Iterable[Document]) -> list[Document]:
    return sorted(docs, key=lambda d: (_CLASS_ORDER[d.doc_class], d.id))


# ---------------------------------------------------------------------------
# Relevance
# ---------------------------------------------------------------------------

def _column_referenced(table: str, column: str, subs: QuerySubcomponents) -> bool:
    qualified = f"{table}.{column}"
    for ref in subs.column_refs:
        if ref == qualified:
            return True
        if "." not in ref and ref == column and table in subs.tables:
            return True
    return False


def label_relevance(doc: Document, subs: QuerySubcomponents) -> bool:
    """Pure relevance rule per document class."""
    if doc.doc_class == CLASS_TABLE:
        return doc.payload["table"] in subs.tables
    if doc.doc_class == CLASS_COLUMN:
        return _column_referenced(doc.payload["table"], doc.payload["column"], subs)
    if doc.doc_class == CLASS_JOIN:
        return bool(doc.payload["conditions"]) and set(doc.payload["conditions"]) <= set(
            subs.join_conditions
        )
    if doc.doc_class == CLASS_FILTER:
        return doc.payload["predicate"] in {f.predicate for f in subs.filters}
    if doc.doc_class == CLASS_GROUPBY:
        return bool(subs.group_by) and tuple(doc.payload["columns"]) == subs.group_by
    raise ValueError(f"unknown document class {doc.doc_class!r}")


def relevance_sets(
    docs: Iterable[Document],
    subs_by_id: dict[str, QuerySubcomponents],
) -> dict[str, set[str]]:
    """Map document id -> ids of the queries/questions it is relevant to."""
    out: dict[str, set[str]] = {}
    for doc in docs:
        out[doc.id] = {qid for qid, subs in subs_by_id.items() if label_relevance(doc, subs)}
    return out


def with_observed_count(doc: Document, count: int) -> Document:
    return replace(doc, observed_count=count)
