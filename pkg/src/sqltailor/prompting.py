"""Prompt assembly and SQL extraction from model responses.

One fixed template is used for every question; its text is a versioned asset
of this module so prompts are reproducible across runs.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .retrieval import BUCKET_COLUMNS, BUCKET_HINTS, BUCKET_TABLES, RetrievalResult
from .store import DocumentStore
from .tokens import TokenCounter

TEMPLATE_ID = "nl2sql-prompt/v1"

INSTRUCTIONS = (
    "You are a SQL assistant. Using the table schemas, column samples, and "
    "workload hints below, write one SQL query that answers the question. "
    "Reply with the SQL inside a fenced code block."
)

_SECTION_TITLES = {
    BUCKET_TABLES: "Table schemas:",
    BUCKET_COLUMNS: "Column samples:",
    BUCKET_HINTS: "Workload hints:",
}


@dataclass
class PromptAssembly:
    template_id: str
    sections: list[tuple[str, str]]
    rendered: str
    token_count: int
    section_tokens: dict[str, int] = field(default_factory=dict)


def assemble_prompt(
    question: str,
    retrieval: RetrievalResult,
    store: DocumentStore,
    counter: TokenCounter | None = None,
) -> PromptAssembly:
    """Deterministic rendering in fixed section order: instructions, tables,
    columns, hints, question. Hint lines carry their observation counter."""
    counter = counter or TokenCounter()
    sections: list[tuple[str, str]] = [("instructions", INSTRUCTIONS)]

    for bucket in (BUCKET_TABLES, BUCKET_COLUMNS, BUCKET_HINTS):
        picked = retrieval.buckets.get(bucket, [])
        if not picked:
            continue
        lines = [_SECTION_TITLES[bucket]]
        for item in picked:
            doc = store.document(item.id)
            if bucket == BUCKET_HINTS:
                times = "time" if doc.observed_count == 1 else "times"
                lines.append(
                    f"- {doc.content} (observed {doc.observed_count} {times} in past queries)"
                )
            else:
                lines.append(doc.content)
        sections.append((bucket, "\n".join(lines)))

    sections.append(("question", f"Question: {question}"))

    rendered = "\n\n".join(text for _name, text in sections)
    section_tokens = {name: counter.count(text) for name, text in sections}
    return PromptAssembly(
        template_id=TEMPLATE_ID,
        sections=sections,
        rendered=rendered,
        token_count=sum(section_tokens.values()),
        section_tokens=section_tokens,
    )


_FENCE_RE = re.compile(r"```(?:sql)?\s*\n(.*?)```", re.DOTALL | re.IGNORECASE)
_STATEMENT_RE = re.compile(r"(?im)^[ \t]*(select|with)\b.*", re.DOTALL)


@dataclass(frozen=True)
class SqlExtraction:
    sql: str
    found: bool  # False means NoSqlFound; sql carries the raw response


def extract_sql(response: str) -> SqlExtraction:
    """First fenced code block, else the first SELECT/WITH statement, verbatim."""
    m = _FENCE_RE.search(response)
    if m:
        return SqlExtraction(sql=m.group(1).strip(), found=True)
    m = _STATEMENT_RE.search(response)
    if m:
        return SqlExtraction(sql=m.group(0).strip(), found=True)
    return SqlExtraction(sql=response, found=False)
