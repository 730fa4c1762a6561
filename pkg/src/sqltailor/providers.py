"""Embedding and generative providers.

Both contracts are deliberately tiny: an embedding provider maps text to a
fixed-dimension vector (deterministic within one store build), a generative
provider maps a prompt string to text. `mock` implementations are built in so
offline builds and tests need no network; `http` providers POST to a
configured endpoint.
"""
from __future__ import annotations

import hashlib
import logging
import re

import numpy as np

from . import sqlparser
from .tokens import split_tokens

logger = logging.getLogger(__name__)

SYNTH_QUESTION_MARKER = "Write one natural language question answered by this SQL query."

_FENCE_RE = re.compile(r"```(?:sql)?\s*\n(.*?)```", re.DOTALL | re.IGNORECASE)


class ProviderUnavailable(RuntimeError):
    """The configured provider cannot be reached; callers may retry."""


class EmbeddingProvider:
    name = "base"
    dimension = 0

    def embed(self, text: str) -> np.ndarray:
        raise NotImplementedError


class GenerativeProvider:
    name = "base"

    def generate(self, prompt: str) -> str:
        raise NotImplementedError

    def count_tokens(self, text: str) -> int:
        return len(split_tokens(text))


_WORD_RE = re.compile(r"\w+")


class MockEmbeddingProvider(EmbeddingProvider):
    """Hashed bag-of-tokens embedding: deterministic, L2-normalized.

    Word tokens are lowercased and each hashes to one coordinate with a hashed
    sign, so "a b" and "b a" embed identically (bag semantics). Punctuation is
    not hashed; it carries no meaning and its repetition would swamp the norm.
    """

    name = "mock"

    def __init__(self, dimension: int = 256):
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("cannot embed empty text")
        vec = np.zeros(self.dimension, dtype=np.float64)
        tokens = _WORD_RE.findall(text)
        if not tokens:
            tokens = [text]  # punctuation-only text still embeds deterministically
        for token in tokens:
            digest = hashlib.sha256(token.lower().encode("utf-8")).digest()
            idx = int.from_bytes(digest[:4], "little") % self.dimension
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            vec[idx] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0:
            vec /= norm
        return vec.astype(np.float32)


def _display_predicate(predicate: str, tables) -> str:
    """Strip "table." qualifiers so templated questions read naturally."""
    out = predicate
    for table in tables:
        out = out.replace(f"{table}.", "")
    return out


def question_from_sql(sql: str) -> str:
    """Deterministic question template for a parseable SQL statement."""
    ast = sqlparser.parse_sql(sql)
    subs = sqlparser.extract_subcomponents(ast)
    if not subs.tables:
        return ""
    text = "Which rows of " + ", ".join(subs.tables)
    if subs.filters:
        rendered = [_display_predicate(f.predicate, subs.tables) for f in subs.filters]
        text += " satisfy " + " and ".join(rendered)
    if subs.group_by:
        cols = [_display_predicate(c, subs.tables) for c in subs.group_by]
        text += ", grouped by " + ", ".join(cols)
    return text + "?"


class MockGenerativeProvider(GenerativeProvider):
    """Deterministic templates for the two prompt kinds the pipeline issues."""

    name = "mock"

    def generate(self, prompt: str) -> str:
        if SYNTH_QUESTION_MARKER in prompt:
            m = _FENCE_RE.search(prompt)
            if not m:
                return ""
            try:
                return question_from_sql(m.group(1).strip())
            except sqlparser.LexError:
                return ""
        # SQL-generation prompt: answer with a trivial query over the first
        # table whose schema appears in the prompt.
        m = re.search(r"CREATE\s+TABLE\s+(?:IF\s+NOT\s+EXISTS\s+)?([\w.$]+)", prompt, re.IGNORECASE)
        table = m.group(1).lower() if m else None
        if table is None:
            return "```sql\nSELECT 1\n```"
        return f"```sql\nSELECT * FROM {table}\n```"


class HttpEmbeddingProvider(EmbeddingProvider):
    name = "http"

    def __init__(self, endpoint: str, dimension: int, retries: int = 2, timeout: float = 30.0):
        self.endpoint = endpoint
        self.dimension = dimension
        self.retries = retries
        self.timeout = timeout

    def embed(self, text: str) -> np.ndarray:
        import requests

        last_error: Exception | None = None
        for _attempt in range(self.retries + 1):
            try:
                resp = requests.post(self.endpoint, json={"text": text}, timeout=self.timeout)
                resp.raise_for_status()
                values = resp.json()["embedding"]
                vec = np.asarray(values, dtype=np.float32)
                if vec.shape != (self.dimension,):
                    raise ProviderUnavailable(
                        f"endpoint returned dimension {vec.shape}, expected {self.dimension}"
                    )
                return vec
            except ProviderUnavailable:
                raise
            except Exception as exc:  # connection/HTTP/JSON errors are retryable
                last_error = exc
        raise ProviderUnavailable(f"embedding endpoint failed: {last_error}")


class HttpGenerativeProvider(GenerativeProvider):
    name = "http"

    def __init__(self, endpoint: str, retries: int = 2, timeout: float = 60.0):
        self.endpoint = endpoint
        self.retries = retries
        self.timeout = timeout

    def generate(self, prompt: str) -> str:
        import requests

        last_error: Exception | None = None
        for _attempt in range(self.retries + 1):
            try:
                resp = requests.post(self.endpoint, json={"prompt": prompt}, timeout=self.timeout)
                resp.raise_for_status()
                return resp.json()["text"]
            except Exception as exc:
                last_error = exc
        raise ProviderUnavailable(f"generative endpoint failed: {last_error}")


def make_embedding_provider(name: str, dimension: int, endpoint: str | None = None) -> EmbeddingProvider:
    if name == "mock":
        return MockEmbeddingProvider(dimension)
    if name == "http":
        if not endpoint:
            raise ValueError("http embedding provider needs an endpoint")
        return HttpEmbeddingProvider(endpoint, dimension)
    raise ValueError(f"unknown embedding provider {name!r}")


def make_generative_provider(name: str, endpoint: str | None = None) -> GenerativeProvider:
    if name == "mock":
        return MockGenerativeProvider()
    if name == "http":
        if not endpoint:
            raise ValueError("http generative provider needs an endpoint")
        return HttpGenerativeProvider(endpoint)
    raise ValueError(f"unknown generative provider {name!r}")
