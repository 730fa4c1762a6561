"""Token counting for prompt budgets."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional

# A token is a maximal run of word characters, or a single punctuation char.
_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def split_tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


@dataclass
class TokenCounter:
    """Counts tokens either by the whitespace/punctuation rule or via a provider."""

    mode: str = "whitespace"  # "whitespace" | "provider"
    provider_fn: Optional[Callable[[str], int]] = None

    def count(self, text: str) -> int:
        if self.mode == "provider":
            if self.provider_fn is None:
                raise ValueError("provider mode requires a provider_fn")
            return self.provider_fn(text)
        return len(_TOKEN_RE.findall(text))


def count_tokens(text: str, counter: TokenCounter | None = None) -> int:
    if counter is None:
        return len(_TOKEN_RE.findall(text))
    return counter.count(text)
