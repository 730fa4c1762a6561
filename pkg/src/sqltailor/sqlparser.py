"""Parsing of logged SQL into canonical query subcomponents.

Supports a SELECT-core subset: joins written as JOIN ... ON or as comma lists
with WHERE equalities, conjunctive WHERE clauses, GROUP BY, and one level of
nested subqueries (flattened into the enclosing component sets). Anything
outside the subset yields a partial AST with ``unsupported`` set instead of an
error; only lexical damage (unbalanced quotes or parentheses) raises
``LexError``, and batch helpers turn that into a skip plus a diagnostic.

Canonical form: identifiers lowercased and alias-resolved to base table names,
deterministic token spacing, equality operands sorted when both sides are pure
column references, conjunct and column lists sorted. Literals are preserved
verbatim, including their quoting and case.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

logger = logging.getLogger(__name__)


class LexError(ValueError):
    """Raised for lexically broken SQL (unterminated string, unbalanced parens)."""


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_KEYWORDS = {
    "SELECT", "DISTINCT", "FROM", "WHERE", "GROUP", "BY", "HAVING", "ORDER",
    "LIMIT", "OFFSET", "JOIN", "INNER", "LEFT", "RIGHT", "FULL", "CROSS",
    "NATURAL", "OUTER", "ON", "AS", "AND", "OR", "NOT", "IN", "IS", "NULL",
    "LIKE", "BETWEEN", "EXISTS", "UNION", "INTERSECT", "EXCEPT", "CASE",
    "WHEN", "THEN", "ELSE", "END", "ASC", "DESC", "WITH", "USING", "ESCAPE",
}

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_$]*")
_NUMBER_RE = re.compile(r"\d+(?:\.\d*)?(?:[eE][+-]?\d+)?")
_TWO_CHAR_OPS = ("<=", ">=", "<>", "!=", "||")
_ONE_CHAR_OPS = set("=<>+-*/%")
_PUNCT = set("(),.;")

IDENT = "ident"
KW = "kw"
NUMBER = "number"
STRING = "string"
OP = "op"
PUNCT = "punct"
SUBQ = "subq"  # sentinel planted by the parser, never produced by the lexer


@dataclass(frozen=True)
class Token:
    kind: str
    value: str


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(text)
    paren_depth = 0
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "'":
            j = i + 1
            while j < n:
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        j += 2
                        continue
                    break
                j += 1
            else:
                raise LexError("unterminated string literal")
            if j >= n:
                raise LexError("unterminated string literal")
            tokens.append(Token(STRING, text[i : j + 1]))
            i = j + 1
            continue
        if ch in ('"', "`"):
            j = text.find(ch, i + 1)
            if j < 0:
                raise LexError("unterminated quoted identifier")
            tokens.append(Token(IDENT, text[i + 1 : j].lower()))
            i = j + 1
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            word = m.group(0)
            kind = KW if word.upper() in _KEYWORDS else IDENT
            tokens.append(Token(kind, word))
            i = m.end()
            continue
        m = _NUMBER_RE.match(text, i)
        if m:
            tokens.append(Token(NUMBER, m.group(0)))
            i = m.end()
            continue
        two = text[i : i + 2]
        if two in _TWO_CHAR_OPS:
            tokens.append(Token(OP, two))
            i += 2
            continue
        if ch in _ONE_CHAR_OPS:
            tokens.append(Token(OP, ch))
            i += 1
            continue
        if ch in _PUNCT:
            if ch == "(":
                paren_depth += 1
            elif ch == ")":
                paren_depth -= 1
                if paren_depth < 0:
                    raise LexError("unbalanced parentheses")
            tokens.append(Token(PUNCT, ch))
            i += 1
            continue
        raise LexError(f"unexpected character {ch!r}")
    if paren_depth != 0:
        raise LexError("unbalanced parentheses")
    return tokens


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QueryRecord:
    """One logged SQL statement; exact duplicate log lines collapse here."""

    id: str
    text: str
    observed_count: int = 1

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("query text must be non-empty")
        if self.observed_count < 1:
            raise ValueError("observed_count must be >= 1")


@dataclass
class TableRef:
    name: str  # lowercased, dotted if schema-qualified
    alias: Optional[str] = None


@dataclass
class JoinClause:
    table: TableRef
    on_conjuncts: list[list[Token]] = field(default_factory=list)


@dataclass
class SqlAst:
    kind: str = "select"  # "select" | "other"
    tables: list[TableRef] = field(default_factory=list)
    joins: list[JoinClause] = field(default_factory=list)
    where_conjuncts: list[list[Token]] = field(default_factory=list)
    group_by_exprs: list[list[Token]] = field(default_factory=list)
    select_tokens: list[Token] = field(default_factory=list)
    extra_tokens: list[Token] = field(default_factory=list)  # HAVING/ORDER BY etc.
    subqueries: list["SqlAst"] = field(default_factory=list)
    unsupported: bool = False
    notes: list[str] = field(default_factory=list)


_CLAUSE_STOPS = {
    "FROM", "WHERE", "GROUP", "HAVING", "ORDER", "LIMIT", "OFFSET",
    "JOIN", "INNER", "LEFT", "RIGHT", "FULL", "CROSS", "NATURAL",
    "UNION", "INTERSECT", "EXCEPT", "ON",
}

_MAX_NESTING = 1  # parent plus one level of subqueries


class _Parser:
    def __init__(self, tokens: list[Token], depth: int = 0):
        self.toks = tokens
        self.i = 0
        self.depth = depth

    def _peek(self, k: int = 0) -> Optional[Token]:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def _next(self) -> Token:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def _at_kw(self, *words: str) -> bool:
        tok = self._peek()
        return tok is not None and tok.kind == KW and tok.value.upper() in words

    def _accept_kw(self, *words: str) -> bool:
        if self._at_kw(*words):
            self._next()
            return True
        return False

    def _at_punct(self, ch: str) -> bool:
        tok = self._peek()
        return tok is not None and tok.kind == PUNCT and tok.value == ch

    # -- expressions --------------------------------------------------------

    def _collect_expr(self, ast: SqlAst, stop_comma: bool = False) -> list[Token]:
        """Collect expression tokens until a top-level clause keyword.

        Subqueries are parsed recursively and replaced by a SUBQ sentinel
        whose value indexes into ``ast.subqueries``.
        """
        out: list[Token] = []
        depth = 0
        while True:
            tok = self._peek()
            if tok is None:
                break
            if depth == 0:
                if tok.kind == KW and tok.value.upper() in _CLAUSE_STOPS:
                    break
                if tok.kind == PUNCT and tok.value == ")":
                    break
                if tok.kind == PUNCT and tok.value == ";":
                    break
                if stop_comma and tok.kind == PUNCT and tok.value == ",":
                    break
            if tok.kind == PUNCT and tok.value == "(":
                nxt = self._peek(1)
                if nxt is not None and nxt.kind == KW and nxt.value.upper() == "SELECT":
                    self._next()  # (
                    out.append(self._parse_subquery(ast))
                    if self._at_punct(")"):
                        self._next()
                    continue
                depth += 1
            elif tok.kind == PUNCT and tok.value == ")":
                depth -= 1
            out.append(self._next())
        return out

    def _parse_subquery(self, parent: SqlAst) -> Token:
        child: SqlAst
        if self.depth + 1 > _MAX_NESTING:
            # Too deep: consume the inner select without interpreting it.
            child = SqlAst(kind="select", unsupported=True,
                           notes=["nested beyond supported depth"])
            self._skip_balanced()
            parent.unsupported = True
        else:
            inner = _Parser(self.toks, depth=self.depth + 1)
            inner.i = self.i
            child = inner.parse_select()
            self.i = inner.i
        parent.subqueries.append(child)
        return Token(SUBQ, str(len(parent.subqueries) - 1))

    def _skip_balanced(self) -> None:
        depth = 0
        while True:
            tok = self._peek()
            if tok is None:
                return
            if tok.kind == PUNCT and tok.value == "(":
                depth += 1
            elif tok.kind == PUNCT and tok.value == ")":
                if depth == 0:
                    return
                depth -= 1
            self._next()

    # -- clauses ------------------------------------------------------------

    def parse_select(self) -> SqlAst:
        ast = SqlAst()
        if not self._accept_kw("SELECT"):
            ast.kind = "other"
            ast.unsupported = True
            tok = self._peek()
            ast.notes.append(f"not a SELECT statement ({tok.value if tok else 'empty'})")
            return ast
        self._accept_kw("DISTINCT")
        ast.select_tokens = self._collect_expr(ast)

        if self._accept_kw("FROM"):
            self._parse_from(ast)

        if self._accept_kw("WHERE"):
            expr = self._collect_expr(ast)
            ast.where_conjuncts = _split_conjuncts(expr)

        if self._accept_kw("GROUP"):
            self._accept_kw("BY")
            while True:
                expr = self._collect_expr(ast, stop_comma=True)
                if expr:
                    ast.group_by_exprs.append(expr)
                if self._at_punct(","):
                    self._next()
                    continue
                break

        if self._accept_kw("HAVING"):
            ast.extra_tokens.extend(self._collect_expr(ast))
        if self._accept_kw("ORDER"):
            self._accept_kw("BY")
            ast.extra_tokens.extend(self._collect_expr(ast))
        if self._accept_kw("LIMIT"):
            ast.extra_tokens.extend(self._collect_expr(ast))
        if self._accept_kw("OFFSET"):
            ast.extra_tokens.extend(self._collect_expr(ast))

        if self._at_kw("UNION", "INTERSECT", "EXCEPT"):
            ast.unsupported = True
            ast.notes.append("set operation ignored")
            while self._peek() is not None and not self._at_punct(")"):
                if self._at_punct("("):
                    self._next()
                    self._skip_balanced()
                if self._peek() is not None and not self._at_punct(")"):
                    self._next()
            return ast

        while self._at_punct(";"):
            self._next()

        tok = self._peek()
        if tok is not None and not (tok.kind == PUNCT and tok.value == ")"):
            ast.unsupported = True
            ast.notes.append(f"unparsed trailing tokens near {tok.value!r}")
            # Leave the remainder unconsumed at depth 0; a parent paren scope
            # stops at ')'.
            while self._peek() is not None and not self._at_punct(")"):
                self._next()
        return ast

    def _parse_from(self, ast: SqlAst) -> None:
        while True:
            ref = self._parse_table_source(ast)
            if ref is not None:
                ast.tables.append(ref)
            while True:
                natural = self._accept_kw("NATURAL")
                if natural:
                    ast.unsupported = True
                    ast.notes.append("NATURAL join has no explicit condition")
                join_kw = False
                if self._at_kw("INNER", "LEFT", "RIGHT", "FULL", "CROSS"):
                    self._next()
                    self._accept_kw("OUTER")
                    join_kw = self._accept_kw("JOIN")
                elif self._accept_kw("JOIN"):
                    join_kw = True
                if not join_kw:
                    break
                jref = self._parse_table_source(ast)
                clause = JoinClause(table=jref) if jref is not None else None
                if self._accept_kw("ON"):
                    expr = self._collect_expr(ast)
                    if clause is not None:
                        clause.on_conjuncts = _split_conjuncts(expr)
                elif self._accept_kw("USING"):
                    ast.unsupported = True
                    ast.notes.append("USING join condition not expanded")
                    if self._at_punct("("):
                        self._next()
                        self._skip_balanced()
                        if self._at_punct(")"):
                            self._next()
                if clause is not None:
                    ast.joins.append(clause)
            if self._at_punct(","):
                self._next()
                continue
            break

    def _parse_table_source(self, ast: SqlAst) -> Optional[TableRef]:
        if self._at_punct("("):
            nxt = self._peek(1)
            if nxt is not None and nxt.kind == KW and nxt.value.upper() == "SELECT":
                self._next()
                self._parse_subquery(ast)
                if self._at_punct(")"):
                    self._next()
                self._accept_kw("AS")
                alias = None
                tok = self._peek()
                if tok is not None and tok.kind == IDENT:
                    alias = self._next().value.lower()
                # Derived tables are flattened; the alias deliberately maps to
                # nothing so its column references stay bare.
                return None
            # Parenthesized table reference.
            self._next()
            ref = self._parse_table_source(ast)
            if self._at_punct(")"):
                self._next()
            return ref
        tok = self._peek()
        if tok is None or tok.kind != IDENT:
            ast.unsupported = True
            ast.notes.append("missing table reference")
            return None
        parts = [self._next().value.lower()]
        while self._at_punct(".") and self._peek(1) is not None and self._peek(1).kind == IDENT:
            self._next()
            parts.append(self._next().value.lower())
        name = ".".join(parts)
        alias = None
        if self._accept_kw("AS"):
            tok = self._peek()
            if tok is not None and tok.kind == IDENT:
                alias = self._next().value.lower()
        else:
            tok = self._peek()
            if tok is not None and tok.kind == IDENT:
                alias = self._next().value.lower()
        return TableRef(name=name, alias=alias)


def _split_conjuncts(tokens: list[Token]) -> list[list[Token]]:
    """Split at top-level ANDs, keeping the AND inside BETWEEN ... AND ... intact."""
    conjuncts: list[list[Token]] = []
    current: list[Token] = []
    depth = 0
    between_pending = 0
    for tok in tokens:
        if tok.kind == PUNCT and tok.value == "(":
            depth += 1
        elif tok.kind == PUNCT and tok.value == ")":
            depth -= 1
        if tok.kind == KW and depth == 0:
            word = tok.value.upper()
            if word == "BETWEEN":
                between_pending += 1
            elif word == "AND":
                if between_pending > 0:
                    between_pending -= 1
                else:
                    if current:
                        conjuncts.append(current)
                    current = []
                    continue
        current.append(tok)
    if current:
        conjuncts.append(current)
    return conjuncts


def parse_sql(text: str) -> SqlAst:
    """Parse one SQL statement; raises LexError only for lexical damage."""
    if not text.strip():
        raise LexError("empty statement")
    tokens = tokenize(text)
    if not tokens:
        raise LexError("empty statement")
    if tokens[0].kind == KW and tokens[0].value.upper() == "WITH":
        ast = SqlAst(kind="other", unsupported=True, notes=["CTE not supported"])
        return ast
    return _Parser(tokens).parse_select()


# ---------------------------------------------------------------------------
# Canonical subcomponents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FilterComponent:
    predicate: str
    tables: tuple[str, ...]


@dataclass(frozen=True)
class QuerySubcomponents:
    """Canonical, deterministic decomposition of one parsed query."""

    tables: tuple[str, ...]
    join_conditions: tuple[str, ...]
    filters: tuple[FilterComponent, ...]
    group_by: tuple[str, ...]
    group_by_tables: tuple[str, ...]
    column_refs: tuple[str, ...]
    unsupported: bool = False


_TIGHT_OPS = {"+", "-", "*", "/", "%", "||"}
_VALUE_KINDS = {IDENT, NUMBER, STRING}


def _render(parts: list[Token]) -> str:
    out: list[str] = []
    prev: Optional[Token] = None
    tight_next = False
    for tok in parts:
        text = tok.value
        if prev is None:
            out.append(text)
        else:
            if tight_next:
                sep = ""
            elif text in (")", ",", ".", ";"):
                sep = ""
            elif prev.value in ("(", "."):
                sep = ""
            elif text == "(" and prev.kind == IDENT:
                sep = ""  # function call
            elif tok.kind == OP and text in _TIGHT_OPS and (
                prev.kind in _VALUE_KINDS or prev.value == ")"
            ):
                sep = ""
            else:
                sep = " "
            out.append(sep + text)
        tight_next = tok.kind == OP and text in _TIGHT_OPS
        prev = tok
    return "".join(out)


class _Scope:
    """Alias resolution for one SELECT's local from-list."""

    def __init__(self, ast: SqlAst):
        refs = list(ast.tables) + [j.table for j in ast.joins]
        self.base_tables = sorted({r.name for r in refs})
        self.alias_map: dict[str, str] = {}
        for r in refs:
            self.alias_map[r.name] = r.name
            tail = r.name.split(".")[-1]
            self.alias_map.setdefault(tail, r.name)
            if r.alias:
                self.alias_map[r.alias] = r.name

    def resolve_qualifier(self, qualifier: str) -> str:
        return self.alias_map.get(qualifier, qualifier)

    def resolve_bare(self, column: str) -> Optional[str]:
        # A bare column is attributable only in a single-table scope.
        if len(self.base_tables) == 1:
            return self.base_tables[0]
        return None


def _canonical_tokens(tokens: list[Token], scope: _Scope) -> list[Token]:
    """Lowercase identifiers and rewrite alias-qualified references to base tables."""
    out: list[Token] = []
    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if tok.kind in (IDENT, KW):
            # Gather a dotted chain.
            chain = [tok.value.lower()]
            j = i + 1
            while (
                j + 1 < n
                and tokens[j].kind == PUNCT
                and tokens[j].value == "."
                and tokens[j + 1].kind in (IDENT, KW)
            ):
                chain.append(tokens[j + 1].value.lower())
                j += 2
            is_call = j < n and tokens[j].kind == PUNCT and tokens[j].value == "("
            if tok.kind == IDENT and not is_call and len(chain) >= 2:
                qualifier = ".".join(chain[:-1])
                base = scope.resolve_qualifier(qualifier)
                for k, part in enumerate(base.split(".") + [chain[-1]]):
                    if k > 0:
                        out.append(Token(PUNCT, "."))
                    out.append(Token(IDENT, part))
                i = j
                continue
            if tok.kind == IDENT and not is_call and len(chain) == 1:
                base = scope.resolve_bare(chain[0])
                if base is not None and chain[0] not in scope.alias_map:
                    for k, part in enumerate(base.split(".") + [chain[0]]):
                        if k > 0:
                            out.append(Token(PUNCT, "."))
                        out.append(Token(IDENT, part))
                    i = j
                    continue
            out.append(Token(tok.kind, tok.value.lower()))
            i += 1
            continue
        out.append(tok)
        i += 1
    return out


def _column_refs(tokens: list[Token], scope: _Scope) -> list[str]:
    """Canonical column references in a canonicalized token list."""
    refs: list[str] = []
    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if tok.kind != IDENT:
            i += 1
            continue
        chain = [tok.value]
        j = i + 1
        while (
            j + 1 < n
            and tokens[j].kind == PUNCT
            and tokens[j].value == "."
            and tokens[j + 1].kind == IDENT
        ):
            chain.append(tokens[j + 1].value)
            j += 2
        if j < n and tokens[j].kind == PUNCT and tokens[j].value == "(":
            i = j  # function name, not a column
            continue
        if len(chain) == 1 and chain[0] in scope.alias_map:
            i = j  # lone table/alias mention (e.g. "t.*" handled below)
            continue
        if j < n and tokens[j].kind == PUNCT and tokens[j].value == ".":
            i = j + 1  # "t.*" style: skip, the star is not a column
            continue
        refs.append(".".join(chain))
        i = j
    return refs


def _ref_tables(refs: Iterable[str], scope: _Scope) -> set[str]:
    tables = set()
    for ref in refs:
        if "." in ref:
            tables.add(ref.rsplit(".", 1)[0])
        else:
            base = scope.resolve_bare(ref)
            if base is not None:
                tables.add(base)
    return tables


def _strip_outer_parens(tokens: list[Token]) -> list[Token]:
    while (
        len(tokens) >= 2
        and tokens[0].kind == PUNCT
        and tokens[0].value == "("
        and tokens[-1].kind == PUNCT
        and tokens[-1].value == ")"
    ):
        depth = 0
        for k, tok in enumerate(tokens):
            if tok.kind == PUNCT and tok.value == "(":
                depth += 1
            elif tok.kind == PUNCT and tok.value == ")":
                depth -= 1
                if depth == 0 and k != len(tokens) - 1:
                    return tokens
        tokens = tokens[1:-1]
    return tokens


def _as_colref(tokens: list[Token]) -> Optional[str]:
    """Return "t.c" / "c" if the tokens form exactly one column reference."""
    if not tokens:
        return None
    if any(t.kind not in (IDENT, PUNCT) or (t.kind == PUNCT and t.value != ".") for t in tokens):
        return None
    if len(tokens) % 2 == 0:
        return None
    parts = []
    for k, tok in enumerate(tokens):
        if k % 2 == 0:
            if tok.kind != IDENT:
                return None
            parts.append(tok.value)
        elif not (tok.kind == PUNCT and tok.value == "."):
            return None
    return ".".join(parts)


def _classify_conjunct(tokens: list[Token], scope: _Scope):
    """Classify a canonicalized conjunct.

    Returns ("join", canonical) for an equality linking two base tables,
    ("merge", None) for subquery-bearing conjuncts, ("filter", canonical,
    tables) otherwise.
    """
    tokens = _strip_outer_parens(tokens)
    if any(t.kind == SUBQ for t in tokens):
        return ("merge", None, None)
    if not tokens:
        return ("merge", None, None)
    eq_positions = [
        k for k, t in enumerate(tokens) if t.kind == OP and t.value == "=" and _depth_at(tokens, k) == 0
    ]
    if len(eq_positions) == 1:
        k = eq_positions[0]
        lhs = _as_colref(_strip_outer_parens(tokens[:k]))
        rhs = _as_colref(_strip_outer_parens(tokens[k + 1 :]))
        if lhs is not None and rhs is not None:
            lhs_tbl = lhs.rsplit(".", 1)[0] if "." in lhs else None
            rhs_tbl = rhs.rsplit(".", 1)[0] if "." in rhs else None
            a, b = sorted((lhs, rhs))
            canonical = f"{a} = {b}"
            if lhs_tbl and rhs_tbl and lhs_tbl != rhs_tbl:
                return ("join", canonical, None)
            tables = tuple(sorted(_ref_tables([lhs, rhs], scope)))
            return ("filter", canonical, tables)
    canonical = _render(tokens)
    tables = tuple(sorted(_ref_tables(_column_refs(tokens, scope), scope)))
    return ("filter", canonical, tables)


def _depth_at(tokens: list[Token], idx: int) -> int:
    depth = 0
    for t in tokens[:idx]:
        if t.kind == PUNCT and t.value == "(":
            depth += 1
        elif t.kind == PUNCT and t.value == ")":
            depth -= 1
    return depth


def extract_subcomponents(ast: SqlAst) -> QuerySubcomponents:
    """Extract canonical tables / joins / filters / group-by, merging subqueries."""
    scope = _Scope(ast)
    tables = set(scope.base_tables)
    join_conditions: set[str] = set()
    filters: set[FilterComponent] = set()
    group_cols: set[str] = set()
    column_refs: set[str] = set()
    unsupported = ast.unsupported

    conjuncts = list(ast.where_conjuncts)
    for join in ast.joins:
        conjuncts.extend(join.on_conjuncts)

    for raw in conjuncts:
        canon = _canonical_tokens(raw, scope)
        column_refs.update(_column_refs(canon, scope))
        kind, canonical, tbls = _classify_conjunct(canon, scope)
        if kind == "join":
            join_conditions.add(canonical)
        elif kind == "filter":
            filters.add(FilterComponent(predicate=canonical, tables=tbls))

    for expr in ast.group_by_exprs:
        canon = _canonical_tokens(expr, scope)
        column_refs.update(_column_refs(canon, scope))
        ref = _as_colref(_strip_outer_parens(canon))
        group_cols.add(ref if ref is not None else _render(canon))

    for extra in (ast.select_tokens, ast.extra_tokens):
        canon = _canonical_tokens(extra, scope)
        column_refs.update(_column_refs(canon, scope))

    for child_ast in ast.subqueries:
        child = extract_subcomponents(child_ast)
        tables.update(child.tables)
        join_conditions.update(child.join_conditions)
        filters.update(child.filters)
        group_cols.update(child.group_by)
        column_refs.update(child.column_refs)
        unsupported = unsupported or child.unsupported

    group_by = tuple(sorted(group_cols))
    group_by_tables = tuple(sorted(_ref_tables(group_by, scope)))
    return QuerySubcomponents(
        tables=tuple(sorted(tables)),
        join_conditions=tuple(sorted(join_conditions)),
        filters=tuple(sorted(filters, key=lambda f: f.predicate)),
        group_by=group_by,
        group_by_tables=group_by_tables,
        column_refs=tuple(sorted(column_refs)),
        unsupported=unsupported,
    )


def canonicalize(fragment: str) -> str:
    """Canonical form of a raw predicate/column fragment (no query context)."""
    tokens = tokenize(fragment)
    empty = _Scope(SqlAst())
    conjuncts = _split_conjuncts(tokens)
    rendered = []
    for conj in conjuncts:
        canon = _canonical_tokens(conj, empty)
        kind, canonical, _tbls = _classify_conjunct(canon, empty)
        if kind == "join" or (kind == "filter" and canonical is not None):
            rendered.append(canonical)
        else:
            rendered.append(_render(_strip_outer_parens(canon)))
    return " and ".join(sorted(rendered))


# ---------------------------------------------------------------------------
# Log reading
# ---------------------------------------------------------------------------

_COUNT_PREFIX_RE = re.compile(r"^(\d+)\t")


def parse_query_log_text(text: str) -> list[QueryRecord]:
    """Split a log into QueryRecords; `;`-separated vs line-per-statement is auto-detected."""
    statements: list[tuple[str, int]] = []
    if ";" in text:
        raw_parts = text.split(";")
    else:
        raw_parts = text.splitlines()
    for part in raw_parts:
        stmt = part.strip()
        if not stmt:
            continue
        count = 1
        m = _COUNT_PREFIX_RE.match(stmt)
        if m:
            count = max(1, int(m.group(1)))
            stmt = stmt[m.end():].strip()
            if not stmt:
                continue
        statements.append((stmt, count))

    records: list[QueryRecord] = []
    index: dict[str, int] = {}
    counts: list[int] = []
    texts: list[str] = []
    for stmt, count in statements:
        if stmt in index:
            counts[index[stmt]] += count
        else:
            index[stmt] = len(texts)
            texts.append(stmt)
            counts.append(count)
    for i, stmt in enumerate(texts):
        records.append(QueryRecord(id=f"q{i:05d}", text=stmt, observed_count=counts[i]))
    return records


def read_query_log(path: str | Path) -> list[QueryRecord]:
    return parse_query_log_text(Path(path).read_text(encoding="utf-8"))


def parse_workload(
    records: Iterable[QueryRecord],
) -> tuple[list[tuple[QueryRecord, QuerySubcomponents]], list[str]]:
    """Parse every record; lexically broken ones are skipped with a diagnostic."""
    parsed: list[tuple[QueryRecord, QuerySubcomponents]] = []
    diagnostics: list[str] = []
    for record in records:
        try:
            ast = parse_sql(record.text)
        except LexError as exc:
            msg = f"skipped {record.id}: {exc}"
            diagnostics.append(msg)
            logger.warning(msg)
            continue
        parsed.append((record, extract_subcomponents(ast)))
    return parsed, diagnostics
