from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqltailor.sqlparser import (
    FilterComponent,
    LexError,
    QueryRecord,
    canonicalize,
    extract_subcomponents,
    parse_sql,
    parse_query_log_text,
    parse_workload,
)


def subs(sql: str):
    return extract_subcomponents(parse_sql(sql))


class TestParseSql:
    def test_minimal_select(self):
        ast = parse_sql("SELECT a FROM t")
        assert [t.name for t in ast.tables] == ["t"]
        assert ast.where_conjuncts == []
        assert ast.group_by_exprs == []
        assert not ast.unsupported

    def test_two_conjunct_where(self):
        ast = parse_sql("SELECT * FROM t WHERE x = 3 AND y > 2")
        assert len(ast.where_conjuncts) == 2

    def test_join_group_by_ast(self):
        # Hand-constructed AST oracle.
        ast = parse_sql("SELECT t1.a FROM t1 JOIN t2 ON t1.id = t2.tid GROUP BY t1.a")
        assert [t.name for t in ast.tables] == ["t1"]
        assert [j.table.name for j in ast.joins] == ["t2"]
        assert len(ast.joins[0].on_conjuncts) == 1
        assert len(ast.group_by_exprs) == 1
        got = subs("SELECT t1.a FROM t1 JOIN t2 ON t1.id = t2.tid GROUP BY t1.a")
        assert got.tables == ("t1", "t2")
        assert got.join_conditions == ("t1.id = t2.tid",)
        assert got.group_by == ("t1.a",)

    def test_unbalanced_quote_raises(self):
        with pytest.raises(LexError):
            parse_sql("SELECT a FROM t WHERE x = 'oops")

    def test_unbalanced_paren_raises(self):
        with pytest.raises(LexError):
            parse_sql("SELECT a FROM t WHERE (x = 1")

    def test_unsupported_statement_flagged_not_fatal(self):
        ast = parse_sql("INSERT INTO t VALUES (1)")
        assert ast.unsupported
        assert ast.kind == "other"

    def test_union_flagged(self):
        ast = parse_sql("SELECT a FROM t UNION SELECT b FROM s")
        assert ast.unsupported

    def test_cte_flagged(self):
        assert parse_sql("WITH x AS (SELECT 1) SELECT * FROM x").unsupported


class TestExtractSubcomponents:
    def test_fig1_join_path(self):
        # Hand-parsed oracle for the chemistry join-path scenario.
        got = subs(
            "SELECT atom.element FROM atom, cnt, bond "
            "WHERE atom.id = cnt.atom_id AND bond.id = cnt.bond_id"
        )
        assert got.tables == ("atom", "bond", "cnt")
        assert got.join_conditions == ("atom.id = cnt.atom_id", "bond.id = cnt.bond_id")
        assert got.filters == ()

    def test_bare_select_has_no_clauses(self):
        got = subs("SELECT a FROM t")
        assert got.tables == ("t",)
        assert got.join_conditions == ()
        assert got.filters == ()
        assert got.group_by == ()

    def test_group_by_resolves_single_table(self):
        assert subs("SELECT id FROM venue GROUP BY id").group_by == ("venue.id",)

    def test_aliases_resolve_to_base_tables(self):
        got = subs(
            "SELECT T1.a FROM trips AS T1 JOIN users T2 ON T2.uid = T1.user_id "
            "WHERE T1.dist > 3"
        )
        assert got.tables == ("trips", "users")
        assert got.join_conditions == ("trips.user_id = users.uid",)
        assert got.filters == (FilterComponent("trips.dist > 3", ("trips",)),)

    def test_comma_join_where_equality_is_join_not_filter(self):
        got = subs("SELECT a.x FROM a, b WHERE a.id = b.aid AND a.x > 1")
        assert got.join_conditions == ("a.id = b.aid",)
        assert [f.predicate for f in got.filters] == ["a.x > 1"]

    def test_subquery_components_merge_into_parent(self):
        got = subs("SELECT a FROM t WHERE x IN (SELECT y FROM s WHERE z = 1)")
        assert got.tables == ("s", "t")
        assert [f.predicate for f in got.filters] == ["s.z = 1"]

    def test_literal_preserved_in_filter(self):
        got = subs("SELECT userid FROM user WHERE birthdate/10000 = 1990")
        assert [f.predicate for f in got.filters] == ["user.birthdate/10000 = 1990"]

    def test_string_literal_case_preserved(self):
        got = subs("SELECT a FROM t WHERE name = 'John Smith'")
        assert [f.predicate for f in got.filters] == ["t.name = 'John Smith'"]


class TestCanonicalize:
    def test_equality_operands_sorted(self):
        assert canonicalize("T2.tid = T1.id") == "t1.id = t2.tid"

    def test_literal_kept_verbatim(self):
        assert canonicalize("birthdate/10000 = 1990") == "birthdate/10000 = 1990"

    def test_conjuncts_sorted(self):
        assert canonicalize("x = 3 AND a = 1") == "a = 1 and x = 3"

    @given(st.text(alphabet=" \t", min_size=0, max_size=3))
    def test_whitespace_variants_merge(self, pad):
        base = canonicalize("a.id = b.aid")
        assert canonicalize(f"a.id{pad} ={pad} b.aid") == base

    @given(
        st.sampled_from(["x", "y_2", "big_col"]),
        st.sampled_from(["=", ">", "<", ">=", "<="]),
        st.sampled_from(["3", "19.5", "'Lit'"]),
    )
    def test_idempotence(self, col, op, lit):
        once = canonicalize(f"{col} {op} {lit}")
        assert canonicalize(once) == once

    @settings(max_examples=50)
    @given(
        alias1=st.sampled_from(["t1", "left_t", "aa"]),
        alias2=st.sampled_from(["t2", "right_t", "bb"]),
        spaces=st.integers(min_value=1, max_value=4),
        swap=st.booleans(),
    )
    def test_alias_variants_produce_identical_join_paths(self, alias1, alias2, spaces, swap):
        pad = " " * spaces
        lhs, rhs = (f"{alias2}.tid", f"{alias1}.id")
        if swap:
            lhs, rhs = rhs, lhs
        sql = (
            f"SELECT {alias1}.a FROM trips{pad}{alias1} JOIN users {alias2} "
            f"ON {lhs}{pad}={pad}{rhs}"
        )
        got = subs(sql)
        assert got.join_conditions == ("trips.id = users.tid",)


class TestWorkloadBatch:
    def test_malformed_statements_skipped_with_diagnostics(self):
        records = [
            QueryRecord(id="q1", text="SELECT a FROM t"),
            QueryRecord(id="q2", text="SELECT a FROM t WHERE x = 'bad"),
            QueryRecord(id="q3", text="SELECT b FROM s"),
            QueryRecord(id="q4", text="SELECT ((a FROM t"),
        ]
        parsed, diagnostics = parse_workload(records)
        assert len(parsed) == 2
        assert len(diagnostics) == 2
        assert {r.id for r, _ in parsed} == {"q1", "q3"}

    def test_log_line_mode_with_counts(self):
        text = "3\tSELECT a FROM t\nSELECT b FROM s\nSELECT a FROM t\n"
        records = parse_query_log_text(text)
        assert [(r.text, r.observed_count) for r in records] == [
            ("SELECT a FROM t", 4),
            ("SELECT b FROM s", 1),
        ]

    def test_log_semicolon_mode(self):
        text = "SELECT a\nFROM t;\nSELECT b FROM s;"
        records = parse_query_log_text(text)
        assert len(records) == 2
        assert records[0].text == "SELECT a\nFROM t"

    def test_determinism(self):
        sql = "SELECT t1.a FROM t1 JOIN t2 ON t1.id = t2.tid WHERE t1.x > 2 GROUP BY t1.a"
        assert subs(sql) == subs(sql)

    def test_record_validation(self):
        with pytest.raises(ValueError):
            QueryRecord(id="q", text="   ")
        with pytest.raises(ValueError):
            QueryRecord(id="q", text="SELECT 1", observed_count=0)


class TestAliasSoundness:
    @settings(max_examples=60)
    @given(
        base1=st.sampled_from(["orders", "trips", "events"]),
        base2=st.sampled_from(["users", "drivers", "venues"]),
        alias1=st.sampled_from(["o", "x1", "left_side"]),
        alias2=st.sampled_from(["u", "x2", "right_side"]),
        with_as=st.booleans(),
    )
    def test_no_alias_ever_appears_as_a_table(self, base1, base2, alias1, alias2, with_as):
        kw = " AS " if with_as else " "
        sql = (
            f"SELECT {alias1}.a FROM {base1}{kw}{alias1} JOIN {base2}{kw}{alias2} "
            f"ON {alias1}.id = {alias2}.fk WHERE {alias1}.v > 1 GROUP BY {alias1}.a"
        )
        got = subs(sql)
        assert set(got.tables) == {base1, base2}
        aliases = {alias1, alias2}
        for table in got.tables:
            assert table not in aliases - {base1, base2}
        for cond in got.join_conditions:
            for side in cond.split(" = "):
                assert side.split(".")[0] in {base1, base2}
