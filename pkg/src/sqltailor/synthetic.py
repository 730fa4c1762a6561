"""Synthetic benchmark corpus: cryptically-named tables in join groups.

Each group is a star of satellite tables connected through a bridge table
whose name carries no semantics. Generated questions name the satellites and
the filter but never the bridge, so retrieving the bridge's table document
requires workload signal rather than text overlap. Filter literals come from
small per-column pools, planting duplicate join paths and filter predicates
across queries.
"""
from __future__ import annotations

import json
import random
import string
from dataclasses import dataclass
from pathlib import Path

_CONSONANTS = "bcdfghjklmnpqrstvwxz"


@dataclass
class CorpusBundle:
    schema_sql: str
    stats: dict
    pairs: list[dict]  # {id, question, sql}

    def log_lines(self) -> list[str]:
        return [p["sql"] for p in self.pairs]

    def write(self, out_dir: str | Path) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        schema = out / "schema.sql"
        stats = out / "stats.json"
        logs = out / "queries.log"
        pairs = out / "pairs.jsonl"
        schema.write_text(self.schema_sql, encoding="utf-8")
        stats.write_text(json.dumps(self.stats, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logs.write_text("\n".join(self.log_lines()) + "\n", encoding="utf-8")
        pairs.write_text(
            "\n".join(json.dumps(p, sort_keys=True) for p in self.pairs) + "\n",
            encoding="utf-8",
        )
        return {"schema": str(schema), "stats": str(stats), "logs": str(logs), "pairs": str(pairs)}


def _cryptic_name(rng: random.Random, taken: set[str]) -> str:
    while True:
        name = (
            rng.choice(_CONSONANTS)
            + rng.choice(_CONSONANTS)
            + rng.choice(string.ascii_lowercase)
            + rng.choice("0123456789")
        )
        if name not in taken:
            taken.add(name)
            return name


def generate_corpus(
    seed: int = 0,
    n_tables: int = 50,
    n_pairs: int = 400,
    group_size: int = 4,
) -> CorpusBundle:
    """Deterministic corpus; same seed and sizes reproduce identical files."""
    rng = random.Random(seed)
    taken: set[str] = set()

    n_groups = max(1, n_tables // (group_size + 1))
    groups = []
    used = 0
    for _g in range(n_groups):
        satellites = [_cryptic_name(rng, taken) for _ in range(group_size - 1)]
        bridge = _cryptic_name(rng, taken)
        groups.append({"bridge": bridge, "satellites": satellites})
        used += group_size
    standalone = [_cryptic_name(rng, taken) for _ in range(max(0, n_tables - used))]

    create_statements: list[str] = []
    stats: dict = {}
    filter_columns: dict[str, list[tuple[str, list[int]]]] = {}
    data_columns: dict[str, list[str]] = {}

    pool_base = [0]

    def add_satellite(name: str) -> None:
        cols = [f"{name}_d{j}" for j in range(rng.randint(1, 3))]
        fcol = f"{name}_k"
        # Disjoint literal ranges per table keep filter literals table-specific.
        lo = pool_base[0] * 1000 + 1
        pool_base[0] += 1
        pool = sorted(rng.sample(range(lo, lo + 999), rng.randint(3, 5)))
        create_statements.append(
            f"CREATE TABLE {name} (id integer PRIMARY KEY, "
            + ", ".join(f"{c} text" for c in cols)
            + f", {fcol} integer)"
        )
        stats[name] = {fcol: [[v, rng.randint(2, 40)] for v in pool]}
        filter_columns[name] = [(fcol, pool)]
        data_columns[name] = cols

    for group in groups:
        for sat in group["satellites"]:
            add_satellite(sat)
        bridge = group["bridge"]
        fk_cols = ", ".join(f"{sat}_id integer" for sat in group["satellites"])
        create_statements.append(
            f"CREATE TABLE {bridge} (id integer PRIMARY KEY, {fk_cols})"
        )
        data_columns[bridge] = []
    for name in standalone:
        add_satellite(name)

    schema_sql = ";\n".join(create_statements) + ";\n"

    pairs: list[dict] = []
    for i in range(n_pairs):
        pid = f"p{i:05d}"
        if standalone and rng.random() < 0.15:
            table = rng.choice(standalone)
            fcol, pool = filter_columns[table][0]
            literal = rng.choice(pool)
            op = rng.choice(("=", ">", "<"))
            select_col = rng.choice(data_columns[table] + ["id"])
            sql = f"SELECT {select_col} FROM {table} WHERE {fcol} {op} {literal}"
            question = f"Which rows of {table} satisfy {fcol} {op} {literal}?"
            if rng.random() < 0.3:
                sql += f" GROUP BY {select_col}"
                question = question[:-1] + f", grouped by {select_col}?"
            pairs.append({"id": pid, "question": question, "sql": sql})
            continue

        group = rng.choice(groups)
        bridge = group["bridge"]
        n_sats = rng.randint(2, len(group["satellites"]))
        sats = rng.sample(group["satellites"], n_sats)
        join_conds = " AND ".join(f"{sat}.id = {bridge}.{sat}_id" for sat in sats)
        fsat = rng.choice(sats)
        fcol, pool = filter_columns[fsat][0]
        literal = rng.choice(pool)
        op = rng.choice(("=", ">", "<"))
        select_col = rng.choice(data_columns[sats[0]] + ["id"])
        from_list = ", ".join(sats + [bridge])
        sql = (
            f"SELECT {sats[0]}.{select_col} FROM {from_list} "
            f"WHERE {join_conds} AND {fsat}.{fcol} {op} {literal}"
        )
        question = (
            f"Which rows of {', '.join(sorted(sats))} satisfy {fcol} {op} {literal}?"
        )
        if rng.random() < 0.25:
            gcol = f"{sats[0]}.{select_col}"
            sql += f" GROUP BY {gcol}"
            question = question[:-1] + f", grouped by {select_col}?"
        pairs.append({"id": pid, "question": question, "sql": sql})

    return CorpusBundle(schema_sql=schema_sql, stats=stats, pairs=pairs)
