from __future__ import annotations

import json
from pathlib import Path

import pytest

from sqltailor.config import EngineConfig
from sqltailor.pipeline import BuildInputs, build_store

FIG1_SCHEMA = """\
CREATE TABLE atom (id integer PRIMARY KEY, element text, charge integer);
CREATE TABLE bond (id integer PRIMARY KEY, kind text);
CREATE TABLE cnt (id integer PRIMARY KEY, atom_id integer, bond_id integer);
CREATE TABLE venue (id integer PRIMARY KEY, name text);
CREATE TABLE user (userid integer PRIMARY KEY, birthdate integer);
"""

FIG1_STATS = {
    "user": {"birthdate": [[19900312, 10], [19851130, 6], [19771004, 3]]},
}

FIG1_LOG = """\
SELECT atom.element FROM atom, cnt, bond WHERE atom.id = cnt.atom_id AND bond.id = cnt.bond_id
SELECT atom.charge FROM atom, cnt, bond WHERE atom.id = cnt.atom_id AND bond.id = cnt.bond_id
SELECT bond.kind FROM atom, cnt, bond WHERE atom.id = cnt.atom_id AND bond.id = cnt.bond_id
SELECT cnt.id FROM atom, cnt, bond WHERE atom.id = cnt.atom_id AND bond.id = cnt.bond_id
SELECT atom.id FROM atom, cnt, bond WHERE atom.id = cnt.atom_id AND bond.id = cnt.bond_id
SELECT id FROM venue GROUP BY id
SELECT name FROM venue GROUP BY id
SELECT userid FROM user WHERE birthdate/10000 = 1990
SELECT userid FROM user WHERE birthdate/10000 = 1990
"""


@pytest.fixture
def fig1_inputs(tmp_path: Path) -> BuildInputs:
    schema = tmp_path / "schema.sql"
    stats = tmp_path / "stats.json"
    logs = tmp_path / "queries.log"
    schema.write_text(FIG1_SCHEMA, encoding="utf-8")
    stats.write_text(json.dumps(FIG1_STATS), encoding="utf-8")
    logs.write_text(FIG1_LOG, encoding="utf-8")
    return BuildInputs(schema_path=str(schema), logs_path=str(logs), stats_path=str(stats))


@pytest.fixture
def small_config() -> EngineConfig:
    return EngineConfig(total_tokens=800, bo_budget=12, seed=1)


@pytest.fixture
def fig1_store_dir(fig1_inputs, small_config, tmp_path: Path) -> Path:
    out = tmp_path / "store"
    build_store(fig1_inputs, small_config, out)
    return out
