from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqltailor.documents import ALL_CLASSES, Document, sort_documents
from sqltailor.store import (
    DocumentStore,
    StoreCorruptError,
    StoreVersionError,
    empty_store,
    load_store,
    persist_atomically,
    persist_store,
)


def make_doc(i: int, doc_class: str) -> Document:
    return Document(
        id=f"{doc_class}:{i:03d}",
        doc_class=doc_class,
        content=f"content number {i} of class {doc_class}",
        token_count=5 + i % 3,
        observed_count=1 + i % 4,
        source_query_ids=(f"q{i}",) if doc_class.endswith("hint") else (),
        subject_tables=(f"t{i % 5}",),
        payload={"table": f"t{i % 5}"},
    )


def make_store(n: int, dim: int = 8, seed: int = 0) -> DocumentStore:
    rng = np.random.default_rng(seed)
    docs = sort_documents(
        [make_doc(i, ALL_CLASSES[i % len(ALL_CLASSES)]) for i in range(n)]
    )
    raw = rng.normal(size=(n, dim)).astype(np.float32)
    tailored = rng.normal(size=(n, dim)).astype(np.float32)
    return DocumentStore(
        documents=docs,
        dimension=dim,
        emb_raw=raw,
        emb_tailored=tailored,
        weights={"w1": 0.25, "w2": 0.25, "w3": 0.25, "w4": 0.25},
        allocation={"T": 100, "t_tbl": 40, "t_col": 30, "t_hint": 30},
    )


class TestRoundTrip:
    def test_empty_store_is_manifest_only(self, tmp_path):
        store = empty_store(dimension=16)
        persist_store(store, tmp_path / "s")
        files = sorted(p.name for p in (tmp_path / "s").iterdir())
        assert files == ["manifest.json"]
        loaded = load_store(tmp_path / "s")
        assert len(loaded) == 0
        assert loaded.dimension == 16

    def test_round_trip_identity(self, tmp_path):
        store = make_store(17)
        persist_store(store, tmp_path / "s")
        loaded = load_store(tmp_path / "s")
        assert loaded.documents == store.documents
        np.testing.assert_array_equal(loaded.emb_raw, store.emb_raw)
        np.testing.assert_array_equal(loaded.emb_tailored, store.emb_tailored)
        assert loaded.weights == store.weights
        assert loaded.allocation == store.allocation

    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(min_value=0, max_value=40), dim=st.integers(min_value=1, max_value=32))
    def test_round_trip_property(self, tmp_path_factory, n, dim):
        out = tmp_path_factory.mktemp("store")
        store = make_store(n, dim=dim)
        persist_store(store, out)
        loaded = load_store(out)
        assert loaded.documents == store.documents
        np.testing.assert_array_equal(loaded.emb_raw, store.emb_raw)
        np.testing.assert_array_equal(loaded.emb_tailored, store.emb_tailored)

    def test_repersist_is_byte_identical(self, tmp_path):
        store = make_store(9)
        persist_store(store, tmp_path / "a")
        persist_store(load_store(tmp_path / "a"), tmp_path / "b")
        for name in ("manifest.json", "tables.jsonl", "columns.jsonl", "hints.jsonl",
                     "emb_raw.bin", "emb_tailored.bin", "weights.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestErrors:
    def test_version_bump_raises(self, tmp_path):
        persist_store(make_store(3), tmp_path / "s")
        manifest_path = tmp_path / "s" / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        manifest["version"] = 99
        manifest_path.write_text(json.dumps(manifest))
        with pytest.raises(StoreVersionError):
            load_store(tmp_path / "s")

    def test_corrupt_file_raises(self, tmp_path):
        persist_store(make_store(3), tmp_path / "s")
        path = tmp_path / "s" / "emb_raw.bin"
        path.write_bytes(b"\x00" * path.stat().st_size)
        with pytest.raises(StoreCorruptError):
            load_store(tmp_path / "s")

    def test_missing_file_raises(self, tmp_path):
        persist_store(make_store(3), tmp_path / "s")
        (tmp_path / "s" / "hints.jsonl").unlink()
        with pytest.raises(StoreCorruptError):
            load_store(tmp_path / "s")

    def test_missing_manifest_raises(self, tmp_path):
        with pytest.raises(StoreCorruptError):
            load_store(tmp_path)


class TestAtomicSwap:
    def test_swap_replaces_previous(self, tmp_path):
        persist_atomically(make_store(3), tmp_path / "s")
        first = load_store(tmp_path / "s")
        persist_atomically(make_store(5), tmp_path / "s")
        second = load_store(tmp_path / "s")
        assert len(first) == 3 and len(second) == 5

    def test_failed_persist_keeps_previous(self, tmp_path, monkeypatch):
        persist_atomically(make_store(3), tmp_path / "s")

        bad = make_store(5)
        bad.emb_raw = "not an array"  # forces a failure inside persist
        with pytest.raises(Exception):
            persist_atomically(bad, tmp_path / "s")
        assert len(load_store(tmp_path / "s")) == 3
