"""On-disk document store: JSON-lines documents, flat float32 embedding files,
a manifest with checksums, and atomic directory swap for rebuilds."""
from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .documents import (
    CLASS_COLUMN,
    CLASS_TABLE,
    Document,
    HINT_CLASSES,
    SCHEMA_CLASSES,
)

STORE_VERSION = 1

MANIFEST_FILE = "manifest.json"
TABLES_FILE = "tables.jsonl"
COLUMNS_FILE = "columns.jsonl"
HINTS_FILE = "hints.jsonl"
EMB_RAW_FILE = "emb_raw.bin"
EMB_TAILORED_FILE = "emb_tailored.bin"
WEIGHTS_FILE = "weights.json"
ALLOCATION_FILE = "allocation.json"


class StoreVersionError(RuntimeError):
    """Manifest schema version does not match this code."""


class StoreCorruptError(RuntimeError):
    """A store file failed its checksum or is structurally damaged."""


@dataclass
class DocumentStore:
    documents: list[Document]
    dimension: int
    emb_raw: np.ndarray  # (n, d) float32, row i belongs to documents[i]
    emb_tailored: np.ndarray
    weights: dict = field(default_factory=dict)
    allocation: Optional[dict] = None
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        self.by_id = {doc.id: doc for doc in self.documents}
        self.row_of = {doc.id: i for i, doc in enumerate(self.documents)}

    def __len__(self) -> int:
        return len(self.documents)

    def schema_documents(self) -> list[Document]:
        return [d for d in self.documents if d.doc_class in SCHEMA_CLASSES]

    def hint_documents(self) -> list[Document]:
        return [d for d in self.documents if d.doc_class in HINT_CLASSES]

    def raw_matrix(self) -> np.ndarray:
        return self.emb_raw

    def tailored_matrix(self) -> np.ndarray:
        return self.emb_tailored

    def document(self, doc_id: str) -> Document:
        return self.by_id[doc_id]


def empty_store(dimension: int, manifest: dict | None = None) -> DocumentStore:
    z = np.zeros((0, dimension), dtype=np.float32)
    return DocumentStore(
        documents=[], dimension=dimension, emb_raw=z, emb_tailored=z.copy(),
        manifest=manifest or {},
    )


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _doc_lines(docs: list[Document], rows: dict[str, int]) -> bytes:
    lines = []
    for doc in docs:
        obj = doc.to_json()
        obj["row"] = rows[doc.id]
        lines.append(_dumps(obj))
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


def persist_store(store: DocumentStore, path: str | Path) -> dict:
    """Write the store; returns the manifest. Empty stores are manifest-only."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)

    rows = {doc.id: i for i, doc in enumerate(store.documents)}
    tables = [d for d in store.documents if d.doc_class == CLASS_TABLE]
    columns = [d for d in store.documents if d.doc_class == CLASS_COLUMN]
    hints = [d for d in store.documents if d.doc_class in HINT_CLASSES]

    files: dict[str, bytes] = {}
    if store.documents:
        files[TABLES_FILE] = _doc_lines(tables, rows)
        files[COLUMNS_FILE] = _doc_lines(columns, rows)
        files[HINTS_FILE] = _doc_lines(hints, rows)
        files[EMB_RAW_FILE] = np.ascontiguousarray(store.emb_raw, dtype="<f4").tobytes()
        files[EMB_TAILORED_FILE] = np.ascontiguousarray(
            store.emb_tailored, dtype="<f4"
        ).tobytes()
    if store.weights:
        files[WEIGHTS_FILE] = (_dumps(store.weights) + "\n").encode("utf-8")
    if store.allocation is not None:
        files[ALLOCATION_FILE] = (_dumps(store.allocation) + "\n").encode("utf-8")

    manifest = dict(store.manifest)
    manifest["version"] = STORE_VERSION
    manifest["dimension"] = store.dimension
    manifest["rows"] = len(store.documents)
    manifest["counts"] = {
        "table": len(tables),
        "column": len(columns),
        "hint": len(hints),
    }
    manifest["files"] = {
        name: {"sha256": _sha256(data), "bytes": len(data)} for name, data in files.items()
    }

    for name, data in files.items():
        (out / name).write_bytes(data)
    (out / MANIFEST_FILE).write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    store.manifest = manifest
    return manifest


def load_store(path: str | Path) -> DocumentStore:
    src = Path(path)
    manifest_path = src / MANIFEST_FILE
    if not manifest_path.exists():
        raise StoreCorruptError(f"no manifest at {src}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("version") != STORE_VERSION:
        raise StoreVersionError(
            f"store version {manifest.get('version')!r}, expected {STORE_VERSION}"
        )

    blobs: dict[str, bytes] = {}
    for name, meta in manifest.get("files", {}).items():
        fpath = src / name
        if not fpath.exists():
            raise StoreCorruptError(f"missing store file {name}")
        data = fpath.read_bytes()
        if _sha256(data) != meta["sha256"]:
            raise StoreCorruptError(f"checksum mismatch for {name}")
        blobs[name] = data

    dimension = manifest["dimension"]
    n = manifest["rows"]
    documents: list[Optional[Document]] = [None] * n
    for name in (TABLES_FILE, COLUMNS_FILE, HINTS_FILE):
        for line in blobs.get(name, b"").decode("utf-8").splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            documents[obj["row"]] = Document.from_json(obj)
    if any(d is None for d in documents):
        raise StoreCorruptError("document rows are not contiguous")

    def read_matrix(name: str) -> np.ndarray:
        data = blobs.get(name, b"")
        arr = np.frombuffer(data, dtype="<f4")
        if arr.size != n * dimension:
            raise StoreCorruptError(f"{name} has {arr.size} floats, expected {n * dimension}")
        return arr.reshape(n, dimension).copy()

    emb_raw = read_matrix(EMB_RAW_FILE)
    emb_tailored = read_matrix(EMB_TAILORED_FILE)

    weights = json.loads(blobs[WEIGHTS_FILE]) if WEIGHTS_FILE in blobs else {}
    allocation = json.loads(blobs[ALLOCATION_FILE]) if ALLOCATION_FILE in blobs else None

    return DocumentStore(
        documents=documents,  # type: ignore[arg-type]
        dimension=dimension,
        emb_raw=emb_raw,
        emb_tailored=emb_tailored,
        weights=weights,
        allocation=allocation,
        manifest=manifest,
    )


def persist_atomically(store: DocumentStore, path: str | Path) -> dict:
    """Persist into a temp sibling, then swap; a failed build never clobbers."""
    final = Path(path)
    final.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=final.name + ".build-", dir=final.parent))
    try:
        manifest = persist_store(store, tmp)
    except Exception:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if final.exists():
        old = Path(tempfile.mkdtemp(prefix=final.name + ".old-", dir=final.parent))
        backup = old / "previous"
        os.replace(final, backup)
        try:
            os.replace(tmp, final)
        except Exception:
            os.replace(backup, final)  # restore the previous store
            raise
        finally:
            shutil.rmtree(old, ignore_errors=True)
    else:
        os.replace(tmp, final)
    return manifest
