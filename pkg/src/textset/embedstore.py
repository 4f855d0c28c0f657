"""Model-keyed sentence-embedding store with a bit-exact binary format.

File layout (little-endian throughout):

    magic   4 bytes  b"SCEV"
    version u32      1
    dim     u32
    count   u64
    mlen    u32      byte length of model_id
    model   mlen bytes of UTF-8
    records count * (32-byte SHA-256 key + dim float32)

Records are written in ascending key order, so exporting an unchanged store
reproduces the input byte for byte. Vectors are stored as float32 and widened
to float64 on lookup. Sentence keys hash the exact UTF-8 bytes; no text
normalization happens here.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "StoreError",
    "BadMagic",
    "VersionUnsupported",
    "TruncatedFile",
    "ModelStore",
    "sentence_key",
    "import_file",
    "export_file",
    "import_jsonl",
    "export_jsonl",
    "lookup",
]

log = logging.getLogger(__name__)

MAGIC = b"SCEV"
VERSION = 1
KEY_BYTES = 32
_HEADER = struct.Struct("<4sIIQ")


class StoreError(ValueError):
    pass


class BadMagic(StoreError):
    pass


class VersionUnsupported(StoreError):
    pass


class TruncatedFile(StoreError):
    pass


def sentence_key(text: str) -> bytes:
    return hashlib.sha256(text.encode("utf-8")).digest()


@dataclass
class ModelStore:
    """In-memory map from sentence key to float32 vector, plus identity."""

    model_id: str
    dim: int
    vectors: dict[bytes, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.vectors)

    def add(self, text: str, vector) -> None:
        self.add_key(sentence_key(text), vector)

    def add_key(self, key: bytes, vector) -> None:
        arr = np.asarray(vector, dtype=np.float32)
        if arr.shape != (self.dim,):
            raise StoreError(f"vector shape {arr.shape} != ({self.dim},)")
        if key in self.vectors:
            log.warning("duplicate key %s; last writer wins", key.hex()[:12])
        self.vectors[key] = arr

    def get(self, text: str) -> np.ndarray | None:
        """Vector for a sentence, widened to float64, or None if absent."""
        arr = self.vectors.get(sentence_key(text))
        return None if arr is None else arr.astype(np.float64)


def lookup(store: ModelStore, text: str) -> np.ndarray | None:
    return store.get(text)


def export_file(store: ModelStore, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, store.dim, len(store.vectors)))
        model_bytes = store.model_id.encode("utf-8")
        fh.write(struct.pack("<I", len(model_bytes)))
        fh.write(model_bytes)
        for key in sorted(store.vectors):
            fh.write(key)
            fh.write(store.vectors[key].astype("<f4").tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedFile(f"file truncated while reading {what}")
    return data


def import_file(path) -> ModelStore:
    with open(path, "rb") as fh:
        magic, version, dim, count = _HEADER.unpack(
            _read_exact(fh, _HEADER.size, "header"))
        if magic != MAGIC:
            raise BadMagic(f"bad magic {magic!r}; not an embedding store file")
        if version != VERSION:
            raise VersionUnsupported(f"unsupported version {version}")
        if dim < 2:
            raise StoreError(f"dim must be >= 2, got {dim}")
        (mlen,) = struct.unpack("<I", _read_exact(fh, 4, "model id length"))
        model_id = _read_exact(fh, mlen, "model id").decode("utf-8")
        store = ModelStore(model_id=model_id, dim=dim)
        rec_bytes = KEY_BYTES + 4 * dim
        for i in range(count):
            rec = _read_exact(fh, rec_bytes, f"record {i}")
            key = rec[:KEY_BYTES]
            vec = np.frombuffer(rec[KEY_BYTES:], dtype="<f4").copy()
            if key in store.vectors:
                log.warning("duplicate key %s; last writer wins", key.hex()[:12])
            store.vectors[key] = vec
        if fh.read(1):
            raise StoreError("trailing bytes after last record")
    return store


def export_jsonl(store: ModelStore, path) -> None:
    """Debug-friendly alternative format: header line then one record per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"model": store.model_id, "dim": store.dim}) + "\n")
        for key in sorted(store.vectors):
            vec = [float(v) for v in store.vectors[key]]
            fh.write(json.dumps({"h": key.hex(), "v": vec}) + "\n")


def import_jsonl(path) -> ModelStore:
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        store = ModelStore(model_id=header["model"], dim=int(header["dim"]))
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            store.add_key(bytes.fromhex(obj["h"]), obj["v"])
    return store
