"""Square-root single-server PIR over an additive backend.

Records sit in an ``r x c`` row-major matrix with ``r = c = ceil(sqrt(n))``.
A query is ``r`` encrypted row-selector bits. The reply is, for every column
and every field-element chunk of a record, the homomorphic dot product of that
column's chunks with the selector. The client decrypts the reply and keeps
its column.

The server stores AES-GCM sealed copies of the records rather than the
records themselves; the sealing key never leaves the client.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .backend import Backend, Ciphertext

GCM_TAG_BYTES = 16


def side(n: int) -> int:
    return max(1, math.isqrt(n - 1) + 1) if n > 1 else 1


def chunk_bytes(p: int) -> int:
    """Bytes per field element such that every chunk is below ``p / 2``."""
    return max(1, (p.bit_length() - 2) // 8)


class RecordVault:
    """AES-GCM sealing of fixed-length records with index-derived nonces.

    Each index is sealed once per key, so the derived nonce never repeats.
    """

    def __init__(self, key: bytes | None = None):
        self.key = key if key is not None else AESGCM.generate_key(bit_length=128)
        self._aead = AESGCM(self.key)

    @staticmethod
    def _nonce(index: int) -> bytes:
        return hashlib.sha256(b"coesearch/nonce|" + index.to_bytes(8, "big")).digest()[:12]

    def seal(self, index: int, record: bytes) -> bytes:
        return self._aead.encrypt(self._nonce(index), record, index.to_bytes(8, "big"))

    def open(self, index: int, sealed: bytes) -> bytes:
        return self._aead.decrypt(self._nonce(index), sealed, index.to_bytes(8, "big"))

    @staticmethod
    def random_key() -> bytes:
        return os.urandom(16)


@dataclass
class PirDatabase:
    records: list[bytes]
    p: int
    rows: int = field(init=False)
    cols: int = field(init=False)
    record_len: int = field(init=False)
    chunks: int = field(init=False)
    _columns: list = field(init=False, repr=False)

    def __post_init__(self):
        if not self.records:
            raise ValueError("empty database")
        lens = {len(r) for r in self.records}
        if len(lens) != 1:
            raise ValueError("all records must have equal length")
        self.record_len = lens.pop()
        n = len(self.records)
        self.rows = self.cols = side(n)
        cb = chunk_bytes(self.p)
        self.chunks = max(1, -(-self.record_len // cb))
        padded = self.records + [bytes(self.record_len)] * (self.rows * self.cols - n)
        mat = [[_to_chunks(padded[r * self.cols + c], cb, self.chunks) for c in range(self.cols)]
               for r in range(self.rows)]
        # one scalar row per (column, chunk), ranging over matrix rows
        self._columns = [[mat[r][c][k] for r in range(self.rows)]
                         for c in range(self.cols) for k in range(self.chunks)]

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def reply_size(self) -> int:
        return self.cols * self.chunks


def _to_chunks(data: bytes, cb: int, count: int) -> list[int]:
    data = data + bytes(cb * count - len(data))
    return [int.from_bytes(data[k * cb:(k + 1) * cb], "big") for k in range(count)]


def pir_query(backend: Backend, i: int, n: int) -> list[Ciphertext]:
    """Encrypted indicator of the row holding record ``i`` (1-based)."""
    if not 1 <= i <= n:
        raise ValueError(f"index {i} outside [1, {n}]")
    r = side(n)
    row = (i - 1) // r
    return list(backend.enc_many([1 if k == row else 0 for k in range(r)]))


def pir_answer(backend: Backend, db: PirDatabase, query: Sequence[Ciphertext]) -> list[Ciphertext]:
    if len(query) != db.rows:
        raise ValueError(f"query has {len(query)} selectors, database has {db.rows} rows")
    return backend.dot_many(db._columns, query)


def pir_reconstruct(backend: Backend, i: int, n: int, record_len: int, reply: Sequence[Ciphertext]) -> bytes:
    c = side(n)
    if len(reply) % c:
        raise ValueError("reply length is not a multiple of the column count")
    chunks = len(reply) // c
    col = (i - 1) % c
    cb = chunk_bytes(backend.modulus.p)
    vals = backend.dec_many(reply[col * chunks:(col + 1) * chunks])
    data = b"".join(v.to_bytes(cb, "big") for v in vals)
    return data[:record_len]


def communication(n: int, record_len: int, p: int) -> int:
    """Ciphertexts per PIR instance: selectors plus reply."""
    c = side(n)
    return c + c * max(1, -(-record_len // chunk_bytes(p)))
