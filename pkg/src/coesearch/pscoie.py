"""Power-sum index encoding: ``s`` ciphertexts ``w_j = sum_i i^j v_i``.

Exact, with no false positives. Encoding uses only scalar multiplication and
addition; decoding recovers the index set as the roots of the monic
polynomial determined by the power sums.
"""

from __future__ import annotations

import random
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .backend import Backend, Ciphertext, _pack_ints, _unpack_ints
from .errors import ConfigurationError, DecodeError
from .field import PrimeModulus, roots_of_power_sums

_MAGIC = b"PSC1"


@dataclass
class PsCoieEncoding:
    n: int
    s: int
    p: int
    power_sums: list[Ciphertext] = field(repr=False)

    @property
    def ciphertext_count(self) -> int:
        return len(self.power_sums)

    def decrypt(self, backend: Backend) -> list[int]:
        return backend.dec_many(self.power_sums)

    def to_bytes(self, backend: Backend) -> bytes:
        return _MAGIC + _pack_ints([self.n, self.s, self.p]) + backend.serialize_cells(self.power_sums)

    @classmethod
    def from_bytes(cls, backend: Backend, data: bytes) -> "PsCoieEncoding":
        if data[:4] != _MAGIC:
            raise ValueError("not a PS-COIE encoding")
        (n, s, p), off = _unpack_ints(data, 4)
        if p != backend.modulus.p:
            raise ValueError("encoding modulus does not match the backend")
        cts, off = backend.deserialize_cells(data, off)
        if len(cts) != s or any(c is None for c in cts) or off != len(data):
            raise ValueError("malformed PS-COIE encoding")
        return cls(n, s, p, cts)


def _check_sizes(n: int, s: int, p: int):
    if s >= p or n >= p:
        raise ConfigurationError(f"need n < p and s < p (n={n}, s={s}, p={p})")


def pscoie_encode(backend: Backend, cts: Sequence[Ciphertext], s: int) -> PsCoieEncoding:
    """``s n`` smult and ``s (n - 1)`` hadd; ``s`` must be the exact count."""
    n = len(cts)
    p = backend.modulus.p
    _check_sizes(n, s, p)
    if s == 0:
        return PsCoieEncoding(n, 0, p, [])
    if n == 0:
        raise ValueError("cannot encode an empty vector with s > 0")
    return PsCoieEncoding(n, s, p, backend.dot_many(power_table(n, s, p), cts))


@lru_cache(maxsize=8)
def power_table(n: int, s: int, p: int) -> np.ndarray:
    """Public scalars ``i^j mod p`` for ``j = 1..s`` (rows), ``i = 1..n`` (columns).

    Built with a running product over ``j``; these plaintext multiplications
    are not homomorphic work.
    """
    base = np.arange(1, n + 1, dtype=object)
    rows = np.empty((s, n), dtype=object)
    power = base % p
    for j in range(s):
        rows[j] = power
        power = power * base % p
    rows.setflags(write=False)
    return rows


def pscoie_decode(w: Sequence[int], s: int, n: int, p: int, rng: random.Random | int | None = 0) -> list[int]:
    """The exact index set, sorted. Raises :class:`DecodeError` when the power
    sums do not describe ``s`` distinct indices in ``[1, n]``."""
    if len(w) != s:
        raise ValueError(f"expected {s} power sums, got {len(w)}")
    _check_sizes(n, s, p)
    if s == 0:
        return []
    roots = roots_of_power_sums(list(w), s, PrimeModulus(p), rng)
    out = sorted(roots)
    if len(out) != s or out[0] < 1 or out[-1] > n:
        raise DecodeError("power sums do not decode to s indices in [1, n]")
    return out


def power_sums(indices: Sequence[int], s: int, p: int) -> list[int]:
    """Direct plaintext power sums, for tests and client-side checks."""
    return [sum(pow(i, j, p) for i in indices) % p for j in range(1, s + 1)]
