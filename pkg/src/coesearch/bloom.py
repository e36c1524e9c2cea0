"""Keyed hash families, algebraic Bloom filters and Bloom filter sets.

Hash functions are modelled as random oracles. The instantiation derives an
AES-128 key from SHA-256 over ``(seed, domain_tag)`` and evaluates
``h_q(x) = 1 + (AES_K(q || round || x) mod ell)``. Using a block cipher as the
PRF lets one family hash a whole index range in a single call. The ``mod ell``
bias is below ``ell / 2**64`` and is ignored.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .errors import ConfigurationError

_HASH_LABEL = b"coesearch/hash/v1"


def _as_bytes(x) -> bytes:
    if isinstance(x, bytes):
        return x
    if isinstance(x, str):
        return x.encode()
    if isinstance(x, int):
        return x.to_bytes(max(1, (x.bit_length() + 8) // 8), "big", signed=True)
    raise TypeError(f"cannot use {type(x).__name__} as a hash seed or tag")


def keyword_id(keyword) -> int:
    """Map a keyword to the 64-bit integer the PRF consumes."""
    if isinstance(keyword, (int, np.integer)):
        k = int(keyword)
        if not 0 <= k < 2**64:
            raise ValueError("integer keywords must fit in 64 bits")
        return k
    return int.from_bytes(hashlib.sha256(_as_bytes(keyword)).digest()[:8], "big")


class HashFamily:
    """``eta`` hash functions ``[keyword] -> [1, ell]``.

    With ``distinct=True`` the ``eta`` positions of one keyword are forced to
    be pairwise different (duplicates are re-drawn with a round counter).
    """

    def __init__(self, eta: int, ell: int, seed=0, domain_tag=0, distinct: bool = False):
        if eta < 1 or ell < 1:
            raise ConfigurationError("eta and ell must be positive")
        if distinct and eta > ell:
            raise ConfigurationError("distinct positions need eta <= ell")
        self.eta = eta
        self.ell = ell
        self.seed = seed
        self.domain_tag = domain_tag
        self.distinct = distinct
        key = hashlib.sha256(_HASH_LABEL + b"|" + _as_bytes(seed) + b"|" + _as_bytes(domain_tag)).digest()[:16]
        self._cipher = Cipher(algorithms.AES(key), modes.ECB())

    def __repr__(self):
        return (f"HashFamily(eta={self.eta}, ell={self.ell}, seed={self.seed!r}, "
                f"domain_tag={self.domain_tag!r}, distinct={self.distinct})")

    def __eq__(self, other):
        return isinstance(other, HashFamily) and (self.eta, self.ell, self.seed, self.domain_tag, self.distinct) == (
            other.eta, other.ell, other.seed, other.domain_tag, other.distinct)

    def __hash__(self):
        return hash((self.eta, self.ell, repr(self.seed), repr(self.domain_tag), self.distinct))

    def _prf(self, hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
        blocks = np.empty((len(hi), 2), dtype=">u8")
        blocks[:, 0] = hi
        blocks[:, 1] = lo
        enc = self._cipher.encryptor()
        out = enc.update(blocks.tobytes()) + enc.finalize()
        words = np.frombuffer(out, dtype=">u8").reshape(-1, 2)[:, 0]
        return (words % np.uint64(self.ell)).astype(np.int64)

    def cells(self, keywords) -> np.ndarray:
        """0-based cell positions, shape ``(len(keywords), eta)``."""
        if isinstance(keywords, np.ndarray) and keywords.dtype.kind in "iu":
            xs = keywords.astype(np.uint64)
        else:
            xs = np.array([keyword_id(k) for k in keywords], dtype=np.uint64)
        n = len(xs)
        if n == 0:
            return np.zeros((0, self.eta), dtype=np.int64)
        q = np.arange(1, self.eta + 1, dtype=np.uint64)
        hi = np.broadcast_to((q << np.uint64(32))[None, :], (n, self.eta)).ravel()
        lo = np.repeat(xs, self.eta)
        pos = self._prf(hi, lo).reshape(n, self.eta)
        if self.distinct and self.eta > 1:
            pos = self._redraw_duplicates(pos, xs)
        return pos

    def _redraw_duplicates(self, pos: np.ndarray, xs: np.ndarray) -> np.ndarray:
        rnd = 0
        while True:
            order = np.argsort(pos, axis=1, kind="stable")
            sp = np.take_along_axis(pos, order, axis=1)
            dup_sorted = np.zeros(pos.shape, dtype=bool)
            dup_sorted[:, 1:] = sp[:, 1:] == sp[:, :-1]
            if not dup_sorted.any():
                return pos
            dup = np.zeros(pos.shape, dtype=bool)
            np.put_along_axis(dup, order, dup_sorted, axis=1)
            rnd += 1
            rows, cols = np.nonzero(dup)
            hi = ((cols + 1).astype(np.uint64) << np.uint64(32)) | np.uint64(rnd)
            pos[rows, cols] = self._prf(hi, xs[rows])

    def h(self, q: int, keyword) -> int:
        """The ``q``-th hash (1-based) of ``keyword``, in ``[1, ell]``."""
        if not 1 <= q <= self.eta:
            raise ValueError(f"q must be in [1, {self.eta}]")
        return int(self.cells([keyword])[0, q - 1]) + 1


def false_positive_rate(eta: int, s: int, ell: int) -> float:
    """Standard approximation ``(1 - exp(-eta s / ell))^eta``."""
    return (1.0 - math.exp(-eta * s / ell)) ** eta


def ell_for_rate(eta: int, s: int, m: int) -> int:
    """Cells for false-positive rate at most ``1/m``: ``ceil(eta s m^(1/eta))``."""
    return max(1, math.ceil(eta * s * m ** (1.0 / eta) - 1e-9))


class AlgebraicBloomFilter:
    """Plaintext counting filter: insertion adds 1 to each hashed cell."""

    def __init__(self, family: HashFamily, cells: Sequence[int] | None = None):
        self.family = family
        if cells is None:
            self.cells = np.zeros(family.ell, dtype=np.int64)
        else:
            if len(cells) != family.ell:
                raise ValueError("cell vector length does not match the family")
            self.cells = np.array([int(c) for c in cells], dtype=np.int64)
        self.checks = 0

    def insert(self, keyword):
        self.insert_many([keyword])

    def insert_many(self, keywords):
        pos = self.family.cells(keywords).ravel()
        np.add.at(self.cells, pos, 1)

    def check(self, keyword) -> bool:
        return bool(self.check_many([keyword])[0])

    def check_many(self, keywords) -> np.ndarray:
        pos = self.family.cells(keywords)
        self.checks += len(pos)
        if len(pos) == 0:
            return np.zeros(0, dtype=bool)
        return (self.cells[pos] > 0).all(axis=1)

    def merge(self, other: "AlgebraicBloomFilter") -> "AlgebraicBloomFilter":
        if other.family != self.family:
            raise ValueError("cannot merge filters with different hash families")
        return AlgebraicBloomFilter(self.family, self.cells + other.cells)

    def __eq__(self, other):
        return (isinstance(other, AlgebraicBloomFilter) and self.family == other.family
                and np.array_equal(self.cells, other.cells))


class BloomFilterSet:
    """Cells hold sums (mod ``p``) of the values whose keys hash to them."""

    def __init__(self, family: HashFamily, p: int | None, cells: Sequence[int] | None = None):
        self.family = family
        self.p = p
        if cells is None:
            self.cells = [0] * family.ell
        else:
            self.cells = [int(c) if p is None else int(c) % p for c in cells]
        if len(self.cells) != family.ell:
            raise ValueError("cell vector length does not match the family")

    def insert(self, key, value: int):
        for j in self.family.cells([key])[0]:
            c = self.cells[j] + value
            self.cells[j] = c if self.p is None else c % self.p

    def values(self, is_valid: Callable[[int], bool]) -> list[int]:
        """Cells that pass ``is_valid`` (a checksum test), in cell order."""
        out = []
        seen = set()
        for c in self.cells:
            if c and is_valid(c) and c not in seen:
                seen.add(c)
                out.append(c)
        return out


@dataclass
class EncryptedCells:
    """Encrypted cell vector; ``None`` marks an unset cell (decrypts to 0)."""

    cells: list = field(default_factory=list)

    def __len__(self):
        return len(self.cells)


def total_collisions(positions: np.ndarray) -> np.ndarray:
    """Per key, whether every one of its cells is shared with another (key, q).

    ``positions`` has shape ``(s, eta)``; occupancy counts multiplicity over q.
    """
    counts = np.bincount(positions.ravel())
    return (counts[positions] >= 2).all(axis=1)


def total_collision_rate(s: int, eta: int, ell: int, trials: int, seed=0, distinct: bool = True) -> float:
    """Monte Carlo estimate of ``Pr[exists k_i : TCOL(k_i)]`` for ``s`` keys."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if s == 0:
        return 0.0
    rng = random.Random(seed)
    hits = 0
    for t in range(trials):
        fam = HashFamily(eta, ell, seed=(seed, t).__repr__(), domain_tag="tcol", distinct=distinct)
        keys = np.array(rng.sample(range(1, 2**62), s), dtype=np.int64)
        if total_collisions(fam.cells(keys)).any():
            hits += 1
    return hits / trials
