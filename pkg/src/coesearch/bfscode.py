"""BFS-CODE: encrypted value encoding decoded through per-record checksums.

A record is one field element::

    packed = ((index * 2**mu + val) * 2**tau) + tag

where ``tag`` is the top ``tau`` bits of SHA-256 over ``(index, val)``. With
``salted=False`` the index field is absent and the tag covers the value only.
The modulus must leave room for sums of ``s * eta`` records without wrapping,
so a cell holding a sum of records almost never carries a valid tag.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .backend import Backend, Ciphertext, _pack_ints, _unpack_ints
from .bloom import BloomFilterSet, HashFamily
from .errors import ConfigurationError

DEFAULT_LAMBDA = 40
DEFAULT_TAU = 40
DEFAULT_MU = 16

_MAGIC = b"BSC1"


def _ceil_lg(x: int) -> int:
    return (x - 1).bit_length() if x > 1 else 0


@dataclass(frozen=True)
class RecordFormat:
    mu: int = DEFAULT_MU
    tau: int = DEFAULT_TAU
    index_bits: int = 0

    @property
    def salted(self) -> bool:
        return self.index_bits > 0

    @property
    def bits(self) -> int:
        return self.index_bits + self.mu + self.tau

    def checksum(self, val: int, index: int = 0) -> int:
        msg = b"coesearch/tag|" + (index.to_bytes(8, "big") if self.salted else b"") + val.to_bytes(
            max(8, (self.mu + 7) // 8), "big")
        return int.from_bytes(hashlib.sha256(msg).digest(), "big") >> (256 - self.tau)

    def require_field(self, p: int, summands: int):
        need = self.bits + _ceil_lg(max(summands, 1))
        if p <= 1 << need:
            raise ConfigurationError(f"plaintext modulus needs more than {need} bits for wrap-free record sums")


@dataclass(frozen=True)
class TaggedRecord:
    val: int
    tag: int
    index: int
    fmt: RecordFormat

    @property
    def packed(self) -> int:
        head = (self.index << self.fmt.mu) + self.val if self.fmt.salted else self.val
        return (head << self.fmt.tau) + self.tag


def attach_checksum(val: int, index: int, fmt: RecordFormat, p: int | None = None, summands: int = 1) -> TaggedRecord:
    if not 0 <= val < 1 << fmt.mu:
        raise ValueError(f"value must fit in {fmt.mu} bits")
    if fmt.salted and not 0 <= index < 1 << fmt.index_bits:
        raise ValueError(f"index must fit in {fmt.index_bits} bits")
    if p is not None:
        fmt.require_field(p, summands)
    if not fmt.salted:
        index = 0
    return TaggedRecord(val, fmt.checksum(val, index), index, fmt)


def parse_record(x: int, fmt: RecordFormat) -> TaggedRecord | None:
    """The record encoded by ``x`` if its tag verifies, else ``None``."""
    if x <= 0 or x >> fmt.bits:
        return None
    tag = x & ((1 << fmt.tau) - 1)
    head = x >> fmt.tau
    val = head & ((1 << fmt.mu) - 1)
    index = head >> fmt.mu
    if fmt.checksum(val, index) != tag:
        return None
    return TaggedRecord(val, tag, index, fmt)


def verify(x: int | TaggedRecord, fmt: RecordFormat | None = None) -> bool:
    if isinstance(x, TaggedRecord):
        fmt, x = x.fmt, x.packed
    return parse_record(x, fmt) is not None


@dataclass(frozen=True)
class BfsCodeParams:
    n: int
    s: int
    lam: int = DEFAULT_LAMBDA
    mu: int = DEFAULT_MU
    tau: int = DEFAULT_TAU
    seed: int = 0
    salted: bool = True
    eta_override: int | None = None
    ell_override: int | None = None

    def __post_init__(self):
        if self.n < 1 or self.s < 0 or self.lam < 1:
            raise ConfigurationError("need n >= 1, s >= 0, lambda >= 1")
        if self.s > self.n:
            raise ConfigurationError("sparsity bound exceeds n")
        if self.eta > self.ell:
            raise ConfigurationError("eta exceeds the cell count")

    @property
    def eta(self) -> int:
        if self.eta_override is not None:
            return self.eta_override
        return self.lam + _ceil_lg(max(self.s, 1))

    @property
    def ell(self) -> int:
        if self.ell_override is not None:
            return self.ell_override
        return max(2 * (self.eta * max(self.s, 1) - 1), self.eta)

    @property
    def fmt(self) -> RecordFormat:
        return RecordFormat(self.mu, self.tau, self.n.bit_length() if self.salted else 0)

    @property
    def summands(self) -> int:
        return max(self.s, 1) * self.eta

    def family(self) -> HashFamily:
        return HashFamily(self.eta, self.ell, seed=self.seed, domain_tag="bfscode", distinct=True)

    def to_bytes(self) -> bytes:
        return _pack_ints([self.n, self.s, self.eta, self.ell, self.tau, self.mu, self.seed, int(self.salted),
                           self.lam])

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0) -> tuple["BfsCodeParams", int]:
        vals, offset = _unpack_ints(data, offset)
        if len(vals) != 9:
            raise ValueError("malformed BFS-CODE header")
        n, s, eta, ell, tau, mu, seed, salted, lam = vals
        derived = cls(n, s, lam, mu, tau, seed, bool(salted))
        params = cls(n, s, lam, mu, tau, seed, bool(salted), None if eta == derived.eta else eta,
                     None if ell == derived.ell else ell)
        return params, offset


def record(params: BfsCodeParams, index: int, val: int) -> TaggedRecord:
    return attach_checksum(val, index, params.fmt)


@dataclass
class BfsCodeEncoding:
    params: BfsCodeParams
    p: int
    cells: list[Ciphertext] = field(repr=False)

    @property
    def ciphertext_count(self) -> int:
        return len(self.cells)

    def decrypt(self, backend: Backend) -> list[int]:
        return backend.dec_many(self.cells)

    def to_bytes(self, backend: Backend) -> bytes:
        return _MAGIC + self.params.to_bytes() + _pack_ints([self.p]) + backend.serialize_cells(self.cells)

    @classmethod
    def from_bytes(cls, backend: Backend, data: bytes) -> "BfsCodeEncoding":
        if data[:4] != _MAGIC:
            raise ValueError("not a BFS-CODE encoding")
        params, off = BfsCodeParams.from_bytes(data, 4)
        (p,), off = _unpack_ints(data, off)
        if p != backend.modulus.p:
            raise ValueError("encoding modulus does not match the backend")
        cells, off = backend.deserialize_cells(data, off)
        if len(cells) != params.ell or any(c is None for c in cells) or off != len(data):
            raise ValueError("malformed BFS-CODE encoding")
        return cls(params, p, cells)


def contributions(params: BfsCodeParams, lo: int = 1, hi: int | None = None):
    hi = params.n if hi is None else hi
    pos = params.family().cells(np.arange(lo, hi + 1, dtype=np.int64))
    return np.repeat(np.arange(hi - lo + 1), params.eta), pos.ravel()


def bfscode_encode(backend: Backend, cts: Sequence[Ciphertext], params: BfsCodeParams) -> BfsCodeEncoding:
    """``ell`` enc for zero-initialised cells, then ``eta n`` hadd."""
    if len(cts) != params.n:
        raise ValueError(f"expected {params.n} ciphertexts, got {len(cts)}")
    params.fmt.require_field(backend.modulus.p, params.summands)
    zeros = backend.enc_many([0] * params.ell)
    sources, targets = contributions(params)
    sums = backend.accumulate(cts, sources, targets, params.ell)
    return BfsCodeEncoding(params, backend.modulus.p, backend.merge(list(zeros), sums))


def bfscode_decode_records(cells: Sequence[int], params: BfsCodeParams) -> list[TaggedRecord]:
    """Distinct verified records, ordered by (index, val)."""
    fmt = params.fmt
    bfs = BloomFilterSet(params.family(), None, cells)
    found = {}
    for x in bfs.values(lambda c: parse_record(c, fmt) is not None):
        rec = parse_record(x, fmt)
        if fmt.salted and not 1 <= rec.index <= params.n:
            continue
        found[(rec.index, rec.val)] = rec
    return [found[k] for k in sorted(found)]


def bfscode_decode(cells: Sequence[int], params: BfsCodeParams) -> set[int]:
    """The set of recovered record values."""
    return {r.val for r in bfscode_decode_records(cells, params)}


def plaintext_cells(params: BfsCodeParams, d: Sequence[int], p: int) -> list[int]:
    """Reference cell sums computed without encryption."""
    bfs = BloomFilterSet(params.family(), p)
    pos = params.family().cells(np.arange(1, params.n + 1, dtype=np.int64))
    for i, x in enumerate(d):
        if x:
            for j in pos[i]:
                bfs.cells[j] = (bfs.cells[j] + int(x)) % p
    return bfs.cells


def stress_failure_rate(backend: Backend, s: int, eta: int, ell: int, trials: int, n: int = 256,
                        seed: int = 0) -> float:
    """Fraction of trials where decoding misses at least one of ``s`` records."""
    rng = random.Random(seed)
    fails = 0
    for t in range(trials):
        params = BfsCodeParams(n, s, seed=seed * 1_000_003 + t, eta_override=eta, ell_override=ell)
        d = [0] * n
        want = set()
        for i in rng.sample(range(1, n + 1), s):
            r = record(params, i, rng.randrange(1 << params.mu))
            d[i - 1] = r.packed
            want.add((r.index, r.val))
        enc = bfscode_encode(backend, backend.enc_many(d), params)
        got = {(r.index, r.val) for r in bfscode_decode_records(enc.decrypt(backend), params)}
        if got != want:
            fails += 1
    return fails / trials
