"""Bloom-filter index encodings: the single-level warm-up scheme and the
leveled BF-COIE.

Level ``k`` of BF-COIE holds the parent indices ``ceil(i / 2**k)`` of the
nonzero positions. Decoding starts from every index of the top level and
descends, so only ``O(s)`` candidates are checked per level.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .backend import Backend, Ciphertext, _pack_ints, _unpack_ints
from .bloom import AlgebraicBloomFilter, HashFamily, ell_for_rate
from .errors import ConfigurationError, SparsityError

DEFAULT_ETA = 2
DEFAULT_FP = 16

_MAGIC_BF = b"BFC1"
_MAGIC_WU = b"WUC1"


def level_count_exponent(n: int, s: int) -> int:
    """Smallest ``t >= 0`` with ``2 s 2**t >= n``; equals ``lg(n / 2s)`` for powers of two."""
    s = max(s, 1)
    t = 0
    while 2 * s << t < n:
        t += 1
    return t


def level_index(i: int, k: int, n: int | None = None, t: int | None = None) -> int:
    """``ceil(i / 2**k)``, with optional range checks against ``n`` and ``t``."""
    if i < 1 or k < 0 or (n is not None and i > n) or (t is not None and k > t):
        raise ValueError(f"index {i} or level {k} out of range")
    return (i + (1 << k) - 1) >> k


def _check_indicator(backend: Backend, cts: Sequence[Ciphertext], s: int):
    vals = backend.inspect(cts)
    if vals is None:
        return
    if any(v not in (0, 1) for v in vals):
        raise ValueError("indicator ciphertexts must decrypt to 0 or 1")
    nz = sum(vals)
    if nz > s:
        raise SparsityError(f"{nz} nonzero entries exceed sparsity bound s={s}")


def _require_field(backend: Backend, n: int, bound: int):
    if backend.modulus.p <= bound:
        raise ConfigurationError(f"plaintext modulus must exceed {bound} (cell counts would wrap)")


# ---------------------------------------------------------------------------
# warm-up scheme
# ---------------------------------------------------------------------------

@dataclass
class WarmupEncoding:
    n: int
    s: int
    family: HashFamily
    cells: list = field(repr=False)

    def decrypt(self, backend: Backend) -> AlgebraicBloomFilter:
        return AlgebraicBloomFilter(self.family, _saturate(backend.dec_many(self.cells)))


def warmup_cells(n: int, s: int, eta: int = DEFAULT_ETA) -> int:
    """``ceil(eta s n^(1/eta))`` cells: false-positive rate ``1/n``."""
    return ell_for_rate(eta, max(s, 1), n)


def warmup_encode(backend: Backend, cts: Sequence[Ciphertext], s: int, eta: int = DEFAULT_ETA,
                  seed: int = 0, check_sparsity: bool = True) -> WarmupEncoding:
    n = len(cts)
    if check_sparsity:
        _check_indicator(backend, cts, s)
    _require_field(backend, n, max(s, 1) * eta)
    family = HashFamily(eta, warmup_cells(n, s, eta), seed=seed, domain_tag="warmup")
    pos = family.cells(np.arange(1, n + 1, dtype=np.int64))
    sources = np.repeat(np.arange(n), eta)
    cells = backend.accumulate(cts, sources, pos.ravel(), family.ell)
    return WarmupEncoding(n, s, family, cells)


def warmup_decode(bf: AlgebraicBloomFilter, n: int) -> list[int]:
    """Every ``i`` in ``[1, n]`` the filter reports present: ``n`` checks."""
    idx = np.arange(1, n + 1, dtype=np.int64)
    return [int(i) for i in idx[bf.check_many(idx)]]


# ---------------------------------------------------------------------------
# BF-COIE
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoieParams:
    n: int
    s: int
    eta: int = DEFAULT_ETA
    f_p: int = DEFAULT_FP
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.s < 0 or self.eta < 1 or self.f_p < 0:
            raise ConfigurationError("need n >= 1, s >= 0, eta >= 1, f_p >= 0")
        if self.s > self.n:
            raise ConfigurationError("sparsity bound exceeds n")

    @property
    def t(self) -> int:
        return level_count_exponent(self.n, self.s)

    @property
    def rate_inverse(self) -> int:
        """``m = max(2s, s + 2 f_p)``; each level has false-positive rate ``1/m``."""
        s = max(self.s, 1)
        return max(2 * s, s + 2 * self.f_p)

    @property
    def level_ell(self) -> int:
        return ell_for_rate(self.eta, max(self.s, 1), self.rate_inverse)

    @property
    def total_cells(self) -> int:
        return (self.t + 1) * self.level_ell

    def family(self, k: int) -> HashFamily:
        return HashFamily(self.eta, self.level_ell, seed=self.seed, domain_tag=f"bfcoie/{k}")

    def top_range(self) -> int:
        return -(-self.n // (1 << self.t))

    def to_bytes(self) -> bytes:
        return _pack_ints([self.n, self.s, self.eta, self.f_p, self.t, self.level_ell, self.seed])

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0) -> tuple["CoieParams", int]:
        vals, offset = _unpack_ints(data, offset)
        if len(vals) != 7:
            raise ValueError("malformed BF-COIE header")
        n, s, eta, f_p, t, ell, seed = vals
        params = cls(n, s, eta, f_p, seed)
        if (params.t, params.level_ell) != (t, ell):
            raise ValueError("BF-COIE header is inconsistent with its parameters")
        return params, offset


@dataclass
class BfCoieEncoding:
    params: CoieParams
    levels: list[list] = field(repr=False)

    def decrypt(self, backend: Backend) -> list[AlgebraicBloomFilter]:
        flat = [c for lvl in self.levels for c in lvl]
        vals = _saturate(backend.dec_many(flat))
        ell = self.params.level_ell
        return [AlgebraicBloomFilter(self.params.family(k), vals[k * ell:(k + 1) * ell])
                for k in range(len(self.levels))]

    @property
    def ciphertext_count(self) -> int:
        return sum(len(lvl) for lvl in self.levels)

    def to_bytes(self, backend: Backend) -> bytes:
        out = [_MAGIC_BF, self.params.to_bytes()]
        for lvl in self.levels:
            out.append(backend.serialize_cells(lvl))
        return b"".join(out)

    @classmethod
    def from_bytes(cls, backend: Backend, data: bytes) -> "BfCoieEncoding":
        if data[:4] != _MAGIC_BF:
            raise ValueError("not a BF-COIE encoding")
        params, off = CoieParams.from_bytes(data, 4)
        levels = []
        for _ in range(params.t + 1):
            cells, off = backend.deserialize_cells(data, off)
            if len(cells) != params.level_ell:
                raise ValueError("level has the wrong cell count")
            levels.append(cells)
        if off != len(data):
            raise ValueError("trailing bytes after BF-COIE encoding")
        return cls(params, levels)


def _saturate(vals: Sequence[int]) -> list[int]:
    # cells only matter as zero / nonzero; keep them int64-representable
    return [min(int(v), 2**62) for v in vals]


def level_contributions(params: CoieParams, lo: int = 1, hi: int | None = None):
    """``(sources, targets)`` for indices ``lo..hi`` across all levels.

    Sources are 0-based offsets into the ``lo..hi`` slice; targets index the
    flat ``(t+1) * level_ell`` cell vector.
    """
    hi = params.n if hi is None else hi
    idx = np.arange(lo, hi + 1, dtype=np.int64)
    ell = params.level_ell
    srcs, tgts = [], []
    for k in range(params.t + 1):
        parents = (idx + (1 << k) - 1) >> k
        first, last = int(parents[0]), int(parents[-1])
        pos = params.family(k).cells(np.arange(first, last + 1, dtype=np.int64))
        tgts.append((pos[parents - first] + k * ell).ravel())
        srcs.append(np.repeat(np.arange(len(idx)), params.eta))
    return np.concatenate(srcs), np.concatenate(tgts)


def bfcoie_encode(backend: Backend, cts: Sequence[Ciphertext], params: CoieParams,
                  check_sparsity: bool = True) -> BfCoieEncoding:
    """All levels in one pass; at most ``eta n (t+1)`` hadd, no smult or hmult."""
    if len(cts) != params.n:
        raise ValueError(f"expected {params.n} ciphertexts, got {len(cts)}")
    if check_sparsity:
        _check_indicator(backend, cts, params.s)
    _require_field(backend, params.n, max(params.s, 1) * params.eta)
    sources, targets = level_contributions(params)
    flat = backend.accumulate(cts, sources, targets, params.total_cells)
    return _split_levels(params, flat)


def bfcoie_encode_partitioned(backend: Backend, cts: Sequence[Ciphertext], params: CoieParams,
                              parts: int, workers: int | None = None) -> BfCoieEncoding:
    """Index-range partitions built independently and merged cell-wise.

    Matches :func:`bfcoie_encode` exactly, including the hadd count.
    """
    from concurrent.futures import ThreadPoolExecutor

    n = params.n
    bounds = [(n * j // parts + 1, n * (j + 1) // parts) for j in range(parts)]
    bounds = [(lo, hi) for lo, hi in bounds if lo <= hi]

    def build(lohi):
        lo, hi = lohi
        src, tgt = level_contributions(params, lo, hi)
        return backend.accumulate(cts[lo - 1:hi], src, tgt, params.total_cells)

    with ThreadPoolExecutor(max_workers=workers) as ex:
        partials = list(ex.map(build, bounds))
    flat = partials[0]
    for other in partials[1:]:
        flat = backend.merge(flat, other)
    return _split_levels(params, flat)


def _split_levels(params: CoieParams, flat: list) -> BfCoieEncoding:
    ell = params.level_ell
    return BfCoieEncoding(params, [flat[k * ell:(k + 1) * ell] for k in range(params.t + 1)])


@dataclass
class DecodeStats:
    checks: int = 0
    candidates_per_level: list[int] = field(default_factory=list)


def bfcoie_decode(levels: Sequence[AlgebraicBloomFilter], params: CoieParams,
                  stats: DecodeStats | None = None) -> list[int]:
    """Sorted candidate indices; a superset of the nonzero positions."""
    if len(levels) != params.t + 1:
        raise ValueError(f"expected {params.t + 1} levels, got {len(levels)}")
    stats = stats if stats is not None else DecodeStats()
    cand = np.arange(1, params.top_range() + 1, dtype=np.int64)
    for k in range(params.t, -1, -1):
        stats.candidates_per_level.append(len(cand))
        stats.checks += len(cand)
        present = cand[levels[k].check_many(cand)] if len(cand) else cand
        if k == 0:
            return [int(i) for i in present]
        limit = -(-params.n // (1 << (k - 1)))
        children = np.stack([2 * present - 1, 2 * present], axis=1).ravel()
        cand = children[children <= limit]
    raise AssertionError("unreachable")
