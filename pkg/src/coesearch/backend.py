"""Additively homomorphic ciphertext backends.

Two implementations share one interface:

* :class:`PlaintextBackend` -- an instrumented oracle whose "ciphertexts" hold
  the plaintext. Supports ``hmult``. Used for large statistical runs.
* :class:`LatticeBackend` -- a symmetric-key LWE-style scheme with
  ``b = <a, sk> + e + delta * m (mod q)`` and ``q = delta * p``. Addition-only:
  ``hmult`` raises :class:`CapabilityError`.

The lattice backend is sized for correctness experiments on a desk machine.
It is not hardened: the dimension is configurable, noise is uniform in
``[-B, B]`` and encryption randomness comes from a seeded generator.

Every backend counts primitive operations in an :class:`OpCounter`. The
batch helpers (``accumulate``, ``dot``, ``dot_many``) are defined as sequences
of primitives and bump the counters by exactly the number of primitives they
stand for, whether they run as a loop or vectorised.
"""

from __future__ import annotations

import hashlib
import random
import struct
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np

from .errors import CapabilityError, ConfigurationError, DecryptionError
from .field import DEFAULT_PRIME, FieldElement, PrimeModulus

CT_VERSION = 1
KEY_VERSION = 1


@dataclass
class OpCounter:
    hadd: int = 0
    smult: int = 0
    hmult: int = 0
    enc: int = 0
    dec: int = 0

    def __add__(self, other: "OpCounter") -> "OpCounter":
        return OpCounter(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def __sub__(self, other: "OpCounter") -> "OpCounter":
        return OpCounter(*(getattr(self, f.name) - getattr(other, f.name) for f in fields(self)))

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class _ThreadCounters:
    """Per-thread OpCounters merged on read."""

    def __init__(self):
        self._local = threading.local()
        self._lock = threading.Lock()
        self._all: list[OpCounter] = []

    def mine(self) -> OpCounter:
        c = getattr(self._local, "counter", None)
        if c is None:
            c = OpCounter()
            self._local.counter = c
            with self._lock:
                self._all.append(c)
        return c

    def total(self) -> OpCounter:
        with self._lock:
            out = OpCounter()
            for c in self._all:
                out = out + c
            return out

    def reset(self):
        with self._lock:
            for c in self._all:
                for f in fields(c):
                    setattr(c, f.name, 0)


@dataclass(frozen=True)
class Ciphertext:
    """Opaque ciphertext. ``level_tag`` carries the lattice noise weight."""

    body: tuple[int, ...]
    level_tag: int | None = field(default=None, compare=False)
    key_id: int = field(default=0, compare=False)

    def to_bytes(self, width: int) -> bytes:
        head = struct.pack(">II", CT_VERSION, len(self.body))
        return head + b"".join(c.to_bytes(width, "big") for c in self.body)

    @classmethod
    def from_bytes(cls, data: bytes, key_id: int = 0) -> "Ciphertext":
        if len(data) < 8:
            raise ValueError("truncated ciphertext")
        version, length = struct.unpack(">II", data[:8])
        if version != CT_VERSION:
            raise ValueError(f"unsupported ciphertext version {version}")
        rest = data[8:]
        if length == 0 or len(rest) % length:
            raise ValueError("ciphertext length does not match its coefficient count")
        w = len(rest) // length
        body = tuple(int.from_bytes(rest[i * w:(i + 1) * w], "big") for i in range(length))
        return cls(body, None, key_id)


def coefficient_width(modulus: int) -> int:
    """Bytes per coefficient, ceil(log256 modulus)."""
    return max(1, ((modulus - 1).bit_length() + 7) // 8)


class Backend(ABC):
    """Common interface. Indices of encoder inputs never reach the backend."""

    supports_hmult = False

    def __init__(self, modulus: PrimeModulus):
        self.modulus = modulus
        self._counters = _ThreadCounters()

    # -- accounting ---------------------------------------------------------
    @property
    def counter(self) -> OpCounter:
        return self._counters.total()

    def reset_counter(self):
        self._counters.reset()

    @property
    def thread_counter(self) -> OpCounter:
        """Snapshot of the operations issued by the calling thread."""
        return OpCounter(**self._counters.mine().as_dict())

    def _bump(self, name: str, k: int = 1):
        c = self._counters.mine()
        setattr(c, name, getattr(c, name) + k)

    # -- primitives -----------------------------------------------------------
    @property
    @abstractmethod
    def key_id(self) -> int: ...

    @property
    @abstractmethod
    def width(self) -> int: ...

    @abstractmethod
    def _enc(self, m: int) -> Ciphertext: ...

    @abstractmethod
    def _dec(self, c: Ciphertext) -> int: ...

    @abstractmethod
    def _hadd(self, a: Ciphertext, b: Ciphertext) -> Ciphertext: ...

    @abstractmethod
    def _smult(self, k: int, c: Ciphertext) -> Ciphertext: ...

    def _hmult(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        raise CapabilityError(f"{type(self).__name__} does not support homomorphic multiplication")

    def _check(self, *cts: Ciphertext):
        for c in cts:
            if c.key_id != self.key_id:
                raise ConfigurationError("ciphertext was produced under different parameters")

    def enc(self, m: int | FieldElement) -> Ciphertext:
        m = int(m)
        if not 0 <= m < self.modulus.p:
            raise ValueError(f"plaintext {m} outside [0, p)")
        self._bump("enc")
        return self._enc(m)

    def dec(self, c: Ciphertext) -> int:
        self._check(c)
        self._bump("dec")
        return self._dec(c)

    def hadd(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        self._check(a, b)
        self._bump("hadd")
        return self._hadd(a, b)

    def smult(self, k: int | FieldElement, c: Ciphertext) -> Ciphertext:
        self._check(c)
        self._bump("smult")
        return self._smult(int(k) % self.modulus.p, c)

    def hmult(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        self._check(a, b)
        if not self.supports_hmult:
            raise CapabilityError(f"{type(self).__name__} does not support homomorphic multiplication")
        self._bump("hmult")
        return self._hmult(a, b)

    # -- batch helpers (loop defaults; subclasses may vectorise) ---------------
    def enc_many(self, values: Iterable[int]) -> Sequence[Ciphertext]:
        return [self.enc(v) for v in values]

    def dec_many(self, cts: Iterable[Ciphertext | None]) -> list[int]:
        """Decrypt, mapping unset (``None``) cells to 0 without a dec call."""
        return [0 if c is None else self.dec(c) for c in cts]

    def accumulate(self, cts: Sequence[Ciphertext], sources, targets, n_cells: int) -> list[Ciphertext | None]:
        """Cell sums ``cell[targets[k]] += cts[sources[k]]`` from unset cells.

        The first contribution to a cell is assigned without an operation;
        every later one costs one ``hadd``.
        """
        cells: list[Ciphertext | None] = [None] * n_cells
        for s, t in zip(np.asarray(sources).tolist(), np.asarray(targets).tolist()):
            cur = cells[t]
            cells[t] = cts[s] if cur is None else self.hadd(cur, cts[s])
        return cells

    def total(self, cts: Sequence[Ciphertext]) -> Ciphertext:
        """Homomorphic sum; ``len(cts) - 1`` hadd."""
        if len(cts) == 0:
            raise ValueError("empty sum")
        items = list(cts)
        acc = items[0]
        for c in items[1:]:
            acc = self.hadd(acc, c)
        return acc

    def dot(self, scalars: Sequence[int], cts: Sequence[Ciphertext]) -> Ciphertext:
        """``sum_i scalars[i] * cts[i]``: ``n`` smult and ``n - 1`` hadd."""
        if len(scalars) != len(cts) or len(cts) == 0:
            raise ValueError("dot needs equal, nonzero lengths")
        acc = None
        for k, c in zip(scalars, cts):
            term = self.smult(k, c)
            acc = term if acc is None else self.hadd(acc, term)
        return acc

    def dot_many(self, scalar_rows: Sequence[Sequence[int]], cts: Sequence[Ciphertext]) -> list[Ciphertext]:
        """One :meth:`dot` per row of ``scalar_rows`` against the same ``cts``."""
        return [self.dot(row, cts) for row in scalar_rows]

    def merge(self, a: list[Ciphertext | None], b: list[Ciphertext | None]) -> list[Ciphertext | None]:
        """Cell-wise sum of two partial cell vectors with unset cells."""
        out = []
        for x, y in zip(a, b):
            out.append(y if x is None else x if y is None else self.hadd(x, y))
        return out

    # -- serialisation ----------------------------------------------------------
    def serialize(self, c: Ciphertext) -> bytes:
        return c.to_bytes(self.width)

    def deserialize(self, data: bytes) -> Ciphertext:
        c = Ciphertext.from_bytes(data, self.key_id)
        self._validate_body(c)
        return c

    def _validate_body(self, c: Ciphertext):
        pass

    @property
    def body_length(self) -> int:
        return 1

    @property
    def ciphertext_size(self) -> int:
        """Serialized bytes per ciphertext."""
        return 8 + self.body_length * self.width

    def serialize_cells(self, cells: Sequence[Ciphertext | None]) -> bytes:
        """Cell vector: per cell a 0x00 unset marker or 0x01 plus the ciphertext."""
        out = [struct.pack(">I", len(cells))]
        for c in cells:
            out.append(b"\x00" if c is None else b"\x01" + self.serialize(c))
        return b"".join(out)

    def deserialize_cells(self, data: bytes, offset: int = 0) -> tuple[list[Ciphertext | None], int]:
        (count,) = struct.unpack_from(">I", data, offset)
        offset += 4
        size = self.ciphertext_size
        cells: list[Ciphertext | None] = []
        for _ in range(count):
            marker = data[offset:offset + 1]
            offset += 1
            if marker == b"\x00":
                cells.append(None)
            elif marker == b"\x01":
                if offset + size > len(data):
                    raise ValueError("truncated cell vector")
                cells.append(self.deserialize(data[offset:offset + size]))
                offset += size
            else:
                raise ValueError("bad cell marker")
        return cells, offset

    def inspect(self, cts: Sequence[Ciphertext]) -> list[int] | None:
        """Uncounted plaintexts for precondition checks; ``None`` without a key."""
        try:
            return [self._dec(c) for c in cts]
        except CapabilityError:
            return None

    @abstractmethod
    def descriptor(self) -> bytes:
        """Public evaluation parameters, enough to rebuild an evaluator."""


# ---------------------------------------------------------------------------
# plaintext oracle
# ---------------------------------------------------------------------------

class OracleVector(Sequence):
    """Vector of oracle ciphertexts backed by a numpy array of plaintexts."""

    def __init__(self, values: np.ndarray, key_id: int):
        self.values = values
        self.key_id = key_id

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return OracleVector(self.values[i], self.key_id)
        return Ciphertext((int(self.values[i]),), None, self.key_id)


class PlaintextBackend(Backend):
    """Instrumented oracle: ciphertext body is ``(m,)``."""

    supports_hmult = True

    def __init__(self, modulus: PrimeModulus | int = DEFAULT_PRIME):
        if isinstance(modulus, int):
            modulus = PrimeModulus(modulus)
        super().__init__(modulus)
        self._key_id = int.from_bytes(hashlib.sha256(b"oracle" + str(modulus.p).encode()).digest()[:8], "big")
        self._small = modulus.p < 2**62

    @property
    def key_id(self) -> int:
        return self._key_id

    @property
    def width(self) -> int:
        return coefficient_width(self.modulus.p)

    def _enc(self, m):
        return Ciphertext((m,), None, self._key_id)

    def _dec(self, c):
        return c.body[0] % self.modulus.p

    def _hadd(self, a, b):
        return Ciphertext(((a.body[0] + b.body[0]) % self.modulus.p,), None, self._key_id)

    def _smult(self, k, c):
        return Ciphertext((k * c.body[0] % self.modulus.p,), None, self._key_id)

    def _hmult(self, a, b):
        return Ciphertext((a.body[0] * b.body[0] % self.modulus.p,), None, self._key_id)

    def _validate_body(self, c):
        if len(c.body) != 1 or c.body[0] >= self.modulus.p:
            raise ValueError("malformed oracle ciphertext")

    def descriptor(self) -> bytes:
        return b"\x00" + _pack_ints([self.modulus.p])

    # -- vector fast paths --------------------------------------------------------
    def _values(self, cts) -> np.ndarray:
        if isinstance(cts, OracleVector):
            if cts.key_id != self._key_id:
                raise ConfigurationError("ciphertext was produced under different parameters")
            return cts.values
        for c in cts:
            self._check(c)
        arr = [c.body[0] for c in cts]
        return np.array(arr, dtype=np.int64 if self._small else object)

    def inspect(self, cts):
        return [int(v) for v in self._values(cts)]

    def enc_many(self, values):
        vals = [int(v) for v in values]
        p = self.modulus.p
        if any(not 0 <= v < p for v in vals):
            raise ValueError("plaintext outside [0, p)")
        self._bump("enc", len(vals))
        arr = np.array(vals, dtype=np.int64 if self._small else object)
        return OracleVector(arr, self._key_id)

    def dec_many(self, cts):
        out = []
        n = 0
        for c in cts:
            if c is None:
                out.append(0)
            else:
                self._check(c)
                n += 1
                out.append(c.body[0] % self.modulus.p)
        self._bump("dec", n)
        return out

    def accumulate(self, cts, sources, targets, n_cells):
        vals = self._values(cts)
        sources = np.asarray(sources, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.int64)
        counts = np.bincount(targets, minlength=n_cells) if len(targets) else np.zeros(n_cells, np.int64)
        touched = counts > 0
        if vals.dtype == object and len(vals) and int(vals.max()) < 2**62:
            vals = vals.astype(np.int64)  # small plaintexts (indicator bits) under a wide modulus
        contrib = vals[sources]
        p = self.modulus.p
        bound = int(contrib.max()) * int(counts.max()) if vals.dtype == np.int64 and len(contrib) else None
        if bound is not None and bound < 2**53:
            # float64 sums are exact below 2**53 and bincount is much faster than add.at
            sums = np.bincount(targets, weights=contrib, minlength=n_cells).astype(np.int64).tolist()
        elif bound is not None and bound < 2**63:
            sums = np.zeros(n_cells, dtype=np.int64)
            np.add.at(sums, targets, contrib)
            sums = [int(x) % p for x in sums]
        else:
            sums = np.zeros(n_cells, dtype=object)
            np.add.at(sums, targets, contrib.astype(object))
            sums = [int(x) % p for x in sums]
        self._bump("hadd", len(sources) - int(touched.sum()))
        kid = self._key_id
        return [Ciphertext((sums[j],), None, kid) if touched[j] else None for j in range(n_cells)]

    def total(self, cts):
        vals = self._values(cts)
        if len(vals) == 0:
            raise ValueError("empty sum")
        self._bump("hadd", len(vals) - 1)
        return Ciphertext((int(sum(int(v) for v in vals)) % self.modulus.p,), None, self._key_id)

    def dot(self, scalars, cts):
        vals = self._values(cts)
        if len(scalars) != len(vals) or len(vals) == 0:
            raise ValueError("dot needs equal, nonzero lengths")
        p = self.modulus.p
        ks = np.asarray([int(k) % p for k in scalars], dtype=object)
        self._bump("smult", len(vals))
        self._bump("hadd", len(vals) - 1)
        acc = int(np.dot(ks, vals.astype(object))) % p
        return Ciphertext((acc,), None, self._key_id)

    def dot_many(self, scalar_rows, cts):
        vals = self._values(cts).astype(object)
        p = self.modulus.p
        if isinstance(scalar_rows, np.ndarray) and scalar_rows.dtype == object and scalar_rows.ndim == 2:
            K = scalar_rows
        else:
            K = np.array([[int(k) % p for k in row] for row in scalar_rows], dtype=object)
        if K.size == 0:
            return []
        if K.shape[1] != len(vals):
            raise ValueError("dot needs equal, nonzero lengths")
        self._bump("smult", K.shape[0] * K.shape[1])
        self._bump("hadd", K.shape[0] * (K.shape[1] - 1))
        # zero plaintexts contribute nothing to the exact result
        nz = np.nonzero(vals)[0]
        res = K[:, nz].dot(vals[nz]) if len(nz) else np.zeros(K.shape[0], dtype=object)
        return [Ciphertext((int(x) % p,), None, self._key_id) for x in res]


# ---------------------------------------------------------------------------
# lattice backend
# ---------------------------------------------------------------------------

def _pack_ints(values: Sequence[int]) -> bytes:
    out = [struct.pack(">I", len(values))]
    for v in values:
        b = v.to_bytes(max(1, (v.bit_length() + 7) // 8), "big")
        out.append(struct.pack(">I", len(b)) + b)
    return b"".join(out)


def _unpack_ints(data: bytes, offset: int = 0) -> tuple[list[int], int]:
    (count,) = struct.unpack_from(">I", data, offset)
    offset += 4
    vals = []
    for _ in range(count):
        (ln,) = struct.unpack_from(">I", data, offset)
        offset += 4
        vals.append(int.from_bytes(data[offset:offset + ln], "big"))
        offset += ln
    return vals, offset


@dataclass(frozen=True)
class BackendParams:
    plaintext_modulus: PrimeModulus
    ciphertext_modulus: int
    lwe_dimension: int
    noise_bound: int
    max_scalar: int
    max_additions: int

    def __post_init__(self):
        p, q = self.plaintext_modulus.p, self.ciphertext_modulus
        if self.lwe_dimension < 1 or self.noise_bound < 0 or self.max_scalar < 1 or self.max_additions < 1:
            raise ConfigurationError("lattice parameters must be positive")
        if q % p:
            raise ConfigurationError("ciphertext modulus must be a multiple of the plaintext modulus")
        if q <= 2 * p * self.noise_bound * self.max_scalar * self.max_additions:
            raise ConfigurationError("ciphertext modulus below the noise headroom bound")

    @classmethod
    def provision(cls, plaintext_modulus: PrimeModulus | int = DEFAULT_PRIME, lwe_dimension: int = 32,
                  noise_bound: int = 8, max_scalar: int | None = None,
                  max_additions: int = 2**20) -> "BackendParams":
        """Smallest power-of-two scaling factor meeting the headroom bound."""
        if isinstance(plaintext_modulus, int):
            plaintext_modulus = PrimeModulus(plaintext_modulus)
        if max_scalar is None:
            max_scalar = plaintext_modulus.p // 2
        need = 2 * noise_bound * max_scalar * max_additions
        delta = 1 << need.bit_length()
        return cls(plaintext_modulus, delta * plaintext_modulus.p, lwe_dimension, noise_bound,
                   max_scalar, max_additions)

    @property
    def delta(self) -> int:
        return self.ciphertext_modulus // self.plaintext_modulus.p

    @property
    def noise_budget(self) -> int:
        """Largest noise weight (in units of fresh noise) decryption tolerates."""
        return self.max_scalar * self.max_additions

    def to_bytes(self) -> bytes:
        return _pack_ints([self.plaintext_modulus.p, self.ciphertext_modulus, self.lwe_dimension,
                           self.noise_bound, self.max_scalar, self.max_additions])

    @classmethod
    def from_bytes(cls, data: bytes) -> "BackendParams":
        vals, _ = _unpack_ints(data)
        if len(vals) != 6:
            raise ValueError("malformed parameter blob")
        p, q, d, b, s, a = vals
        return cls(PrimeModulus(p), q, d, b, s, a)

    def fingerprint(self) -> int:
        return int.from_bytes(hashlib.sha256(b"lattice" + self.to_bytes()).digest()[:8], "big")


@dataclass(frozen=True)
class BackendKeys:
    params: BackendParams
    secret: tuple[int, ...] = field(repr=False)
    seed: int = 0

    def to_bytes(self) -> bytes:
        pblob = self.params.to_bytes()
        w = coefficient_width(self.params.ciphertext_modulus)
        sk = b"".join(x.to_bytes(w, "big") for x in self.secret)
        seed = self.seed.to_bytes(max(1, (self.seed.bit_length() + 7) // 8), "big")
        return (struct.pack(">II", KEY_VERSION, len(pblob)) + pblob
                + struct.pack(">I", len(self.secret)) + sk + struct.pack(">I", len(seed)) + seed)

    @classmethod
    def from_bytes(cls, data: bytes) -> "BackendKeys":
        version, plen = struct.unpack_from(">II", data, 0)
        if version != KEY_VERSION:
            raise ValueError(f"unsupported key version {version}")
        params = BackendParams.from_bytes(data[8:8 + plen])
        off = 8 + plen
        (n,) = struct.unpack_from(">I", data, off)
        off += 4
        w = coefficient_width(params.ciphertext_modulus)
        secret = tuple(int.from_bytes(data[off + i * w: off + (i + 1) * w], "big") for i in range(n))
        off += n * w
        (sl,) = struct.unpack_from(">I", data, off)
        seed = int.from_bytes(data[off + 4: off + 4 + sl], "big")
        return cls(params, secret, seed)


def keygen(params: BackendParams, seed: int = 0) -> BackendKeys:
    """Deterministic secret key for ``params`` from ``seed``."""
    rng = random.Random(hashlib.sha256(b"keygen" + params.to_bytes() + str(seed).encode()).digest())
    q = params.ciphertext_modulus
    return BackendKeys(params, tuple(rng.randrange(q) for _ in range(params.lwe_dimension)), seed)


class LatticeBackend(Backend):
    """LWE-style additive scheme. Without keys it is an evaluator: it adds,
    scales and forms trivial encryptions of public constants, but cannot
    decrypt."""

    def __init__(self, params: BackendParams | BackendKeys, keys: BackendKeys | None = None):
        if isinstance(params, BackendKeys):
            keys, params = params, params.params
        if keys is not None and keys.params != params:
            raise ConfigurationError("keys were generated for different parameters")
        super().__init__(params.plaintext_modulus)
        self.params = params
        self.keys = keys
        self._q = params.ciphertext_modulus
        self._delta = params.delta
        self._key_id = params.fingerprint()
        seed = keys.seed if keys is not None else 0
        self._rng = random.Random(hashlib.sha256(b"enc" + str(seed).encode() + params.to_bytes()).digest())

    @property
    def key_id(self) -> int:
        return self._key_id

    @property
    def width(self) -> int:
        return coefficient_width(self._q)

    def _need_keys(self) -> BackendKeys:
        if self.keys is None:
            raise CapabilityError("evaluator has no secret key")
        return self.keys

    def _budget_check(self, weight: int):
        if weight > self.params.noise_budget:
            raise DecryptionError(f"noise weight {weight} exceeds the declared budget "
                                  f"{self.params.noise_budget}")

    def _enc(self, m):
        if self.keys is None:
            # trivial encryption of a public constant: zero mask, zero noise
            return Ciphertext((0,) * self.params.lwe_dimension + (self._delta * m % self._q,), 0, self._key_id)
        sk = self.keys.secret
        q, B = self._q, self.params.noise_bound
        a = [self._rng.randrange(q) for _ in sk]
        e = self._rng.randint(-B, B)
        b = (sum(x * y for x, y in zip(a, sk)) + e + self._delta * m) % q
        return Ciphertext(tuple(a) + (b,), 1, self._key_id)

    def _dec(self, c):
        sk = self._need_keys().secret
        q, delta = self._q, self._delta
        weight = self.params.noise_budget if c.level_tag is None else c.level_tag
        if self.params.noise_bound * weight * 2 >= delta:
            raise DecryptionError("accumulated noise may exceed the decryption headroom")
        *a, b = c.body
        x = (b - sum(u * v for u, v in zip(a, sk))) % q
        m = (x + delta // 2) // delta
        residue = x - m * delta
        if 2 * abs(residue) >= delta or abs(residue) > self.params.noise_bound * weight:
            raise DecryptionError("rounding residue exceeds the noise bound")
        return m % self.modulus.p

    def _hadd(self, a, b):
        q = self._q
        w = _add_tags(a.level_tag, b.level_tag)
        if w is not None:
            self._budget_check(w)
        return Ciphertext(tuple((x + y) % q for x, y in zip(a.body, b.body)), w, self._key_id)

    def _centered_scalar(self, k: int) -> int:
        kc = self.modulus.centered(k)
        if abs(kc) > self.params.max_scalar:
            raise ConfigurationError(f"scalar {kc} exceeds max_scalar={self.params.max_scalar}")
        return kc

    def _smult(self, k, c):
        kc = self._centered_scalar(k)
        w = None if c.level_tag is None else abs(kc) * c.level_tag
        if w is not None:
            self._budget_check(w)
        q = self._q
        return Ciphertext(tuple(kc * x % q for x in c.body), w, self._key_id)

    def _validate_body(self, c):
        if len(c.body) != self.params.lwe_dimension + 1 or any(x >= self._q for x in c.body):
            raise ValueError("malformed lattice ciphertext")

    def descriptor(self) -> bytes:
        return b"\x01" + self.params.to_bytes()

    @property
    def body_length(self) -> int:
        return self.params.lwe_dimension + 1

    def inspect(self, cts):
        if self.keys is None:
            return None
        sk = self.keys.secret
        q, delta = self._q, self._delta
        out = []
        for c in cts:
            *a, b = c.body
            x = (b - sum(u * v for u, v in zip(a, sk))) % q
            out.append((x + delta // 2) // delta % self.modulus.p)
        return out

    # -- vector fast paths --------------------------------------------------------
    def _matrix(self, cts) -> tuple[np.ndarray, list]:
        rows, tags = [], []
        for c in cts:
            self._check(c)
            rows.append(c.body)
            tags.append(c.level_tag)
        return np.array(rows, dtype=object).reshape(len(rows), self.params.lwe_dimension + 1), tags

    def accumulate(self, cts, sources, targets, n_cells):
        M, tags = self._matrix(cts)
        sources = np.asarray(sources, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.int64)
        width = self.params.lwe_dimension + 1
        sums = np.zeros((n_cells, width), dtype=object)
        if len(sources):
            np.add.at(sums, targets, M[sources])
        unknown = any(t is None for t in tags)
        tag_arr = np.array([0 if t is None else t for t in tags], dtype=object)
        tag_sums = np.zeros(n_cells, dtype=object)
        if len(sources):
            np.add.at(tag_sums, targets, tag_arr[sources])
        counts = np.bincount(targets, minlength=n_cells) if len(targets) else np.zeros(n_cells, np.int64)
        self._bump("hadd", len(sources) - int((counts > 0).sum()))
        q = self._q
        out: list[Ciphertext | None] = []
        for j in range(n_cells):
            if counts[j] == 0:
                out.append(None)
                continue
            w = None if unknown else int(tag_sums[j])
            if w is not None:
                self._budget_check(w)
            out.append(Ciphertext(tuple(int(x) % q for x in sums[j]), w, self._key_id))
        return out

    def dot_many(self, scalar_rows, cts):
        M, tags = self._matrix(cts)
        K = np.array([[self._centered_scalar(int(k) % self.modulus.p) for k in row] for row in scalar_rows],
                     dtype=object)
        if K.size == 0:
            return []
        if K.shape[1] != M.shape[0]:
            raise ValueError("dot needs equal, nonzero lengths")
        self._bump("smult", K.shape[0] * K.shape[1])
        self._bump("hadd", K.shape[0] * (K.shape[1] - 1))
        res = K.dot(M)
        unknown = any(t is None for t in tags)
        tag_arr = np.array([0 if t is None else t for t in tags], dtype=object)
        weights = np.abs(K).dot(tag_arr)
        q = self._q
        out = []
        for r in range(K.shape[0]):
            w = None if unknown else int(weights[r])
            if w is not None:
                self._budget_check(w)
            out.append(Ciphertext(tuple(int(x) % q for x in res[r]), w, self._key_id))
        return out

    def dot(self, scalars, cts):
        if len(scalars) != len(cts) or len(cts) == 0:
            raise ValueError("dot needs equal, nonzero lengths")
        return self.dot_many([scalars], cts)[0]

    def total(self, cts):
        if len(cts) == 0:
            raise ValueError("empty sum")
        zeros = np.zeros(len(cts), dtype=np.int64)
        return self.accumulate(cts, np.arange(len(cts)), zeros, 1)[0]


def _add_tags(a: int | None, b: int | None) -> int | None:
    return None if a is None or b is None else a + b


def backend_from_descriptor(data: bytes) -> Backend:
    """Rebuild a key-less evaluator from :meth:`Backend.descriptor` bytes."""
    kind, rest = data[:1], data[1:]
    if kind == b"\x00":
        (p,), _ = _unpack_ints(rest)
        return PlaintextBackend(PrimeModulus(p))
    if kind == b"\x01":
        return LatticeBackend(BackendParams.from_bytes(rest))
    raise ValueError(f"unknown backend kind {kind!r}")
