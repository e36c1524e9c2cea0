"""Session state, transcripts, the match oracle and small protocol helpers."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

from ..backend import Backend, Ciphertext
from ..errors import ProtocolError
from .messages import MessageType, Scheme

CLIENT_TO_SERVER = "C->S"
SERVER_TO_CLIENT = "S->C"

# logical rounds; a client message belongs to the round of the reply it solicits
ROUND_COUNT = 1
ROUND_ENCODING = 2
ROUND_FETCH = 3


class Phase(enum.IntEnum):
    UPLOADED = 0
    QUERIED = 1
    COUNTED = 2
    ENCODED = 3
    FETCHED = 4
    ABORTED = 5


@dataclass(frozen=True)
class TranscriptEntry:
    direction: str
    mtype: MessageType
    payload_bytes: int
    ciphertexts: int
    round: int

    @property
    def frame_bytes(self) -> int:
        return self.payload_bytes + 5


@dataclass
class Transcript:
    entries: list[TranscriptEntry] = field(default_factory=list)

    def record(self, direction: str, mtype: MessageType, payload_bytes: int, ciphertexts: int, rnd: int):
        self.entries.append(TranscriptEntry(direction, mtype, payload_bytes, ciphertexts, rnd))

    @property
    def rounds(self) -> int:
        """Server-to-client flights after the query."""
        return len({e.round for e in self.entries if e.direction == SERVER_TO_CLIENT and e.round > 0})

    def shape(self) -> tuple:
        return tuple((e.direction, e.mtype.name, e.payload_bytes, e.ciphertexts, e.round) for e in self.entries)

    def count(self, mtype: MessageType) -> int:
        return sum(1 for e in self.entries if e.mtype == mtype)

    def ciphertexts(self, direction: str | None = None, rounds: Sequence[int] | None = None) -> int:
        return sum(e.ciphertexts for e in self.entries
                   if (direction is None or e.direction == direction) and (rounds is None or e.round in rounds))

    def bytes(self, direction: str | None = None) -> int:
        return sum(e.frame_bytes for e in self.entries if direction is None or e.direction == direction)

    def fetch_ciphertexts(self) -> int:
        """Server-to-client ciphertexts of the count and encoding messages."""
        return self.ciphertexts(SERVER_TO_CLIENT, (ROUND_COUNT, ROUND_ENCODING))


@dataclass
class SearchSession:
    session_id: int
    db_id: str
    scheme: Scheme
    phase: Phase = Phase.UPLOADED
    transcript: Transcript = field(default_factory=Transcript)

    def advance(self, phase: Phase):
        if self.phase in (Phase.FETCHED, Phase.ABORTED) or phase <= self.phase:
            raise ProtocolError(f"cannot move from {self.phase.name} to {phase.name}")
        self.phase = phase


# -- predicates and the match oracle ------------------------------------------

@dataclass(frozen=True)
class Predicate:
    """Integer predicate parsed from ``eq:V``, ``in:A,B``, ``range:LO:HI`` or ``mod:M:R``."""

    text: str
    fn: Callable[[int], bool] = field(compare=False, repr=False)

    def __call__(self, x: int) -> bool:
        return bool(self.fn(x))

    @classmethod
    def parse(cls, text: str) -> "Predicate":
        kind, _, rest = text.partition(":")
        try:
            if kind == "eq":
                v = int(rest)
                return cls(text, lambda x: x == v)
            if kind == "in":
                vs = frozenset(int(t) for t in rest.split(",") if t)
                return cls(text, lambda x: x in vs)
            if kind == "range":
                lo, hi = (int(t) for t in rest.split(":"))
                return cls(text, lambda x: lo <= x <= hi)
            if kind == "mod":
                m, r = (int(t) for t in rest.split(":"))
                return cls(text, lambda x: x % m == r)
        except ValueError:
            pass
        raise ValueError(f"cannot parse predicate {text!r}")

    @classmethod
    def member(cls, values) -> "Predicate":
        vs = frozenset(values)
        return cls("in:" + ",".join(map(str, sorted(vs))), lambda x: x in vs)


class MatchOracle:
    """Trusted stand-in for homomorphic matching: encrypts ``q(x_i)`` directly."""

    def __init__(self, values: Sequence[int], predicate: Predicate | Callable[[int], bool]):
        self.values = list(values)
        self.predicate = predicate
        self.calls = 0

    def indicator(self) -> list[int]:
        return [1 if self.predicate(x) else 0 for x in self.values]

    def match(self, backend: Backend) -> tuple[Sequence[Ciphertext], list[int]]:
        self.calls += 1
        b = self.indicator()
        return backend.enc_many(b), b

    def masked(self, backend: Backend, packed: Sequence[int], b: Sequence[int]) -> Sequence[Ciphertext]:
        """``enc(b_i * packed_i)`` for the CODE path without homomorphic multiplication."""
        return backend.enc_many([x if bi else 0 for x, bi in zip(packed, b)])


def hamming_count(backend: Backend, b: Sequence[Ciphertext]) -> Ciphertext:
    """Encrypted number of matches: ``n - 1`` hadd."""
    if len(b) < 1:
        raise ValueError("need n >= 1")
    return backend.total(b)


def dummy_indices(chosen: Sequence[int] | set[int], count: int, n: int, seed) -> list[int]:
    """``chosen`` plus ``count`` distinct uniform indices from ``[1, n]`` outside it."""
    taken = set(chosen)
    if count < 0:
        raise ValueError("count must be >= 0")
    free = n - sum(1 for i in taken if 1 <= i <= n)
    if free < count:
        raise ValueError(f"only {free} indices available for {count} dummies")
    rng = random.Random(seed)
    extra: list[int] = []
    if count > free // 2:
        pool = [i for i in range(1, n + 1) if i not in taken]
        extra = rng.sample(pool, count)
    else:
        seen = set(taken)
        while len(extra) < count:
            i = rng.randint(1, n)
            if i not in seen:
                seen.add(i)
                extra.append(i)
    return sorted(taken) + extra

