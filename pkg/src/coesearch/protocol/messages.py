"""Wire format: ``[4-byte BE payload length][1-byte type][payload]``."""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Sequence

from ..backend import Backend, Ciphertext, _pack_ints, _unpack_ints
from ..errors import ProtocolError

MAX_PAYLOAD = 1 << 30
HEADER = struct.Struct(">IB")


class MessageType(enum.IntEnum):
    UPLOAD = 1
    QUERY = 2
    COUNT_CT = 3
    COUNT_PLAIN = 4
    ENCODING = 5
    PIR_QUERY = 6
    PIR_REPLY = 7
    ABORT = 8
    RESULT_ACK = 9


class AbortReason(enum.IntEnum):
    FALSE_POSITIVES = 1
    SERVER_ERROR = 2
    CLIENT_ERROR = 3


def abort_payload(session_id: int, reason: AbortReason, value: int = 0, detail: str = "") -> bytes:
    return struct.pack(">QBI", session_id, int(reason), value) + pack_bytes(detail.encode())


def parse_abort(data: bytes) -> tuple[int, AbortReason, int, str]:
    sid, reason, value = struct.unpack_from(">QBI", data, 0)
    detail, _ = unpack_bytes(data, 13)
    return sid, AbortReason(reason), value, detail.decode(errors="replace")


class Scheme(enum.IntEnum):
    BF_COIE = 1
    PS_COIE = 2
    BFS_CODE = 3

    @property
    def label(self) -> str:
        return self.name.lower().replace("_", "-")

    @classmethod
    def parse(cls, text: "str | Scheme") -> "Scheme":
        if isinstance(text, Scheme):
            return text
        try:
            return cls[text.upper().replace("-", "_")]
        except KeyError:
            raise ValueError(f"unknown scheme {text!r}") from None


def encode_frame(mtype: MessageType, payload: bytes) -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise ProtocolError("payload too large")
    return HEADER.pack(len(payload), int(mtype)) + payload


def decode_header(head: bytes) -> tuple[int, MessageType]:
    if len(head) != HEADER.size:
        raise ProtocolError("truncated frame header")
    length, t = HEADER.unpack(head)
    if length > MAX_PAYLOAD:
        raise ProtocolError("frame length exceeds limit")
    try:
        return length, MessageType(t)
    except ValueError:
        raise ProtocolError(f"unknown message type {t}") from None


def decode_frame(data: bytes) -> tuple[MessageType, bytes, int]:
    """Parse one frame from ``data``; returns ``(type, payload, bytes consumed)``."""
    length, mtype = decode_header(data[:HEADER.size])
    end = HEADER.size + length
    if len(data) < end:
        raise ProtocolError("truncated frame payload")
    return mtype, data[HEADER.size:end], end


# -- payload helpers ----------------------------------------------------------

def pack_bytes(b: bytes) -> bytes:
    return struct.pack(">I", len(b)) + b


def unpack_bytes(data: bytes, off: int) -> tuple[bytes, int]:
    (ln,) = struct.unpack_from(">I", data, off)
    off += 4
    if off + ln > len(data):
        raise ProtocolError("truncated byte field")
    return data[off:off + ln], off + ln


def pack_cts(backend: Backend, cts: Sequence[Ciphertext]) -> bytes:
    size = backend.ciphertext_size
    body = b"".join(backend.serialize(c) for c in cts)
    return struct.pack(">II", len(cts), size) + body


def unpack_cts(backend: Backend, data: bytes, off: int) -> tuple[list[Ciphertext], int]:
    count, size = struct.unpack_from(">II", data, off)
    off += 8
    if size != backend.ciphertext_size or off + count * size > len(data):
        raise ProtocolError("ciphertext vector does not match the backend")
    cts = [backend.deserialize(data[off + k * size: off + (k + 1) * size]) for k in range(count)]
    return cts, off + count * size


@dataclass(frozen=True)
class Upload:
    db_id: str
    descriptor: bytes
    n: int
    sealed: list[bytes]
    packed: bytes

    def to_bytes(self) -> bytes:
        out = [pack_bytes(self.db_id.encode()), pack_bytes(self.descriptor), struct.pack(">I", self.n)]
        out += [pack_bytes(b) for b in self.sealed]
        out.append(pack_bytes(self.packed))
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Upload":
        db, off = unpack_bytes(data, 0)
        desc, off = unpack_bytes(data, off)
        (n,) = struct.unpack_from(">I", data, off)
        off += 4
        sealed = []
        for _ in range(n):
            b, off = unpack_bytes(data, off)
            sealed.append(b)
        packed, off = unpack_bytes(data, off)
        if off != len(data):
            raise ProtocolError("trailing bytes in UPLOAD")
        return cls(db.decode(), desc, n, sealed, packed)


@dataclass(frozen=True)
class SchemeConfig:
    """Scheme parameters the client chooses per query."""

    eta: int = 2
    f_p: int = 16
    lam: int = 40
    mu: int = 16
    tau: int = 40
    seed: int = 0
    salted: bool = True

    def to_bytes(self) -> bytes:
        return _pack_ints([self.eta, self.f_p, self.lam, self.mu, self.tau, self.seed, int(self.salted)])

    @classmethod
    def from_bytes(cls, data: bytes, off: int = 0) -> tuple["SchemeConfig", int]:
        vals, off = _unpack_ints(data, off)
        if len(vals) != 7:
            raise ProtocolError("malformed scheme config")
        eta, f_p, lam, mu, tau, seed, salted = vals
        return cls(eta, f_p, lam, mu, tau, seed, bool(salted)), off


def session_prefix(session_id: int) -> bytes:
    return struct.pack(">Q", session_id)


def read_session(data: bytes) -> tuple[int, int]:
    if len(data) < 8:
        raise ProtocolError("missing session id")
    return struct.unpack_from(">Q", data, 0)[0], 8
