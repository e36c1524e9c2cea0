"""Framed transports: an in-process loopback pair and a TCP stream."""

from __future__ import annotations

import socket
import threading
from abc import ABC, abstractmethod

from ..errors import ProtocolError
from .messages import HEADER, MessageType, decode_header, encode_frame


class ConnectionClosed(ProtocolError):
    """The peer closed the stream at a frame boundary."""


class Transport(ABC):
    """Reliable, ordered frame stream. ``send`` and ``recv`` may run on
    different threads."""

    @abstractmethod
    def _write(self, data: bytes): ...

    @abstractmethod
    def _read_exact(self, n: int) -> bytes: ...

    @abstractmethod
    def close(self): ...

    def send(self, mtype: MessageType, payload: bytes) -> int:
        frame = encode_frame(mtype, payload)
        self._write(frame)
        return len(frame)

    def recv(self) -> tuple[MessageType, bytes]:
        head = self._read_exact(HEADER.size)
        if not head:
            raise ConnectionClosed("peer closed the connection")
        length, mtype = decode_header(head)
        payload = self._read_exact(length) if length else b""
        if len(payload) != length:
            raise ProtocolError("stream ended inside a frame")
        return mtype, payload

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class _Pipe:
    def __init__(self):
        self.buf = bytearray()
        self.closed = False
        self.cond = threading.Condition()

    def write(self, data: bytes):
        with self.cond:
            if self.closed:
                raise ConnectionClosed("pipe closed")
            self.buf += data
            self.cond.notify_all()

    def read_exact(self, n: int) -> bytes:
        with self.cond:
            while len(self.buf) < n and not self.closed:
                self.cond.wait()
            if len(self.buf) < n:
                if self.buf:
                    raise ProtocolError("stream ended inside a frame")
                return b""
            out = bytes(self.buf[:n])
            del self.buf[:n]
            return out

    def close(self):
        with self.cond:
            self.closed = True
            self.cond.notify_all()


class LoopbackTransport(Transport):
    def __init__(self, inbound: _Pipe, outbound: _Pipe):
        self._in = inbound
        self._out = outbound

    @classmethod
    def pair(cls) -> tuple["LoopbackTransport", "LoopbackTransport"]:
        a, b = _Pipe(), _Pipe()
        return cls(a, b), cls(b, a)

    def _write(self, data):
        self._out.write(data)

    def _read_exact(self, n):
        return self._in.read_exact(n)

    def close(self):
        self._out.close()
        self._in.close()


class SocketTransport(Transport):
    def __init__(self, sock: socket.socket):
        self.sock = sock

    @classmethod
    def connect(cls, host: str, port: int, timeout: float | None = None) -> "SocketTransport":
        return cls(socket.create_connection((host, port), timeout=timeout))

    def _write(self, data):
        self.sock.sendall(data)

    def _read_exact(self, n):
        chunks, got = [], 0
        while got < n:
            part = self.sock.recv(min(n - got, 1 << 20))
            if not part:
                if got:
                    raise ProtocolError("stream ended inside a frame")
                return b""
            chunks.append(part)
            got += len(part)
        return b"".join(chunks)

    def close(self):
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


def parse_address(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not port.isdigit():
        raise ValueError(f"address {addr!r} must be host:port")
    return host or "127.0.0.1", int(port)
