"""Search server: stores uploaded databases and runs the server side of both
search protocols over any :class:`Transport`."""

from __future__ import annotations

import hashlib
import logging
import socketserver
import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path

from ..backend import Backend, OpCounter, backend_from_descriptor
from ..bfscode import BfsCodeParams, bfscode_encode
from ..coie import CoieParams, bfcoie_encode
from ..errors import CapabilityError, CoeError, ProtocolError
from ..pir import PirDatabase, pir_answer
from ..pscoie import pscoie_encode
from .messages import (AbortReason, MessageType, Scheme, SchemeConfig, Upload, abort_payload, pack_bytes,
                       pack_cts, read_session, session_prefix, unpack_bytes, unpack_cts)
from .session import (CLIENT_TO_SERVER, ROUND_COUNT, ROUND_ENCODING, ROUND_FETCH, SERVER_TO_CLIENT, Phase,
                      SearchSession, hamming_count)
from .transport import ConnectionClosed, SocketTransport, Transport

log = logging.getLogger(__name__)


@dataclass
class ServerDatabase:
    db_id: str
    backend: Backend
    n: int
    pir: PirDatabase
    packed: list | None


@dataclass
class SessionCosts:
    count: OpCounter = field(default_factory=OpCounter)
    multiply: OpCounter = field(default_factory=OpCounter)
    encode: OpCounter = field(default_factory=OpCounter)
    pir: OpCounter = field(default_factory=OpCounter)
    pir_instances: int = 0
    encoding_ciphertexts: int = 0


class SearchServer:
    def __init__(self, db_dir: str | Path | None = None):
        self.databases: dict[str, ServerDatabase] = {}
        self.sessions: dict[int, SearchSession] = {}
        self.costs: dict[int, SessionCosts] = {}
        self._lock = threading.Lock()
        self.db_dir = Path(db_dir) if db_dir is not None else None
        if self.db_dir is not None:
            self.db_dir.mkdir(parents=True, exist_ok=True)
            for f in sorted(self.db_dir.glob("*.upload")):
                self._install(Upload.from_bytes(f.read_bytes()))

    # -- uploads ------------------------------------------------------------------
    def _install(self, up: Upload) -> ServerDatabase:
        backend = backend_from_descriptor(up.descriptor)
        packed = None
        if up.packed:
            packed, _ = unpack_cts(backend, up.packed, 0)
            if len(packed) != up.n:
                raise ProtocolError("packed record count does not match n")
        db = ServerDatabase(up.db_id, backend, up.n, PirDatabase(up.sealed, backend.modulus.p), packed)
        with self._lock:
            self.databases[up.db_id] = db
        return db

    def _persist(self, up: Upload, raw: bytes):
        if self.db_dir is None:
            return
        name = hashlib.sha256(up.db_id.encode()).hexdigest()[:16] + ".upload"
        (self.db_dir / name).write_bytes(raw)

    # -- connection loop -----------------------------------------------------------
    def handle(self, transport: Transport):
        """Serve frames until the peer disconnects."""
        try:
            while True:
                try:
                    mtype, payload = transport.recv()
                except ConnectionClosed:
                    return
                if mtype == MessageType.UPLOAD:
                    up = Upload.from_bytes(payload)
                    self._install(up)
                    self._persist(up, payload)
                    log.info("installed database %s (n=%d)", up.db_id, up.n)
                    transport.send(MessageType.RESULT_ACK, pack_bytes(up.db_id.encode()))
                elif mtype == MessageType.QUERY:
                    try:
                        self._run_session(transport, payload)
                    except ConnectionClosed:
                        raise
                    except (CoeError, ValueError) as exc:
                        sid = read_session(payload)[0] if len(payload) >= 8 else 0
                        log.warning("session %d failed: %s", sid, exc)
                        transport.send(MessageType.ABORT,
                                       abort_payload(sid, AbortReason.SERVER_ERROR, 0, str(exc)))
                else:
                    raise ProtocolError(f"unexpected {mtype.name} outside a session")
        finally:
            transport.close()

    def _expect(self, transport: Transport, sess: SearchSession, *types: MessageType) -> tuple[MessageType, bytes]:
        mtype, payload = transport.recv()
        if mtype not in types:
            raise ProtocolError(f"expected {'/'.join(t.name for t in types)}, got {mtype.name}")
        sid, _ = read_session(payload)
        if sid != sess.session_id:
            raise ProtocolError("session id mismatch")
        return mtype, payload

    def _send(self, transport: Transport, sess: SearchSession, mtype: MessageType, payload: bytes, cts: int,
              rnd: int):
        transport.send(mtype, payload)
        sess.transcript.record(SERVER_TO_CLIENT, mtype, len(payload), cts, rnd)

    def _run_session(self, transport: Transport, payload: bytes):
        sid, off = read_session(payload)
        db_raw, off = unpack_bytes(payload, off)
        scheme = Scheme(payload[off])
        config, off = SchemeConfig.from_bytes(payload, off + 1)
        with self._lock:
            db = self.databases.get(db_raw.decode())
        if db is None:
            raise ProtocolError(f"unknown database {db_raw.decode()!r}")
        backend = db.backend
        b, off = unpack_cts(backend, payload, off)
        d, off = unpack_cts(backend, payload, off)
        if len(b) != db.n or (d and len(d) != db.n):
            raise ProtocolError("indicator vector length does not match the database")
        sess = SearchSession(sid, db.db_id, scheme)
        costs = SessionCosts()
        with self._lock:
            self.sessions[sid] = sess
            self.costs[sid] = costs
        sess.transcript.record(CLIENT_TO_SERVER, MessageType.QUERY, len(payload), len(b) + len(d), ROUND_COUNT)
        sess.advance(Phase.QUERIED)

        mark = backend.thread_counter
        count_ct = hamming_count(backend, b)
        costs.count = backend.thread_counter - mark
        self._send(transport, sess, MessageType.COUNT_CT, session_prefix(sid) + pack_cts(backend, [count_ct]), 1,
                   ROUND_COUNT)

        mtype, msg = self._expect(transport, sess, MessageType.COUNT_PLAIN, MessageType.ABORT)
        sess.transcript.record(CLIENT_TO_SERVER, mtype, len(msg), 0, ROUND_ENCODING)
        if mtype == MessageType.ABORT:
            sess.advance(Phase.ABORTED)
            return
        (s,) = struct.unpack_from(">Q", msg, 8)
        if s > db.n:
            raise ProtocolError("disclosed count exceeds n")
        sess.advance(Phase.COUNTED)

        mark = backend.thread_counter
        if scheme == Scheme.BF_COIE:
            enc = bfcoie_encode(backend, b, CoieParams(db.n, s, config.eta, config.f_p, config.seed),
                                check_sparsity=False)
        elif scheme == Scheme.PS_COIE:
            enc = pscoie_encode(backend, b, s)
        else:
            if not d:
                if db.packed is None or not backend.supports_hmult:
                    raise CapabilityError("server cannot form the masked record vector; send it with the query")
                d = [backend.hmult(bi, xi) for bi, xi in zip(b, db.packed)]
                costs.multiply = backend.thread_counter - mark
                mark = backend.thread_counter
            params = BfsCodeParams(db.n, s, config.lam, config.mu, config.tau, config.seed, config.salted)
            enc = bfscode_encode(backend, d, params)
        costs.encode = backend.thread_counter - mark
        costs.encoding_ciphertexts = enc.ciphertext_count
        blob = enc.to_bytes(backend)
        self._send(transport, sess, MessageType.ENCODING, session_prefix(sid) + blob, enc.ciphertext_count,
                   ROUND_ENCODING)
        sess.advance(Phase.ENCODED)

        mark = backend.thread_counter
        while True:
            mtype, msg = self._expect(transport, sess, MessageType.PIR_QUERY, MessageType.RESULT_ACK,
                                      MessageType.ABORT)
            if mtype == MessageType.ABORT:
                sess.transcript.record(CLIENT_TO_SERVER, mtype, len(msg), 0, ROUND_FETCH)
                sess.advance(Phase.ABORTED)
                return
            if mtype == MessageType.RESULT_ACK:
                sess.transcript.record(CLIENT_TO_SERVER, mtype, len(msg), 0, ROUND_FETCH)
                break
            if scheme == Scheme.BFS_CODE:
                raise ProtocolError("PIR is not part of the CODE protocol")
            (instance,) = struct.unpack_from(">I", msg, 8)
            query, _ = unpack_cts(backend, msg, 12)
            sess.transcript.record(CLIENT_TO_SERVER, mtype, len(msg), len(query), ROUND_FETCH)
            reply = pir_answer(backend, db.pir, query)
            costs.pir_instances += 1
            self._send(transport, sess, MessageType.PIR_REPLY,
                       session_prefix(sid) + struct.pack(">I", instance) + pack_cts(backend, reply), len(reply),
                       ROUND_FETCH)
        costs.pir = backend.thread_counter - mark
        if scheme != Scheme.BFS_CODE:
            self._send(transport, sess, MessageType.RESULT_ACK, session_prefix(sid), 0, ROUND_FETCH)
        sess.advance(Phase.FETCHED)


# -- hosting -----------------------------------------------------------------------

class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        try:
            self.server.search_server.handle(SocketTransport(self.request))
        except (ProtocolError, OSError) as exc:
            log.warning("connection from %s ended: %s", self.client_address, exc)


class _TcpServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class TcpHost:
    """Runs a :class:`SearchServer` on a TCP port in a background thread."""

    def __init__(self, server: SearchServer, host: str = "127.0.0.1", port: int = 0):
        self.search_server = server
        self._tcp = _TcpServer((host, port), _Handler)
        self._tcp.search_server = server
        self._thread = threading.Thread(target=self._tcp.serve_forever, daemon=True)

    @property
    def address(self) -> tuple[str, int]:
        return self._tcp.server_address[:2]

    def start(self) -> "TcpHost":
        self._thread.start()
        return self

    def serve_forever(self):
        self._tcp.serve_forever()

    def stop(self):
        self._tcp.shutdown()
        self._tcp.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def spawn_loopback(server: SearchServer) -> Transport:
    """Client end of a loopback transport whose server end runs in a thread."""
    from .transport import LoopbackTransport

    client, srv = LoopbackTransport.pair()
    threading.Thread(target=_guarded, args=(server, srv), daemon=True).start()
    return client


def _guarded(server: SearchServer, transport: Transport):
    try:
        server.handle(transport)
    except ProtocolError as exc:
        log.warning("loopback session ended: %s", exc)
