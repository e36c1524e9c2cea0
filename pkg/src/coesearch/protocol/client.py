"""Search client: holds the keys, runs the match oracle and drives both
search protocols against a server over a :class:`Transport`."""

from __future__ import annotations

import itertools
import logging
import random
import struct
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from ..backend import Backend
from ..bfscode import BfsCodeEncoding, RecordFormat, attach_checksum, bfscode_decode_records
from ..coie import BfCoieEncoding, bfcoie_decode
from ..errors import ConfigurationError, ProtocolError, RecoveryError, SearchAborted
from ..pir import RecordVault, pir_query, pir_reconstruct
from ..pscoie import PsCoieEncoding, pscoie_decode
from .messages import (AbortReason, MessageType, Scheme, SchemeConfig, Upload, abort_payload, pack_bytes,
                       pack_cts, parse_abort, read_session, session_prefix, unpack_bytes, unpack_cts)
from .session import (CLIENT_TO_SERVER, ROUND_COUNT, ROUND_ENCODING, ROUND_FETCH, SERVER_TO_CLIENT, MatchOracle,
                      Phase, Predicate, SearchSession, dummy_indices)
from .transport import Transport

log = logging.getLogger(__name__)


@dataclass
class ClientDatabase:
    db_id: str
    values: list[int]
    record_len: int
    fmt: RecordFormat
    packed: list[int]
    server_multiplies: bool

    @property
    def n(self) -> int:
        return len(self.values)


@dataclass
class SearchResult:
    session: SearchSession
    indices: list[int]
    values: list[int]
    s: int
    disclosed_s: int
    candidates: list[int] = field(default_factory=list)
    pir_instances: int = 0
    false_positives: int = 0
    discarded: int = 0
    aborted: bool = False
    client_ops: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def transcript(self):
        return self.session.transcript


def record_bytes(val: int, mu: int) -> bytes:
    return val.to_bytes(max(1, (mu + 7) // 8), "big")


class SearchClient:
    def __init__(self, transport: Transport, backend: Backend, vault: RecordVault | None = None,
                 config: SchemeConfig | None = None, s_noise: Callable[[int], int] | None = None,
                 dummy_seed: int | None = None, first_session: int = 1):
        self.transport = transport
        self.backend = backend
        self.vault = vault if vault is not None else RecordVault()
        self.config = config if config is not None else SchemeConfig()
        self.s_noise = s_noise
        self.dummy_seed = dummy_seed
        self.databases: dict[str, ClientDatabase] = {}
        self._ids = itertools.count(first_session)
        self._sysrand = random.SystemRandom()

    # -- upload -------------------------------------------------------------------
    def upload(self, db_id: str, values: Sequence[int], server_multiplies: bool | None = None) -> ClientDatabase:
        """Seal record copies for PIR and, when the backend multiplies, upload
        encrypted checksum-tagged records for the CODE path."""
        db = self.attach(db_id, values, server_multiplies)
        sealed = [self.vault.seal(i, record_bytes(v, self.config.mu)) for i, v in enumerate(db.values, start=1)]
        enc_packed = pack_cts(self.backend, self.backend.enc_many(db.packed)) if db.server_multiplies else b""
        up = Upload(db_id, self.backend.descriptor(), db.n, sealed, enc_packed)
        self.transport.send(MessageType.UPLOAD, up.to_bytes())
        mtype, payload = self.transport.recv()
        if mtype != MessageType.RESULT_ACK or unpack_bytes(payload, 0)[0].decode() != db_id:
            self.databases.pop(db_id, None)
            raise ProtocolError("upload was not acknowledged")
        return db

    def attach(self, db_id: str, values: Sequence[int], server_multiplies: bool | None = None) -> ClientDatabase:
        """Register a database uploaded earlier (same vault key and record
        format) without sending anything."""
        cfg = self.config
        n = len(values)
        if n < 1:
            raise ValueError("empty database")
        if any(not 0 <= int(v) < 1 << cfg.mu for v in values):
            raise ValueError(f"record values must fit in {cfg.mu} bits")
        fmt = RecordFormat(cfg.mu, cfg.tau, n.bit_length() if cfg.salted else 0)
        packed = [attach_checksum(int(v), i, fmt).packed for i, v in enumerate(values, start=1)]
        if server_multiplies is None:
            server_multiplies = self.backend.supports_hmult
        record_len = len(self.vault.seal(1, record_bytes(0, cfg.mu)))
        db = ClientDatabase(db_id, [int(v) for v in values], record_len, fmt, packed, server_multiplies)
        self.databases[db_id] = db
        return db

    # -- messaging ----------------------------------------------------------------
    def _send(self, sess: SearchSession, mtype: MessageType, payload: bytes, cts: int, rnd: int):
        self.transport.send(mtype, payload)
        sess.transcript.record(CLIENT_TO_SERVER, mtype, len(payload), cts, rnd)

    def _recv(self, sess: SearchSession, expected: MessageType) -> bytes:
        mtype, payload = self.transport.recv()
        if mtype == MessageType.ABORT:
            _, reason, _, detail = parse_abort(payload)
            sess.phase = Phase.ABORTED
            raise ProtocolError(f"server aborted ({reason.name}): {detail}")
        if mtype != expected:
            raise ProtocolError(f"expected {expected.name}, got {mtype.name}")
        sid, _ = read_session(payload)
        if sid != sess.session_id:
            raise ProtocolError("session id mismatch")
        return payload

    # -- search ---------------------------------------------------------------------
    def search(self, db_id: str, scheme: Scheme | str, predicate: Predicate | str | Callable[[int], bool],
               oracle: MatchOracle | None = None, config: SchemeConfig | None = None,
               raise_on_abort: bool = False) -> SearchResult:
        scheme = Scheme.parse(scheme)
        cfg = config if config is not None else self.config
        if isinstance(predicate, str):
            predicate = Predicate.parse(predicate)
        db = self.databases.get(db_id)
        if db is None:
            raise ConfigurationError(f"database {db_id!r} was not uploaded by this client")
        if cfg.mu != db.fmt.mu or cfg.tau != db.fmt.tau or cfg.salted != db.fmt.salted:
            raise ConfigurationError("record format differs from the uploaded one")
        if scheme == Scheme.PS_COIE and self.s_noise is not None:
            raise ConfigurationError("PS-COIE needs the exact count; the noise hook does not apply")
        oracle = oracle if oracle is not None else MatchOracle(db.values, predicate)
        start = time.perf_counter()
        mark = self.backend.thread_counter
        sid = next(self._ids)
        sess = SearchSession(sid, db_id, scheme)

        b_cts, b = oracle.match(self.backend)
        d_cts: Sequence = []
        if scheme == Scheme.BFS_CODE and not db.server_multiplies:
            d_cts = oracle.masked(self.backend, db.packed, b)
        payload = (session_prefix(sid) + pack_bytes(db_id.encode()) + bytes([int(scheme)]) + cfg.to_bytes()
                   + pack_cts(self.backend, b_cts) + pack_cts(self.backend, d_cts))
        self._send(sess, MessageType.QUERY, payload, len(b_cts) + len(d_cts), ROUND_COUNT)
        sess.advance(Phase.QUERIED)

        msg = self._recv(sess, MessageType.COUNT_CT)
        (count_ct,), _ = unpack_cts(self.backend, msg, 8)
        sess.transcript.record(SERVER_TO_CLIENT, MessageType.COUNT_CT, len(msg), 1, ROUND_COUNT)
        s = self.backend.dec(count_ct)
        disclosed = s + (self.s_noise(s) if self.s_noise is not None else 0)
        if disclosed < s:
            raise ConfigurationError("count noise must be non-negative")
        disclosed = min(disclosed, db.n)
        self._send(sess, MessageType.COUNT_PLAIN, session_prefix(sid) + struct.pack(">Q", disclosed), 0,
                   ROUND_ENCODING)
        sess.advance(Phase.COUNTED)

        msg = self._recv(sess, MessageType.ENCODING)
        blob = msg[8:]
        if scheme == Scheme.BF_COIE:
            enc = BfCoieEncoding.from_bytes(self.backend, blob)
        elif scheme == Scheme.PS_COIE:
            enc = PsCoieEncoding.from_bytes(self.backend, blob)
        else:
            enc = BfsCodeEncoding.from_bytes(self.backend, blob)
        sess.transcript.record(SERVER_TO_CLIENT, MessageType.ENCODING, len(msg), enc.ciphertext_count,
                               ROUND_ENCODING)
        sess.advance(Phase.ENCODED)

        if scheme == Scheme.BFS_CODE:
            result = self._finish_code(sess, db, enc, s, disclosed, predicate)
        else:
            result = self._finish_coie(sess, db, enc, s, disclosed, predicate, cfg, raise_on_abort)
        result.client_ops = (self.backend.thread_counter - mark).as_dict()
        result.elapsed = time.perf_counter() - start
        return result

    def _finish_code(self, sess, db, enc: BfsCodeEncoding, s, disclosed, predicate) -> SearchResult:
        records = bfscode_decode_records(enc.decrypt(self.backend), enc.params)
        self._send(sess, MessageType.RESULT_ACK, session_prefix(sess.session_id), 0, ROUND_FETCH)
        sess.advance(Phase.FETCHED)
        kept = [r for r in records if predicate(r.val)]
        if len(kept) < s:
            raise RecoveryError(f"recovered {len(kept)} of {s} records (total collision); "
                                "repeat the search with a new hash seed")
        return SearchResult(sess, [r.index for r in kept] if db.fmt.salted else [], [r.val for r in kept], s,
                            disclosed, candidates=[r.index for r in records], discarded=len(records) - len(kept))

    def _finish_coie(self, sess, db, enc, s, disclosed, predicate, cfg, raise_on_abort) -> SearchResult:
        sid = sess.session_id
        if isinstance(enc, BfCoieEncoding):
            found = bfcoie_decode(enc.decrypt(self.backend), enc.params)
            f_p = enc.params.f_p
        else:
            found = pscoie_decode(enc.decrypt(self.backend), enc.s, enc.n, self.backend.modulus.p)
            f_p = 0
        extras = len(found) - s
        budget = disclosed + f_p
        if len(found) > budget:
            self._send(sess, MessageType.ABORT, abort_payload(sid, AbortReason.FALSE_POSITIVES, extras), 0,
                       ROUND_FETCH)
            sess.advance(Phase.ABORTED)
            if raise_on_abort:
                raise SearchAborted(extras, f_p)
            return SearchResult(sess, [], [], s, disclosed, candidates=found, false_positives=extras, aborted=True)
        seed = (self.dummy_seed, sid) if self.dummy_seed is not None else self._sysrand.getrandbits(64)
        fetch = dummy_indices(found, budget - len(found), db.n, repr(seed))
        queries = [pir_query(self.backend, i, db.n) for i in fetch]
        frames = [session_prefix(sid) + struct.pack(">I", k) + pack_cts(self.backend, q)
                  for k, q in enumerate(queries)]
        for k, fr in enumerate(frames):
            sess.transcript.record(CLIENT_TO_SERVER, MessageType.PIR_QUERY, len(fr), len(queries[k]), ROUND_FETCH)
        sess.transcript.record(CLIENT_TO_SERVER, MessageType.RESULT_ACK, 8, 0, ROUND_FETCH)

        # pipelined: queries stream out while replies are read
        errors: list[BaseException] = []

        def writer():
            try:
                for fr in frames:
                    self.transport.send(MessageType.PIR_QUERY, fr)
                self.transport.send(MessageType.RESULT_ACK, session_prefix(sid))
            except BaseException as exc:  # surfaced after the reader finishes
                errors.append(exc)

        th = threading.Thread(target=writer, daemon=True)
        th.start()
        replies = []
        try:
            for k in range(len(frames)):
                msg = self._recv(sess, MessageType.PIR_REPLY)
                (instance,) = struct.unpack_from(">I", msg, 8)
                if instance != k:
                    raise ProtocolError("PIR replies out of order")
                reply, _ = unpack_cts(self.backend, msg, 12)
                sess.transcript.record(SERVER_TO_CLIENT, MessageType.PIR_REPLY, len(msg), len(reply), ROUND_FETCH)
                replies.append(reply)
            msg = self._recv(sess, MessageType.RESULT_ACK)
            sess.transcript.record(SERVER_TO_CLIENT, MessageType.RESULT_ACK, len(msg), 0, ROUND_FETCH)
        finally:
            th.join()
        if errors:
            raise errors[0]
        sess.advance(Phase.FETCHED)

        indices, values, discarded = [], [], 0
        for i, reply in zip(fetch, replies):
            sealed = pir_reconstruct(self.backend, i, db.n, db.record_len, reply)
            val = int.from_bytes(self.vault.open(i, sealed), "big")
            if predicate(val):
                indices.append(i)
                values.append(val)
            else:
                discarded += 1
        order = sorted(range(len(indices)), key=indices.__getitem__)
        return SearchResult(sess, [indices[k] for k in order], [values[k] for k in order], s, disclosed,
                            candidates=found, pir_instances=len(fetch), false_positives=extras,
                            discarded=discarded)


def search_coie(client: SearchClient, db_id: str, predicate, scheme: Scheme | str = Scheme.BF_COIE,
                **kw) -> SearchResult:
    scheme = Scheme.parse(scheme)
    if scheme == Scheme.BFS_CODE:
        raise ConfigurationError("search_coie runs BF-COIE or PS-COIE")
    return client.search(db_id, scheme, predicate, **kw)


def search_code(client: SearchClient, db_id: str, predicate, **kw) -> SearchResult:
    return client.search(db_id, Scheme.BFS_CODE, predicate, **kw)
