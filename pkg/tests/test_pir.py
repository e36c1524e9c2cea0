import math
import os
import random

import pytest
from cryptography.exceptions import InvalidTag
from hypothesis import given, strategies as st

from coesearch.backend import BackendParams, LatticeBackend, PlaintextBackend, keygen
from coesearch.field import DEFAULT_PRIME, PRIME_60
from coesearch.pir import (PirDatabase, RecordVault, chunk_bytes, communication, pir_answer, pir_query,
                           pir_reconstruct, side)


def fetch(be, db, i):
    q = pir_query(be, i, db.n)
    return pir_reconstruct(be, i, db.n, db.record_len, pir_answer(be, db, q)), len(q), len(pir_answer(be, db, q))


def test_side():
    assert [side(n) for n in (1, 2, 4, 5, 9, 10, 10_000, 10_001)] == [1, 2, 2, 3, 3, 4, 100, 101]


@given(st.integers(1, 10**7))
def test_side_is_ceiling_sqrt(n):
    assert side(n) == math.ceil(math.sqrt(n)) or side(n) == math.isqrt(n - 1) + 1
    assert side(n) ** 2 >= n > (side(n) - 1) ** 2


def test_chunk_bytes_below_half_modulus():
    for p in (97, 2**61 - 1, PRIME_60, DEFAULT_PRIME):
        cb = chunk_bytes(p)
        assert 256**cb - 1 < p // 2 or cb == 1


@pytest.mark.parametrize("n", [1, 2, 3, 7, 16, 17, 50])
def test_exhaustive_retrieval(n):
    be = PlaintextBackend(PRIME_60)
    recs = [os.urandom(20) for _ in range(n)]
    db = PirDatabase(recs, be.modulus.p)
    for i in range(1, n + 1):
        got, q, a = fetch(be, db, i)
        assert got == recs[i - 1]
        assert q + a == communication(n, 20, be.modulus.p)


def test_query_is_row_indicator():
    be = PlaintextBackend(PRIME_60)
    assert be.dec_many(pir_query(be, 6, 9)) == [0, 1, 0]
    with pytest.raises(ValueError):
        pir_query(be, 10, 9)


def test_answer_counts():
    be = PlaintextBackend(PRIME_60)
    db = PirDatabase([bytes([i]) * 30 for i in range(10)], be.modulus.p)
    q = pir_query(be, 3, 10)
    mark = be.thread_counter
    reply = pir_answer(be, db, q)
    c = be.thread_counter - mark
    assert len(reply) == db.reply_size == db.cols * db.chunks
    assert c.smult == db.reply_size * db.rows and c.hadd == db.reply_size * (db.rows - 1)


def test_database_validation():
    with pytest.raises(ValueError):
        PirDatabase([], 97)
    with pytest.raises(ValueError):
        PirDatabase([b"a", b"bb"], PRIME_60)
    db = PirDatabase([b"x"] * 4, PRIME_60)
    with pytest.raises(ValueError):
        pir_answer(PlaintextBackend(PRIME_60), db, [])


def test_lattice_retrieval():
    params = BackendParams.provision(PRIME_60, lwe_dimension=8, max_scalar=2**56, max_additions=64)
    be = LatticeBackend(keygen(params, 4))
    rng = random.Random(1)
    recs = [rng.randbytes(24) for _ in range(40)]
    db = PirDatabase(recs, PRIME_60)
    for i in (1, 17, 40):
        assert fetch(be, db, i)[0] == recs[i - 1]


def test_vault_round_trip_and_binding():
    vault = RecordVault(bytes(16))
    sealed = vault.seal(3, b"hello")
    assert vault.open(3, sealed) == b"hello"
    assert len(sealed) == 5 + 16
    with pytest.raises(InvalidTag):
        vault.open(4, sealed)
    with pytest.raises(InvalidTag):
        RecordVault(bytes(15) + b"\x01").open(3, sealed)
    assert len(RecordVault.random_key()) == 16


def test_sealed_records_through_pir():
    be = PlaintextBackend(DEFAULT_PRIME)
    vault = RecordVault()
    recs = [vault.seal(i, i.to_bytes(4, "big")) for i in range(1, 21)]
    db = PirDatabase(recs, be.modulus.p)
    assert vault.open(13, fetch(be, db, 13)[0]) == (13).to_bytes(4, "big")
