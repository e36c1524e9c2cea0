import random
import threading

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coesearch.backend import (Backend, BackendKeys, BackendParams, Ciphertext, LatticeBackend, OpCounter,
                               PlaintextBackend, backend_from_descriptor, keygen)
from coesearch.errors import CapabilityError, ConfigurationError, DecryptionError
from coesearch.field import PRIME_60, PrimeModulus

P = PRIME_60


@pytest.fixture(scope="module")
def lattice():
    params = BackendParams.provision(P, lwe_dimension=16, max_additions=2**16)
    return LatticeBackend(keygen(params, seed=5))


@pytest.fixture(scope="module")
def oracle():
    return PlaintextBackend(P)


@pytest.fixture(params=["oracle", "lattice"])
def backend(request, oracle, lattice):
    return oracle if request.param == "oracle" else lattice


# -- keys and parameters ----------------------------------------------------------

def test_keygen_is_deterministic():
    params = BackendParams.provision(P, lwe_dimension=8)
    assert keygen(params, 3) == keygen(params, 3)
    assert keygen(params, 3).secret != keygen(params, 4).secret


def test_q_must_be_a_multiple_of_p():
    good = BackendParams.provision(P, lwe_dimension=8)
    with pytest.raises(ConfigurationError):
        BackendParams(good.plaintext_modulus, good.ciphertext_modulus + 1, 8, 8, good.max_scalar,
                      good.max_additions)


def test_q_below_headroom_rejected():
    m = PrimeModulus(P)
    with pytest.raises(ConfigurationError):
        BackendParams(m, P * 1024, 8, 8, P // 2, 2**20)


def test_provisioned_q_is_smallest_power_of_two_factor():
    params = BackendParams.provision(97, lwe_dimension=4, noise_bound=2, max_scalar=48, max_additions=100)
    headroom = 2 * 2 * 48 * 100  # 2 B max_scalar max_additions
    assert params.delta & (params.delta - 1) == 0
    assert params.delta > headroom >= params.delta // 2
    assert params.ciphertext_modulus == 97 * params.delta


def test_key_bytes_round_trip():
    keys = keygen(BackendParams.provision(P, lwe_dimension=8), 11)
    assert BackendKeys.from_bytes(keys.to_bytes()) == keys


def test_keys_for_other_params_rejected():
    a = BackendParams.provision(P, lwe_dimension=8)
    b = BackendParams.provision(P, lwe_dimension=9)
    with pytest.raises(ConfigurationError):
        LatticeBackend(a, keygen(b))


# -- encryption ----------------------------------------------------------------------

def test_enc_dec_extremes(backend):
    assert backend.dec(backend.enc(0)) == 0
    assert backend.dec(backend.enc(P - 1)) == P - 1


def test_plaintext_out_of_range(backend):
    for bad in (-1, P):
        with pytest.raises(ValueError):
            backend.enc(bad)


def test_hadd_1000_random(backend):
    rng = random.Random(1)
    for _ in range(1000):
        a, b = rng.randrange(P), rng.randrange(P)
        assert backend.dec(backend.hadd(backend.enc(a), backend.enc(b))) == (a + b) % P


def test_smult_identities(backend):
    c = backend.enc(12345)
    assert backend.dec(backend.smult(1, c)) == 12345
    assert backend.dec(backend.smult(0, c)) == 0


def test_smult_1000_random(backend):
    rng = random.Random(2)
    for _ in range(1000):
        k, m = rng.randrange(P), rng.randrange(P)
        assert backend.dec(backend.smult(k, backend.enc(m))) == k * m % P


def test_oracle_hmult(oracle):
    assert oracle.dec(oracle.hmult(oracle.enc(1), oracle.enc(77))) == 77
    assert oracle.dec(oracle.hmult(oracle.enc(0), oracle.enc(77))) == 0


def test_lattice_hmult_unsupported(lattice):
    with pytest.raises(CapabilityError):
        lattice.hmult(lattice.enc(1), lattice.enc(2))


def test_lattice_ciphertexts_are_randomised(lattice):
    assert lattice.enc(5).body != lattice.enc(5).body


def test_foreign_ciphertext_rejected(lattice):
    small = LatticeBackend(keygen(BackendParams.provision(P, lwe_dimension=8), 6))
    with pytest.raises(ConfigurationError):
        lattice.hadd(lattice.enc(1), small.enc(1))


def test_evaluator_cannot_decrypt(lattice):
    ev = backend_from_descriptor(lattice.descriptor())
    c = ev.hadd(lattice.enc(2), lattice.enc(3))
    with pytest.raises(CapabilityError):
        ev.dec(c)
    assert lattice.dec(c) == 5


def test_evaluator_forms_trivial_encryptions(lattice):
    ev = backend_from_descriptor(lattice.descriptor())
    z = ev.enc(9)
    assert all(x == 0 for x in z.body[:-1])
    assert lattice.dec(ev.hadd(z, lattice.enc(1))) == 10


def test_oracle_descriptor_round_trip(oracle):
    ev = backend_from_descriptor(oracle.descriptor())
    assert isinstance(ev, PlaintextBackend) and ev.modulus.p == P


# -- noise ---------------------------------------------------------------------------

def test_noise_safety_worst_case_chain():
    n, s = 1000, 16
    params = BackendParams.provision(P, lwe_dimension=16, max_additions=n * s)
    be = LatticeBackend(keygen(params, 1))
    k = P // 2
    c = be.smult(k, be.enc(1))
    acc = c
    for _ in range(n * s - 1):
        acc = be.hadd(acc, c)
    assert be.dec(acc) == n * s * k % P


def test_exceeding_declared_budget_is_an_error():
    params = BackendParams.provision(P, lwe_dimension=8, max_scalar=4, max_additions=8)
    be = LatticeBackend(keygen(params, 1))
    c = be.enc(1)
    acc = c
    with pytest.raises(DecryptionError):
        for _ in range(100):
            acc = be.hadd(acc, c)
    with pytest.raises(ConfigurationError):
        be.smult(5, c)


def test_forged_noise_detected():
    params = BackendParams.provision(97, lwe_dimension=4, noise_bound=1, max_scalar=2, max_additions=2)
    be = LatticeBackend(keygen(params, 1))
    c = be.enc(3)
    *a, b = c.body
    bad = Ciphertext(tuple(a) + ((b + params.delta // 3) % params.ciphertext_modulus,), 1, c.key_id)
    with pytest.raises(DecryptionError):
        be.dec(bad)


# -- counters --------------------------------------------------------------------------

def test_counter_counts_each_call(backend):
    backend.reset_counter()
    a, b = backend.enc(1), backend.enc(2)
    backend.hadd(a, b)
    backend.hadd(a, b)
    backend.smult(3, a)
    backend.dec(a)
    assert backend.counter == OpCounter(hadd=2, smult=1, hmult=0, enc=2, dec=1)


def _loop_counts(be, fn, *args):
    """Counts from the generic primitive-by-primitive helper in Backend."""
    mark = be.thread_counter
    out = fn(be, *args)
    return out, be.thread_counter - mark


@given(st.integers(1, 40), st.integers(1, 30), st.integers(0, 2**32))
def test_vector_helpers_count_like_loops(n, cells, seed):
    rng = random.Random(seed)
    for be in (PlaintextBackend(P), LatticeBackend(keygen(BackendParams.provision(P, lwe_dimension=4), 2))):
        vals = [rng.randrange(P) for _ in range(n)]
        cts = be.enc_many(vals)
        m = rng.randint(0, 3 * n)
        sources = [rng.randrange(n) for _ in range(m)]
        targets = [rng.randrange(cells) for _ in range(m)]
        fast, fast_c = _loop_counts(be, type(be).accumulate, cts, sources, targets, cells)
        slow, slow_c = _loop_counts(be, Backend.accumulate, list(cts), sources, targets, cells)
        assert fast_c == slow_c
        assert be.dec_many(fast) == be.dec_many(slow)
        want = [0] * cells
        for s_, t_ in zip(sources, targets):
            want[t_] = (want[t_] + vals[s_]) % P
        assert be.dec_many(fast) == want
        rows = [[rng.randrange(P) for _ in range(n)] for _ in range(3)]
        fd, fd_c = _loop_counts(be, type(be).dot_many, rows, cts)
        sd, sd_c = _loop_counts(be, Backend.dot_many, rows, list(cts))
        assert fd_c == sd_c == OpCounter(hadd=3 * (n - 1), smult=3 * n)
        assert be.dec_many(fd) == be.dec_many(sd) == [sum(k * v for k, v in zip(r, vals)) % P for r in rows]
        ft, ft_c = _loop_counts(be, type(be).total, cts)
        st_, st_c = _loop_counts(be, Backend.total, list(cts))
        assert ft_c == st_c and be.dec(ft) == be.dec(st_) == sum(vals) % P


def test_counters_are_per_thread(oracle):
    oracle.reset_counter()
    c = oracle.enc(1)
    seen = {}

    def work():
        mark = oracle.thread_counter
        for _ in range(10):
            oracle.hadd(c, c)
        seen["delta"] = oracle.thread_counter - mark

    th = threading.Thread(target=work)
    th.start()
    th.join()
    assert seen["delta"].hadd == 10
    assert oracle.thread_counter.hadd == 0
    assert oracle.counter.hadd == 10


# -- equivalence and serialization -------------------------------------------------------

def test_oracle_equivalence_random_programs(oracle, lattice):
    rng = random.Random(3)
    for _ in range(200):
        vals = [rng.randrange(P) for _ in range(6)]
        ops = [(rng.choice("as"), rng.randrange(6), rng.randrange(6), rng.randrange(1000)) for _ in range(20)]
        results = []
        for be in (oracle, lattice):
            regs = list(be.enc_many(vals))
            for op, i, j, k in ops:
                regs[i] = be.hadd(regs[i], regs[j]) if op == "a" else be.smult(k, regs[j])
            results.append(be.dec_many(regs))
        assert results[0] == results[1]


def test_serialization_round_trip(backend):
    c = backend.hadd(backend.enc(41), backend.enc(1))
    data = backend.serialize(c)
    assert len(data) == backend.ciphertext_size
    assert backend.dec(backend.deserialize(data)) == 42


def test_cell_vector_serialization(backend):
    cells = [None, backend.enc(4), None, backend.enc(7)]
    blob = backend.serialize_cells(cells)
    back, off = backend.deserialize_cells(blob)
    assert off == len(blob)
    assert backend.dec_many(back) == [0, 4, 0, 7]
    with pytest.raises(ValueError):
        backend.deserialize_cells(blob[:-1])


def test_malformed_ciphertext_rejected(lattice):
    with pytest.raises(ValueError):
        lattice.deserialize(b"\x00\x00\x00\x01\x00\x00\x00\x02" + b"\x00" * 8)
    with pytest.raises(ValueError):
        Ciphertext.from_bytes(b"\x00\x00")


def test_enc_many_accepts_numpy(oracle):
    cts = oracle.enc_many(np.arange(5))
    assert oracle.dec_many(cts) == [0, 1, 2, 3, 4]
