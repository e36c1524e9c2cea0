import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coesearch.backend import BackendParams, LatticeBackend, PlaintextBackend, keygen
from coesearch.bloom import AlgebraicBloomFilter
from coesearch.coie import (BfCoieEncoding, CoieParams, DecodeStats, bfcoie_decode, bfcoie_encode,
                            bfcoie_encode_partitioned, level_count_exponent, level_index, warmup_cells,
                            warmup_decode, warmup_encode)
from coesearch.errors import ConfigurationError, SparsityError

ORACLE = PlaintextBackend()


def bits(n, hot, be=ORACLE):
    v = [0] * n
    for i in hot:
        v[i - 1] = 1
    return be.enc_many(v)


def parents(I, k):
    """Oracle for the level-k index set: ceil(i / 2^k) by float-free division."""
    return {-(-i // 2**k) for i in I}


# -- level indices -------------------------------------------------------------

def test_level_index_examples():
    assert level_index(15, 2) == 4
    assert level_index(16, 1) == 8
    for k in range(10):
        assert level_index(1, k) == 1


def test_level_index_range_checks():
    with pytest.raises(ValueError):
        level_index(0, 1)
    with pytest.raises(ValueError):
        level_index(33, 1, n=32)
    with pytest.raises(ValueError):
        level_index(3, 5, t=4)


@given(st.integers(1, 10**6), st.integers(0, 20))
def test_level_index_is_ceiling(i, k):
    assert level_index(i, k) == math.ceil(i / 2**k) == -(-i // 2**k)


def test_running_example_level_sets():
    I = {1, 15, 16}
    assert parents(I, 4) == {1}
    assert parents(I, 3) == {1, 2}
    assert parents(I, 2) == {1, 4}
    assert parents(I, 1) == {1, 8}
    assert {level_index(i, 3) for i in I} == {1, 2}


# -- parameters -------------------------------------------------------------------

def test_level_count_exponent():
    assert level_count_exponent(32, 1) == 4
    assert level_count_exponent(32, 4) == 2
    assert level_count_exponent(32, 2) == 3
    assert level_count_exponent(32, 16) == 0
    assert level_count_exponent(32, 32) == 0
    assert level_count_exponent(10_000, 16) == 9
    # non powers of two: ceil(lg(n / 2s)), clamped at 0
    assert level_count_exponent(1000, 3) == math.ceil(math.log2(1000 / 6))


@given(st.integers(1, 10**6), st.integers(0, 1000))
def test_t_is_smallest_covering_level(n, s):
    t = level_count_exponent(n, s)
    se = max(s, 1)
    assert 2 * se * 2**t >= n and (t == 0 or 2 * se * 2 ** (t - 1) < n)


def test_reference_parameter_sizes():
    p = CoieParams(10_000, 16)
    assert (p.rate_inverse, p.level_ell, p.t, p.total_cells) == (48, 222, 9, 2220)
    q = CoieParams(10_000, 16, f_p=4)
    assert q.rate_inverse == 32


def test_params_validation():
    with pytest.raises(ConfigurationError):
        CoieParams(10, 11)
    with pytest.raises(ConfigurationError):
        CoieParams(0, 0)


def test_params_bytes():
    p = CoieParams(1000, 7, 3, 5, seed=99)
    assert CoieParams.from_bytes(p.to_bytes())[0] == p


# -- warm-up --------------------------------------------------------------------

def test_warmup_zero_vector():
    be = PlaintextBackend()
    enc = warmup_encode(be, bits(64, []), 4)
    assert be.dec_many(enc.cells) == [0] * len(enc.cells)
    assert warmup_decode(enc.decrypt(be), 64) == []


def test_warmup_running_example():
    be = PlaintextBackend()
    be.reset_counter()
    cts = bits(32, [1, 15, 16])
    mark = be.counter
    enc = warmup_encode(be, cts, 3)
    assert (be.counter - mark).hadd <= 32 * 2
    assert len(enc.cells) == warmup_cells(32, 3) == math.ceil(2 * 3 * math.sqrt(32))
    assert {1, 15, 16} <= set(warmup_decode(enc.decrypt(be), 32))


def test_warmup_singleton_and_check_count():
    be = PlaintextBackend()
    for seed in range(50):
        bf = warmup_encode(be, bits(100, [7]), 1, seed=seed).decrypt(be)
        assert 7 in warmup_decode(bf, 100)
        assert bf.checks == 100


def test_warmup_false_positive_mean():
    # rate 1/n over n - s non-member checks: at most one false positive on average
    be = PlaintextBackend()
    rng = random.Random(5)
    n, s, trials = 1024, 8, 2000
    total = 0
    for t in range(trials):
        hot = rng.sample(range(1, n + 1), s)
        found = warmup_decode(warmup_encode(be, bits(n, hot), s, seed=t).decrypt(be), n)
        assert set(hot) <= set(found)
        total += len(found) - s
    mean = total / trials
    assert mean <= 1.0 + 3 * math.sqrt(1.0 / trials)


def test_warmup_sparsity_enforced():
    with pytest.raises(SparsityError):
        warmup_encode(PlaintextBackend(), bits(32, [1, 2, 3]), 2)


# -- BF-COIE encode ----------------------------------------------------------------

def test_sparsity_violation():
    with pytest.raises(SparsityError):
        bfcoie_encode(ORACLE, bits(32, [1, 15, 16]), CoieParams(32, 2))


def test_non_binary_indicator_rejected():
    be = PlaintextBackend()
    with pytest.raises(ValueError):
        bfcoie_encode(be, be.enc_many([0, 2, 0, 0]), CoieParams(4, 1))


def test_level_filters_hold_parent_sets():
    """Each decrypted level holds exactly the parents of the nonzero indices."""
    be = PlaintextBackend()
    I = [1, 15, 16]
    params = CoieParams(32, 1, seed=3)
    assert params.t == 4
    levels = bfcoie_encode(be, bits(32, I), params, check_sparsity=False).decrypt(be)
    for k, lvl in enumerate(levels):
        oracle = AlgebraicBloomFilter(params.family(k))
        oracle.insert_many([level_index(i, k) for i in I])  # siblings share a parent and add twice
        assert np.array_equal(lvl.cells, oracle.cells)
        assert lvl.check_many(sorted(parents(I, k))).all()
    assert levels[3].check(1) and levels[3].check(2)


def test_level_two_at_s4():
    be = PlaintextBackend()
    params = CoieParams(32, 4, seed=0)
    assert params.t == 2
    levels = bfcoie_encode(be, bits(32, [1, 15, 16]), params).decrypt(be)
    assert levels[2].check(1) and levels[2].check(4)


def test_encode_counts():
    be = PlaintextBackend()
    params = CoieParams(1024, 16, seed=1)
    cts = bits(1024, random.Random(0).sample(range(1, 1025), 16))
    mark = be.thread_counter
    enc = bfcoie_encode(be, cts, params)
    c = be.thread_counter - mark
    assert c.hmult == 0 and c.smult == 0
    assert c.hadd <= 2 * 1024 * (params.t + 1)
    assert enc.ciphertext_count == params.total_cells == (params.t + 1) * params.level_ell


def test_cell_sum_matches_plain_simulation():
    be = PlaintextBackend()
    rng = random.Random(8)
    params = CoieParams(300, 6, seed=4)
    hot = rng.sample(range(1, 301), 6)
    levels = bfcoie_encode(be, bits(300, hot), params).decrypt(be)
    for k in range(params.t + 1):
        pos = params.family(k).cells(np.array([level_index(i, k) for i in hot]))
        want = np.bincount(pos.ravel(), minlength=params.level_ell)
        assert np.array_equal(levels[k].cells, want)


def test_partitioned_encode_matches():
    be = PlaintextBackend()
    params = CoieParams(2000, 8, seed=2)
    cts = bits(2000, random.Random(1).sample(range(1, 2001), 8))
    # worker threads count into their own slots, so compare process-wide totals
    m0 = be.counter
    a = bfcoie_encode(be, cts, params)
    m1 = be.counter
    b = bfcoie_encode_partitioned(be, cts, params, parts=4, workers=2)
    m2 = be.counter
    assert [be.dec_many(x) for x in a.levels] == [be.dec_many(x) for x in b.levels]
    assert (m1 - m0).hadd == (m2 - m1).hadd


# -- decode ------------------------------------------------------------------------

def test_running_example_decode_trace():
    be = PlaintextBackend()
    params = CoieParams(32, 4, seed=0)
    stats = DecodeStats()
    found = bfcoie_decode(bfcoie_encode(be, bits(32, [1, 15, 16]), params).decrypt(be), params, stats)
    assert found == [1, 15, 16]
    assert stats.candidates_per_level == [8, 4, 4]  # frozen for seed 0


def test_decode_level_count_checked():
    params = CoieParams(32, 4)
    with pytest.raises(ValueError):
        bfcoie_decode([], params)


def test_zero_vector_decodes_empty():
    be = PlaintextBackend()
    params = CoieParams(10_000, 16)
    cts = bits(10_000, [])
    for seed in range(100):
        p = CoieParams(10_000, 16, seed=seed)
        assert bfcoie_decode(bfcoie_encode(be, cts, p).decrypt(be), p) == []
    assert params.f_p == 16


def test_check_count_bound():
    be = PlaintextBackend()
    rng = random.Random(11)
    n, s, f_p = 10_000, 16, 16
    for t in range(100):
        params = CoieParams(n, s, f_p=f_p, seed=t)
        stats = DecodeStats()
        hot = rng.sample(range(1, n + 1), s)
        bfcoie_decode(bfcoie_encode(be, bits(n, hot), params).decrypt(be), params, stats)
        assert stats.checks <= 2 * (s + 2 * f_p) * (params.t + 1) + 2 * s


@given(st.integers(2, 400), st.data())
def test_no_false_negatives(n, data):
    s = data.draw(st.integers(0, min(n, 12)))
    hot = data.draw(st.lists(st.integers(1, n), min_size=s, max_size=s, unique=True))
    seed = data.draw(st.integers(0, 2**32))
    params = CoieParams(n, s, seed=seed)
    be = PlaintextBackend()
    found = bfcoie_decode(bfcoie_encode(be, bits(n, hot), params).decrypt(be), params)
    assert set(hot) <= set(found)
    assert found == sorted(found) and all(1 <= i <= n for i in found)


def test_lattice_and_oracle_decode_identically():
    params_l = BackendParams.provision(lwe_dimension=8, max_additions=2**12)
    lat = LatticeBackend(keygen(params_l, 3))
    orc = PlaintextBackend(params_l.plaintext_modulus)
    rng = random.Random(3)
    for t in range(10):
        n, s = rng.randint(10, 200), rng.randint(0, 6)
        hot = rng.sample(range(1, n + 1), s)
        params = CoieParams(n, s, seed=t)
        got = [bfcoie_decode(bfcoie_encode(be, bits(n, hot, be), params).decrypt(be), params)
               for be in (orc, lat)]
        assert got[0] == got[1]


def test_encoding_serialization():
    for be in (PlaintextBackend(), LatticeBackend(keygen(BackendParams.provision(lwe_dimension=4), 1))):
        params = CoieParams(100, 3, seed=5)
        enc = bfcoie_encode(be, bits(100, [3, 50, 99], be), params)
        back = BfCoieEncoding.from_bytes(be, enc.to_bytes(be))
        assert back.params == params
        assert [be.dec_many(x) for x in back.levels] == [be.dec_many(x) for x in enc.levels]
        with pytest.raises(ValueError):
            BfCoieEncoding.from_bytes(be, enc.to_bytes(be) + b"\x00")
