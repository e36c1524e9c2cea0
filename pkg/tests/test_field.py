import random

import pytest
from hypothesis import given, strategies as st

from coesearch.errors import ConfigurationError, DecodeError, FieldError
from coesearch.field import (DEFAULT_PRIME, MERSENNE_61, PRIME_60, PRIME_89, PrimeModulus, PrimePolynomial,
                             find_roots, is_probable_prime, newton_to_monic, next_prime, roots_of_power_sums,
                             sqrt_mod)

F97 = PrimeModulus(97)
BIG = PrimeModulus(PRIME_60)


def expand(roots, p):
    """Oracle: coefficient list (low degree first) of prod (x - r)."""
    poly = [1]
    for r in roots:
        nxt = [0] * (len(poly) + 1)
        for k, c in enumerate(poly):
            nxt[k + 1] = (nxt[k + 1] + c) % p
            nxt[k] = (nxt[k] - r * c) % p
        poly = nxt
    return poly


def brute_inverse(a, p):
    return next(x for x in range(1, p) if a * x % p == 1)


# -- arithmetic ------------------------------------------------------------------

def test_inverse_of_3_mod_97():
    assert brute_inverse(3, 97) == 65  # oracle
    assert F97(3).inv() == 65
    assert int(F97(3) * F97(65)) == 1


def test_fermat():
    assert F97(2) ** 96 == 1


def test_small_addition():
    assert F97.p == 97
    assert PrimeModulus(5)(3) + 4 == 2


def test_inverse_of_zero_is_an_error():
    with pytest.raises(FieldError):
        F97(0).inv()


def test_modulus_mismatch_is_an_error():
    with pytest.raises(FieldError):
        F97(1) + PrimeModulus(5)(1)


def test_non_prime_modulus_rejected():
    for bad in (1, 4, 91, 2**61 + 1):
        with pytest.raises(ConfigurationError):
            PrimeModulus(bad)


def test_named_primes_are_prime():
    for p in (MERSENNE_61, PRIME_60, PRIME_89, DEFAULT_PRIME):
        assert is_probable_prime(p)
    assert DEFAULT_PRIME.bit_length() == 90


def test_next_prime():
    assert next_prime(90) == 97
    assert next_prime(97) == 97
    assert next_prime(2**60) == PRIME_60


@given(st.integers(1, 96), st.integers(1, 96))
def test_division_inverts_multiplication(a, b):
    assert (F97(a) * b) / b == a


@given(st.integers(0, 10**6))
def test_centered_representative(x):
    c = F97.centered(x)
    assert -97 // 2 < c <= 97 // 2 and (c - x) % 97 == 0


@pytest.mark.parametrize("p", [97, 101, 10007, 65537, PRIME_60])
def test_sqrt_mod(p):
    rng = random.Random(p)
    for _ in range(50):
        x = rng.randrange(p)
        r = sqrt_mod(x * x, p)
        assert r * r % p == x * x % p
    non_residue = next(a for a in range(2, p) if pow(a, (p - 1) // 2, p) == p - 1)
    assert sqrt_mod(non_residue, p) is None


# -- newton_to_monic ---------------------------------------------------------------

def test_newton_three_roots():
    w = (32, 482, 7472)
    assert [1 + 15 + 16, 1 + 225 + 256, 1 + 3375 + 4096] == list(w)
    f = newton_to_monic(w, 3, BIG)
    assert list(f.coeffs) == expand([1, 15, 16], BIG.p)
    assert list(f.coeffs) == [BIG.p - 240, 271, BIG.p - 32, 1]


def test_newton_two_roots_mod_97():
    f = newton_to_monic((6, 20), 2, F97)
    assert list(f.coeffs) == [8, 97 - 6, 1]


def test_newton_single_zero_root():
    f = newton_to_monic((0,), 1, F97)
    assert list(f.coeffs) == [0, 1]


def test_newton_rejects_wrong_length():
    with pytest.raises(ValueError):
        newton_to_monic((1, 2), 3, F97)


@given(st.lists(st.integers(0, 96), max_size=20), st.integers(0, 20))
def test_newton_output_is_monic_of_degree_s(w, s):
    w = (w + [0] * s)[:s]
    f = newton_to_monic(w, s, F97)
    assert f.degree == s and f.is_monic()


# -- find_roots --------------------------------------------------------------------

def test_roots_running_example():
    f = PrimePolynomial(tuple(expand([1, 15, 16], 263)), PrimeModulus(263))
    assert find_roots(f) == {1, 15, 16}


def test_roots_mod_97():
    assert find_roots(PrimePolynomial((8, 97 - 6, 1), F97)) == {2, 4}


@pytest.mark.parametrize("p", [2, 3, 97, PRIME_60])
def test_roots_of_x(p):
    assert find_roots(PrimePolynomial((0, 1), PrimeModulus(p))) == {0}


def test_find_roots_needs_monic():
    with pytest.raises(ValueError):
        find_roots(PrimePolynomial((1, 2), F97))


def test_irreducible_parts_are_ignored():
    # (x^2 + 1)(x - 5) mod 103; -1 is a non-residue since 103 = 3 mod 4
    m = PrimeModulus(103)
    f = PrimePolynomial((1, 0, 1), m) * PrimePolynomial.from_roots([5], m)
    assert find_roots(f) == {5}


@given(st.lists(st.integers(0, 96), min_size=1, max_size=12))
def test_find_roots_matches_substitution(roots):
    f = PrimePolynomial(tuple(expand(roots, 97)), F97)
    brute = {x for x in range(97) if f(x) == 0}
    assert find_roots(f, rng=len(roots)) == brute == set(roots)


# -- round trip ----------------------------------------------------------------------

def power_sums_oracle(R, s, p):
    return [sum(pow(r, j, p) for r in R) % p for j in range(1, s + 1)]


def test_power_sum_round_trip_1000():
    rng = random.Random(2024)
    n = 10_000
    for _ in range(1000):
        s = rng.randint(1, 16)
        R = set(rng.sample(range(1, n + 1), s))
        f = newton_to_monic(power_sums_oracle(R, s, BIG.p), s, BIG)
        assert find_roots(f, rng) == R


@given(st.sets(st.integers(1, 500), max_size=10))
def test_roots_of_power_sums_property(R):
    p = PrimeModulus(PRIME_60)
    assert roots_of_power_sums(power_sums_oracle(R, len(R), p.p), len(R), p) == R


def test_power_sums_of_repeated_roots_fail_to_decode():
    # a multiset with a repeat has fewer distinct roots than its degree
    with pytest.raises(DecodeError):
        roots_of_power_sums(power_sums_oracle([3, 3], 2, 97), 2, F97)
