"""Prime-field arithmetic and univariate polynomials over GF(p).

Polynomials are handled internally as lists of ints (lowest degree first).
Root finding follows the classical route: isolate the distinct linear
factors with ``gcd(f, x^p - x)`` and split them by Cantor-Zassenhaus
equal-degree factorisation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

from .errors import ConfigurationError, DecodeError, FieldError

_SMALL_PRIMES = (
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67,
    71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149,
    151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229,
)

MERSENNE_61 = 2**61 - 1
# sparse binary expansions keep x^p and the splitting exponent cheap
PRIME_60 = 2**60 + 33
PRIME_89 = 2**89 + 29
DEFAULT_PRIME = PRIME_89


def is_probable_prime(n: int, rounds: int = 64) -> bool:
    """Miller-Rabin with trial division first.

    64 rounds bound the error by 4**-64. Bases come from a generator seeded
    with ``n`` so the answer is reproducible.
    """
    if n < 2:
        return False
    for sp in _SMALL_PRIMES:
        if n == sp:
            return True
        if n % sp == 0:
            return False
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    rng = random.Random(n)
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime(n: int) -> int:
    """Smallest prime >= n."""
    c = max(2, n)
    if c > 2 and c % 2 == 0:
        c += 1
    while not is_probable_prime(c):
        c += 1 if c == 2 else 2
    return c


@dataclass(frozen=True)
class PrimeModulus:
    p: int

    def __post_init__(self):
        if not isinstance(self.p, int) or not is_probable_prime(self.p):
            raise ConfigurationError(f"plaintext modulus {self.p!r} is not prime")

    @classmethod
    def at_least(cls, n: int) -> "PrimeModulus":
        return cls(next_prime(n))

    @property
    def bits(self) -> int:
        return self.p.bit_length()

    def __call__(self, value: int) -> "FieldElement":
        return FieldElement(value % self.p, self)

    def centered(self, value: int) -> int:
        """Representative of ``value`` in (-p/2, p/2]."""
        v = value % self.p
        return v - self.p if v > self.p // 2 else v

    def __int__(self):
        return self.p


@dataclass(frozen=True)
class FieldElement:
    value: int
    modulus: PrimeModulus

    def __post_init__(self):
        if not 0 <= self.value < self.modulus.p:
            raise FieldError(f"{self.value} is not a canonical residue mod {self.modulus.p}")

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.modulus.p != self.modulus.p:
                raise FieldError("modulus mismatch")
            return other.value
        if isinstance(other, int):
            return other % self.modulus.p
        return NotImplemented

    def _new(self, v: int) -> "FieldElement":
        return FieldElement(v % self.modulus.p, self.modulus)

    def __add__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._new(self.value + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._new(self.value - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._new(o - self.value)

    def __mul__(self, other):
        o = self._coerce(other)
        return NotImplemented if o is NotImplemented else self._new(self.value * o)

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.value)

    def inv(self) -> "FieldElement":
        if self.value == 0:
            raise FieldError("inversion of zero")
        return self._new(pow(self.value, -1, self.modulus.p))

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self * self._new(o).inv()

    def __pow__(self, e: int):
        if e < 0:
            return self.inv() ** -e
        return self._new(pow(self.value, e, self.modulus.p))

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return self.modulus.p == other.modulus.p and self.value == other.value
        if isinstance(other, int):
            return self.value == other % self.modulus.p
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.modulus.p))

    def __int__(self):
        return self.value

    def __index__(self):
        return self.value

    def __repr__(self):
        return f"FieldElement({self.value} mod {self.modulus.p})"


# --- dense polynomial helpers (coefficient lists, low degree first) -----------

def _trim(a: list[int]) -> list[int]:
    while a and a[-1] == 0:
        a.pop()
    return a


def _pmul(a: Sequence[int], b: Sequence[int], p: int) -> list[int]:
    """Product via Kronecker substitution into a single Python integer."""
    if not a or not b:
        return []
    if len(a) < 8 or len(b) < 8:
        out = [0] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    out[i + j] += x * y
        return _trim([c % p for c in out])
    w = (2 * p.bit_length() + min(len(a), len(b)).bit_length() + 8) // 8
    A = int.from_bytes(b"".join(c.to_bytes(w, "little") for c in a), "little")
    B = int.from_bytes(b"".join(c.to_bytes(w, "little") for c in b), "little")
    n = len(a) + len(b) - 1
    raw = (A * B).to_bytes(w * n, "little")
    return _trim([int.from_bytes(raw[i * w:(i + 1) * w], "little") % p for i in range(n)])


def _pmod_monic(a: Sequence[int], m: Sequence[int], p: int) -> list[int]:
    """Remainder of ``a`` modulo the monic polynomial ``m``."""
    a = list(a)
    dm = len(m) - 1
    if dm == 0:
        return []
    tail = m[:dm]
    for top in range(len(a) - 1, dm - 1, -1):
        c = a[top] % p
        if c:
            base = top - dm
            for k in range(dm):
                a[base + k] -= c * tail[k]
        a[top] = 0
    return _trim([c % p for c in a[:dm]])


def _pdivmod(a: Sequence[int], b: Sequence[int], p: int) -> tuple[list[int], list[int]]:
    a = [c % p for c in a]
    _trim(a)
    if not b:
        raise FieldError("polynomial division by zero")
    db = len(b) - 1
    inv_lead = pow(b[-1], -1, p)
    if len(a) - 1 < db:
        return [], a
    q = [0] * (len(a) - db)
    for top in range(len(a) - 1, db - 1, -1):
        c = a[top] * inv_lead % p
        if c:
            q[top - db] = c
            base = top - db
            for k in range(db + 1):
                a[base + k] = (a[base + k] - c * b[k]) % p
    return _trim(q), _trim(a[:db])


def _monic(a: list[int], p: int) -> list[int]:
    if not a:
        return a
    inv = pow(a[-1], -1, p)
    return [c * inv % p for c in a]


def _pgcd(a: Sequence[int], b: Sequence[int], p: int) -> list[int]:
    a, b = _trim([c % p for c in a]), _trim([c % p for c in b])
    while b:
        _, r = _pdivmod(a, b, p)
        a, b = b, r
    return _monic(a, p)


class _Reducer:
    """Reduction modulo a fixed monic polynomial via a precomputed reversed inverse."""

    def __init__(self, m: Sequence[int], p: int):
        self.m = list(m)
        self.p = p
        self.d = d = len(m) - 1
        rev = self.m[::-1]
        # power-series inverse of rev(m) modulo x^d; rev(m)[0] == 1 since m is monic
        inv = [1] + [0] * max(d - 1, 0)
        for k in range(1, d):
            acc = 0
            for i in range(1, min(k, d) + 1):
                acc += rev[i] * inv[k - i]
            inv[k] = (-acc) % p
        self.inv = inv

    def __call__(self, a: list[int]) -> list[int]:
        d, p = self.d, self.p
        if len(a) <= d:
            return a
        if len(a) > 2 * d - 1:
            return _pmod_monic(a, self.m, p)
        k = len(a) - d  # number of quotient coefficients
        ra = a[::-1][:k]
        rq = _pmul(ra, self.inv[:k], p)[:k]
        q = (rq + [0] * (k - len(rq)))[::-1]
        qm = _pmul(q, self.m, p)
        return _trim([(a[i] - (qm[i] if i < len(qm) else 0)) % p for i in range(d)])


def _ppowmod(base: Sequence[int], e: int, m: Sequence[int], p: int) -> list[int]:
    red = _Reducer(m, p)
    result = [1]
    b = _pmod_monic(base, m, p)
    while e:
        if e & 1:
            result = red(_pmul(result, b, p))
        e >>= 1
        if e:
            b = red(_pmul(b, b, p))
    return result


def _psub(a: Sequence[int], b: Sequence[int], p: int) -> list[int]:
    n = max(len(a), len(b))
    out = [((a[i] if i < len(a) else 0) - (b[i] if i < len(b) else 0)) % p for i in range(n)]
    return _trim(out)


@dataclass(frozen=True)
class PrimePolynomial:
    """Polynomial over GF(p); ``coeffs`` are canonical ints, lowest degree first."""

    coeffs: tuple[int, ...]
    modulus: PrimeModulus

    def __post_init__(self):
        p = self.modulus.p
        c = _trim([int(x) % p for x in self.coeffs])
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def from_roots(cls, roots: Iterable[int], modulus: PrimeModulus) -> "PrimePolynomial":
        p = modulus.p
        poly = [1]
        for r in roots:
            poly = _pmul(poly, [(-r) % p, 1], p)
        return cls(tuple(poly), modulus)

    @cached_property
    def coefficients(self) -> tuple[FieldElement, ...]:
        return tuple(FieldElement(c, self.modulus) for c in self.coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_monic(self) -> bool:
        return bool(self.coeffs) and self.coeffs[-1] == 1

    def __call__(self, x: int) -> int:
        p = self.modulus.p
        acc = 0
        for c in reversed(self.coeffs):
            acc = (acc * x + c) % p
        return acc

    def __mul__(self, other: "PrimePolynomial") -> "PrimePolynomial":
        return PrimePolynomial(tuple(_pmul(self.coeffs, other.coeffs, self.modulus.p)), self.modulus)

    def __repr__(self):
        return f"PrimePolynomial({list(self.coeffs)} mod {self.modulus.p})"


def newton_to_monic(w: Sequence[int | FieldElement], s: int, modulus: PrimeModulus) -> PrimePolynomial:
    """Monic degree-``s`` polynomial whose roots have power sums ``w[0..s-1]``.

    Elementary symmetric values follow ``k e_k = sum_{j=1..k} (-1)^(j-1) e_{k-j} w_j``
    and the result is ``sum_k (-1)^k e_k x^(s-k)``.
    """
    p = modulus.p
    if len(w) != s:
        raise ValueError(f"expected {s} power sums, got {len(w)}")
    if s >= p:
        raise FieldError(f"s={s} must be below the modulus {p}")
    ws = [int(x) % p for x in w]
    e = [1] + [0] * s
    for k in range(1, s + 1):
        acc = 0
        for j in range(1, k + 1):
            term = e[k - j] * ws[j - 1]
            acc += term if j % 2 == 1 else -term
        e[k] = acc % p * pow(k, -1, p) % p
    # coefficient of x^(s-k) is (-1)^k e_k
    coeffs = [0] * (s + 1)
    for k in range(s + 1):
        coeffs[s - k] = e[k] if k % 2 == 0 else (-e[k]) % p
    return PrimePolynomial(tuple(coeffs), modulus)


def sqrt_mod(a: int, p: int) -> int | None:
    """A square root of ``a`` modulo odd prime ``p`` (Tonelli-Shanks), or None."""
    a %= p
    if a == 0:
        return 0
    if pow(a, (p - 1) // 2, p) != 1:
        return None
    if p % 4 == 3:
        return pow(a, (p + 1) // 4, p)
    q, e = p - 1, 0
    while q % 2 == 0:
        q //= 2
        e += 1
    z = 2
    while pow(z, (p - 1) // 2, p) != p - 1:
        z += 1
    m, c, t, r = e, pow(z, q, p), pow(a, q, p), pow(a, (q + 1) // 2, p)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c, t, r = i, b * b % p, t * b * b % p, r * b % p
    return r


def _split_linear(g: list[int], p: int, rng: random.Random) -> list[int]:
    """Roots of a monic squarefree ``g`` that splits into linear factors."""
    d = len(g) - 1
    if d == 0:
        return []
    if d == 1:
        return [(-g[0]) % p]
    if d == 2:
        c, b = g[0], g[1]
        root = sqrt_mod(b * b - 4 * c, p)
        if root is not None:
            inv2 = (p + 1) // 2
            return [(-b + root) * inv2 % p, (-b - root) * inv2 % p]
    half = (p - 1) // 2
    while True:
        a = rng.randrange(p)
        h = _psub(_ppowmod([a, 1], half, g, p), [1], p)
        f1 = _pgcd(g, h, p) if h else g
        if 0 < len(f1) - 1 < d:
            f2, _ = _pdivmod(g, f1, p)
            return _split_linear(f1, p, rng) + _split_linear(_monic(f2, p), p, rng)


def find_roots(f: PrimePolynomial, rng: random.Random | int | None = 0) -> set[int]:
    """Distinct roots of monic ``f`` in GF(p), as canonical ints.

    Repeated roots are reported once; callers that require ``deg f`` distinct
    roots compare the size of the result against the degree.
    """
    if not f.is_monic() or f.degree < 1:
        raise ValueError("find_roots expects a monic polynomial of degree >= 1")
    p = f.modulus.p
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    if p == 2:
        return {r for r in (0, 1) if f(r) == 0}
    coeffs = list(f.coeffs)
    xp = _ppowmod([0, 1], p, coeffs, p)
    g = _pgcd(coeffs, _psub(xp, [0, 1], p), p) if _psub(xp, [0, 1], p) else coeffs
    roots = set()
    if g and g[0] == 0:
        # x divides g; peel it off so the random shifts only see nonzero roots
        roots.add(0)
        g, _ = _pdivmod(g, [0, 1], p)
    roots.update(_split_linear(g, p, rng))
    return roots


def roots_of_power_sums(w: Sequence[int], s: int, modulus: PrimeModulus,
                        rng: random.Random | int | None = 0) -> set[int]:
    """Recover the ``s`` distinct elements whose power sums are ``w``.

    Raises DecodeError when the monic polynomial does not have ``s`` distinct
    roots in the field.
    """
    if s == 0:
        return set()
    f = newton_to_monic(w, s, modulus)
    roots = find_roots(f, rng)
    if len(roots) != s:
        raise DecodeError(f"power sums do not describe {s} distinct field elements "
                          f"(found {len(roots)} distinct roots)")
    return roots
