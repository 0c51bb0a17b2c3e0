"""Arithmetic in F_{p^n} with canonical representatives.

Raw element values are plain ints for n == 1 and little-endian coefficient
tuples for n > 1; series code works on raw values for speed, and FieldElem
wraps a raw value for the public API.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .errors import FieldTooSmall, NotAUnit

Raw = int | tuple[int, ...]


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    d = 2
    while d * d <= p:
        if p % d == 0:
            return False
        d += 1
    return True


def _poly_mulmod(a: tuple[int, ...], b: tuple[int, ...], mod: tuple[int, ...], p: int) -> tuple[int, ...]:
    n = len(mod) - 1
    prod = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                prod[i + j] = (prod[i + j] + ai * bj) % p
    # reduce by the monic modulus
    for i in range(len(prod) - 1, n - 1, -1):
        c = prod[i]
        if c:
            prod[i] = 0
            for j in range(n + 1):
                prod[i - n + j] = (prod[i - n + j] - c * mod[j]) % p
    out = prod[:n]
    while len(out) < n:
        out.append(0)
    return tuple(out)


def _poly_divides(d: tuple[int, ...], f: tuple[int, ...], p: int) -> bool:
    # d, f monic little-endian; remainder of f by d is zero?
    r = list(f)
    while len(r) >= len(d):
        c = r[-1]
        if c:
            off = len(r) - len(d)
            for j, dj in enumerate(d):
                r[off + j] = (r[off + j] - c * dj) % p
        r.pop()
    return all(c == 0 for c in r)


def _monic_polys(deg: int, p: int):
    for code in range(p**deg):
        coeffs = []
        v = code
        for _ in range(deg):
            coeffs.append(v % p)
            v //= p
        yield tuple(coeffs) + (1,)


def _find_irreducible(p: int, n: int) -> tuple[int, ...]:
    # deterministic smallest-code monic irreducible of degree n
    for f in _monic_polys(n, p):
        if f[0] == 0:
            continue
        if all(
            not _poly_divides(d, f, p)
            for deg in range(1, n // 2 + 1)
            for d in _monic_polys(deg, p)
        ):
            return f
    raise FieldTooSmall(f"no irreducible polynomial of degree {n} over F_{p}")


class FiniteField:
    """F_{p^n} with raw-value arithmetic; instances are interned via get()."""

    def __init__(self, p: int, n: int = 1):
        if not _is_prime(p):
            raise ValueError(f"p must be prime, got {p}")
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        self.p = p
        self.n = n
        self.order = p**n
        self.modulus: tuple[int, ...] | None = _find_irreducible(p, n) if n > 1 else None

    @staticmethod
    @lru_cache(maxsize=None)
    def get(p: int, n: int = 1) -> "FiniteField":
        return FiniteField(p, n)

    def __repr__(self):
        return f"F_{self.p}" if self.n == 1 else f"F_{self.p}^{self.n}"

    def __eq__(self, other):
        return isinstance(other, FiniteField) and (self.p, self.n) == (other.p, other.n)

    def __hash__(self):
        return hash((self.p, self.n))

    # raw-value arithmetic -------------------------------------------------

    def zero(self) -> Raw:
        return 0 if self.n == 1 else (0,) * self.n

    def one(self) -> Raw:
        return 1 if self.n == 1 else (1,) + (0,) * (self.n - 1)

    def from_int(self, k: int) -> Raw:
        k %= self.p
        return k if self.n == 1 else (k,) + (0,) * (self.n - 1)

    def add(self, a: Raw, b: Raw) -> Raw:
        if self.n == 1:
            return (a + b) % self.p
        return tuple((x + y) % self.p for x, y in zip(a, b))

    def sub(self, a: Raw, b: Raw) -> Raw:
        if self.n == 1:
            return (a - b) % self.p
        return tuple((x - y) % self.p for x, y in zip(a, b))

    def neg(self, a: Raw) -> Raw:
        if self.n == 1:
            return (-a) % self.p
        return tuple((-x) % self.p for x in a)

    def mul(self, a: Raw, b: Raw) -> Raw:
        if self.n == 1:
            return (a * b) % self.p
        return _poly_mulmod(a, b, self.modulus, self.p)

    def is_zero(self, a: Raw) -> bool:
        return a == 0 if self.n == 1 else all(x == 0 for x in a)

    def inv(self, a: Raw) -> Raw:
        if self.is_zero(a):
            raise NotAUnit("inverse of zero")
        if self.n == 1:
            return pow(a, self.p - 2, self.p)
        return self.pow(a, self.order - 2)

    def pow(self, a: Raw, k: int) -> Raw:
        if k < 0:
            return self.pow(self.inv(a), -k)
        if self.n == 1:
            return pow(a, k, self.p)
        out = self.one()
        base = a
        while k:
            if k & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            k >>= 1
        return out

    def int_mul(self, k: int, a: Raw) -> Raw:
        return self.mul(self.from_int(k), a)

    def elements(self):
        for code in range(self.order):
            if self.n == 1:
                yield code
            else:
                v, coeffs = code, []
                for _ in range(self.n):
                    coeffs.append(v % self.p)
                    v //= self.p
                yield tuple(coeffs)

    def nonzero_elements(self):
        return (a for a in self.elements() if not self.is_zero(a))

    # canonical strings ----------------------------------------------------

    def raw_to_str(self, a: Raw) -> str:
        if self.n == 1:
            return str(a)
        return ",".join(str(c) for c in a)

    def raw_from_str(self, s: str) -> Raw:
        if self.n == 1:
            return int(s) % self.p
        coeffs = tuple(int(c) % self.p for c in s.split(","))
        if len(coeffs) != self.n:
            raise ValueError(f"expected {self.n} coefficients, got {len(coeffs)}")
        return coeffs


@dataclass(frozen=True)
class FieldElem:
    """An element of F_{p^n} in canonical representation."""

    field: FiniteField
    raw: Raw

    @property
    def p(self) -> int:
        return self.field.p

    @property
    def n(self) -> int:
        return self.field.n

    @property
    def value(self) -> Raw:
        return self.raw

    def __add__(self, other: "FieldElem") -> "FieldElem":
        return FieldElem(self.field, self.field.add(self.raw, other.raw))

    def __sub__(self, other: "FieldElem") -> "FieldElem":
        return FieldElem(self.field, self.field.sub(self.raw, other.raw))

    def __neg__(self) -> "FieldElem":
        return FieldElem(self.field, self.field.neg(self.raw))

    def __mul__(self, other: "FieldElem") -> "FieldElem":
        return FieldElem(self.field, self.field.mul(self.raw, other.raw))

    def inverse(self) -> "FieldElem":
        return FieldElem(self.field, self.field.inv(self.raw))

    def __pow__(self, k: int) -> "FieldElem":
        return FieldElem(self.field, self.field.pow(self.raw, k))

    def is_zero(self) -> bool:
        return self.field.is_zero(self.raw)

    def __str__(self):
        return self.field.raw_to_str(self.raw)
