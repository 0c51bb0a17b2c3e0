"""Exact truncated bivariate power series over F_{p^n}.

A TruncSeries with precision N stores every nonzero coefficient of total
degree <= N and represents the series modulo degree N+1.  All operations
propagate precision pessimistically: we never return a coefficient that is
not implied by the inputs.

ShiftedSeries adds Laurent-monomial bookkeeping x^i y^j * body, which is
what the monomial Cramer inversions of the transform steps need.

Internally exponent pairs are packed into single ints (a << 16 | b) so the
hot multiplication loop works on int keys; the public surface speaks
(a, b) tuples.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import (
    DuplicateTerm,
    Indeterminate,
    NotAUnit,
    NotLocal,
    PrecisionExhausted,
    ShapeError,
    VariableMismatch,
)
from .field import FieldElem, FiniteField, Raw

_SH = 16
_MASK = (1 << _SH) - 1
_MAXE = _MASK >> 1  # exponent bound so packed keys add without carry


def _pack(a: int, b: int) -> int:
    return (a << _SH) | b


def _unpack(k: int) -> tuple[int, int]:
    return k >> _SH, k & _MASK


def _deg(k: int) -> int:
    return (k >> _SH) + (k & _MASK)


def _grlex_key(ab):
    # ascending total degree, then descending x-exponent
    a, b = ab
    return (a + b, -a)


class TruncSeries:
    """Immutable truncated series over a fixed ordered variable pair."""

    __slots__ = ("field", "var_names", "prec", "_t")

    def __init__(self, field: FiniteField, var_names, prec: int, terms: dict,
                 _packed: bool = False):
        if prec < 0:
            raise PrecisionExhausted("negative precision")
        self.field = field
        self.var_names = tuple(var_names)
        self.prec = prec
        if _packed:
            self._t = terms
        else:
            t = {}
            for (a, b), c in terms.items():
                if a > _MAXE or b > _MAXE:
                    raise PrecisionExhausted(f"exponent pair ({a}, {b}) too large")
                if a + b <= prec and not field.is_zero(c):
                    t[_pack(a, b)] = c
            self._t = t

    # construction ----------------------------------------------------------

    @staticmethod
    def make(field, var_names, entries, prec) -> "TruncSeries":
        """Build from ((a, b), coeff) pairs; a duplicate exponent pair is an error."""
        terms: dict[tuple[int, int], Raw] = {}
        for ab, c in entries:
            a, b = ab
            if a < 0 or b < 0:
                raise ValueError(f"negative exponent pair {ab}")
            if ab in terms:
                raise DuplicateTerm(f"exponent pair {ab} given twice")
            raw = c.raw if isinstance(c, FieldElem) else field.from_int(c) if isinstance(c, int) else c
            terms[ab] = raw
        return TruncSeries(field, var_names, prec, terms)

    @staticmethod
    def zero(field, var_names, prec) -> "TruncSeries":
        return TruncSeries(field, var_names, prec, {}, _packed=True)

    @staticmethod
    def const(field, var_names, prec, c) -> "TruncSeries":
        raw = c.raw if isinstance(c, FieldElem) else field.from_int(c) if isinstance(c, int) else c
        return TruncSeries(field, var_names, prec, {(0, 0): raw})

    @staticmethod
    def one(field, var_names, prec) -> "TruncSeries":
        return TruncSeries.const(field, var_names, prec, 1)

    @staticmethod
    def variable(field, var_names, prec, index: int) -> "TruncSeries":
        ab = (1, 0) if index == 0 else (0, 1)
        return TruncSeries(field, var_names, prec, {ab: field.one()})

    @staticmethod
    def monomial(field, var_names, prec, a: int, b: int, c=1) -> "TruncSeries":
        raw = c.raw if isinstance(c, FieldElem) else field.from_int(c) if isinstance(c, int) else c
        return TruncSeries(field, var_names, prec, {(a, b): raw})

    # basic queries ----------------------------------------------------------

    @property
    def terms(self) -> dict[tuple[int, int], Raw]:
        return {_unpack(k): c for k, c in self._t.items()}

    def num_terms(self) -> int:
        return len(self._t)

    def coeff(self, a: int, b: int) -> Raw:
        return self._t.get(_pack(a, b), self.field.zero())

    def coeff_elem(self, a: int, b: int) -> FieldElem:
        return FieldElem(self.field, self.coeff(a, b))

    def is_zero(self) -> bool:
        return not self._t

    def is_unit(self) -> bool:
        return 0 in self._t

    def constant_term(self) -> Raw:
        return self._t.get(0, self.field.zero())

    def order(self) -> int:
        """Minimum total degree of stored terms; Indeterminate on the zero series."""
        if not self._t:
            raise Indeterminate("order of a series that is zero up to precision")
        return min(_deg(k) for k in self._t)

    def order_or_none(self) -> int | None:
        return None if not self._t else min(_deg(k) for k in self._t)

    def x_ideal_exponent(self) -> tuple[int, bool]:
        """(c, cofactor_is_unit): minimal x-exponent and whether (c, 0) is present."""
        if not self._t:
            raise Indeterminate("x-ideal exponent of a zero series")
        c = min(k >> _SH for k in self._t)
        return c, _pack(c, 0) in self._t

    def _require_same_vars(self, other: "TruncSeries"):
        if self.var_names != other.var_names:
            raise VariableMismatch(f"{self.var_names} vs {other.var_names}")
        if self.field != other.field:
            raise VariableMismatch("coefficient fields differ")

    def with_prec(self, prec: int) -> "TruncSeries":
        if prec > self.prec:
            raise PrecisionExhausted(f"cannot raise precision {self.prec} -> {prec}")
        if prec == self.prec:
            return self
        return TruncSeries(self.field, self.var_names, prec,
                           {k: c for k, c in self._t.items() if _deg(k) <= prec},
                           _packed=True)

    def promote_approx(self, prec: int) -> "TruncSeries":
        """Reinterpret as a higher-precision approximation.

        Only for Newton-style intermediates whose final residual is checked
        at full precision; never sound for results.
        """
        if prec <= self.prec:
            return self.with_prec(prec)
        return TruncSeries(self.field, self.var_names, prec, self._t, _packed=True)

    # ring operations ---------------------------------------------------------

    def __add__(self, other: "TruncSeries") -> "TruncSeries":
        self._require_same_vars(other)
        prec = min(self.prec, other.prec)
        fld = self.field
        if fld.p == 2 and fld.n == 1:
            sh = _SH
            mask = _MASK
            keys = {k for k in self._t if (k >> sh) + (k & mask) <= prec}
            keys ^= {k for k in other._t if (k >> sh) + (k & mask) <= prec}
            return TruncSeries(fld, self.var_names, prec,
                               dict.fromkeys(keys, 1), _packed=True)
        out = {k: c for k, c in self._t.items() if _deg(k) <= prec}
        for k, c in other._t.items():
            if _deg(k) > prec:
                continue
            s = fld.add(out.get(k, 0 if fld.n == 1 else fld.zero()), c)
            if fld.is_zero(s):
                out.pop(k, None)
            else:
                out[k] = s
        return TruncSeries(fld, self.var_names, prec, out, _packed=True)

    def __neg__(self) -> "TruncSeries":
        fld = self.field
        if fld.p == 2:
            return self
        return TruncSeries(fld, self.var_names, self.prec,
                           {k: fld.neg(c) for k, c in self._t.items()}, _packed=True)

    def __sub__(self, other: "TruncSeries") -> "TruncSeries":
        return self + (-other)

    def scale(self, c) -> "TruncSeries":
        fld = self.field
        raw = c.raw if isinstance(c, FieldElem) else fld.from_int(c) if isinstance(c, int) else c
        if fld.is_zero(raw):
            return TruncSeries.zero(fld, self.var_names, self.prec)
        if raw == fld.one():
            return self
        return TruncSeries(fld, self.var_names, self.prec,
                           {k: fld.mul(raw, v) for k, v in self._t.items()}, _packed=True)

    def __mul__(self, other: "TruncSeries") -> "TruncSeries":
        self._require_same_vars(other)
        prec = min(self.prec, other.prec)
        fld = self.field
        f, g = (self, other) if len(self._t) <= len(other._t) else (other, self)
        sh, mask = _SH, _MASK
        if fld.p == 2 and fld.n == 1:
            if len(f._t) * len(g._t) <= 4096:
                # sparse pair loop; coefficients are all 1, collisions cancel
                out_s: set[int] = set()
                for k1 in f._t:
                    d1 = (k1 >> sh) + (k1 & mask)
                    lim = prec - d1
                    if lim < 0:
                        continue
                    for k2 in g._t:
                        if (k2 >> sh) + (k2 & mask) <= lim:
                            k = k1 + k2
                            if k in out_s:
                                out_s.discard(k)
                            else:
                                out_s.add(k)
                return TruncSeries(fld, self.var_names, prec,
                                   dict.fromkeys(out_s, 1), _packed=True)
            # carryless multiplication: rows packed into one big integer with
            # stride W wide enough that product rows never collide
            W = 2 * prec + 2
            gi = 0
            for k in g._t:
                a, b = k >> sh, k & mask
                if a + b <= prec:
                    gi |= 1 << (a * W + b)
            acc = 0
            for k in f._t:
                a, b = k >> sh, k & mask
                if a + b <= prec:
                    acc ^= gi << (a * W + b)
            out: dict[int, Raw] = {}
            if acc:
                data = acc.to_bytes((acc.bit_length() + 7) // 8, "little")
                for byte_i, byte in enumerate(data):
                    if byte:
                        base = byte_i * 8
                        bb = byte
                        while bb:
                            low = bb & -bb
                            a, b = divmod(base + low.bit_length() - 1, W)
                            if a + b <= prec:
                                out[(a << sh) | b] = 1
                            bb ^= low
            return TruncSeries(fld, self.var_names, prec, out, _packed=True)
        out_d: dict[int, Raw] = {}
        g_sorted = sorted(g._t.items(), key=lambda kv: (kv[0] >> sh) + (kv[0] & mask))
        g_degs = [(k >> sh) + (k & mask) for k, _ in g_sorted]
        p = fld.p
        if fld.n == 1:
            get = out_d.get
            for k1, c1 in f._t.items():
                d1 = (k1 >> sh) + (k1 & mask)
                if d1 > prec:
                    continue
                lim = prec - d1
                for (k2, c2), d2 in zip(g_sorted, g_degs):
                    if d2 > lim:
                        break
                    k = k1 + k2
                    out_d[k] = (get(k, 0) + c1 * c2) % p
            out_d = {k: c for k, c in out_d.items() if c}
            return TruncSeries(fld, self.var_names, prec, out_d, _packed=True)
        zero = fld.zero()
        for k1, c1 in f._t.items():
            d1 = (k1 >> sh) + (k1 & mask)
            if d1 > prec:
                continue
            lim = prec - d1
            for (k2, c2), d2 in zip(g_sorted, g_degs):
                if d2 > lim:
                    break
                k = k1 + k2
                out_d[k] = fld.add(out_d.get(k, zero), fld.mul(c1, c2))
        out_d = {k: c for k, c in out_d.items() if not fld.is_zero(c)}
        return TruncSeries(fld, self.var_names, prec, out_d, _packed=True)

    def __pow__(self, k: int) -> "TruncSeries":
        if k < 0:
            return self.invert_unit() ** (-k)
        result = TruncSeries.one(self.field, self.var_names, self.prec)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other):
        return (isinstance(other, TruncSeries)
                and self.field == other.field
                and self.var_names == other.var_names
                and self.prec == other.prec
                and self._t == other._t)

    def agrees_with(self, other: "TruncSeries", through: int | None = None) -> bool:
        """Coefficientwise equality through min precision (or an explicit degree)."""
        self._require_same_vars(other)
        n = min(self.prec, other.prec)
        if through is not None:
            n = min(n, through)
        for k in set(self._t) | set(other._t):
            if _deg(k) <= n and self._t.get(k) != other._t.get(k):
                return False
        return True

    # calculus and inversion ---------------------------------------------------

    def partial(self, var: str) -> "TruncSeries":
        """Formal partial derivative; precision drops by one."""
        if var not in self.var_names:
            raise VariableMismatch(f"unknown variable {var!r} for {self.var_names}")
        if self.prec == 0:
            raise PrecisionExhausted("cannot differentiate a precision-0 series")
        ix = self.var_names.index(var)
        fld = self.field
        out: dict[int, Raw] = {}
        step = 1 << _SH if ix == 0 else 1
        for k, c in self._t.items():
            e = (k >> _SH) if ix == 0 else (k & _MASK)
            if e == 0:
                continue
            d = fld.int_mul(e, c)
            if fld.is_zero(d):
                continue
            out[k - step] = d
        return TruncSeries(fld, self.var_names, self.prec - 1, out, _packed=True)

    def invert_unit(self) -> "TruncSeries":
        """Two-sided inverse up to precision; Newton, the error squares each step."""
        fld = self.field
        c0 = self.constant_term()
        if fld.is_zero(c0):
            raise NotAUnit("series has zero constant term")
        inv0 = fld.inv(c0)
        if len(self._t) == 1:
            return TruncSeries.const(fld, self.var_names, self.prec, inv0)
        two = fld.from_int(2)
        d = 0
        b = TruncSeries.const(fld, self.var_names, 0, inv0)
        while d < self.prec:
            d = min(2 * d + 1, self.prec)
            fk = self.with_prec(d)
            bk = TruncSeries(fld, self.var_names, d, b._t, _packed=True)
            b = bk * (TruncSeries.const(fld, self.var_names, d, two) - fk * bk)
        return b

    # substitution ---------------------------------------------------------------

    def substitute(self, gx: "TruncSeries", gy: "TruncSeries") -> "TruncSeries":
        """Compose f(x, y) with x -> gx, y -> gy (both with zero constant term)."""
        gx._require_same_vars(gy)
        if gx.is_unit() or gy.is_unit():
            raise NotLocal("substitution maps must have zero constant term")
        gx_ord = gx.order_or_none()
        gy_ord = gy.order_or_none()
        ords = [o for o in (gx_ord, gy_ord) if o is not None]
        prec = min(gx.prec, gy.prec)
        if ords:
            prec = min(prec, self.prec * min(ords))
        fld = self.field
        out = TruncSeries.zero(fld, gx.var_names, prec)
        rows: dict[int, list[tuple[int, Raw]]] = {}
        for k, c in self._t.items():
            rows.setdefault(k >> _SH, []).append((k & _MASK, c))
        gxp = gx.with_prec(prec) if gx.prec > prec else gx
        gyp = gy.with_prec(prec) if gy.prec > prec else gy
        one = TruncSeries.one(fld, gx.var_names, prec)
        gy_pows: dict[int, TruncSeries] = {0: one}
        gx_pows: dict[int, TruncSeries] = {0: one}

        def _pow(base, cache, k):
            if k not in cache:
                half = _pow(base, cache, k >> 1)
                sq = half * half
                cache[k] = sq if k % 2 == 0 else sq * base
            return cache[k]

        for a in sorted(rows):
            if gx_ord is not None and a * gx_ord > prec:
                break
            if gx_ord is None and a > 0:
                continue  # gx is 0 up to precision: rows with a > 0 vanish
            acc = TruncSeries.zero(fld, gx.var_names, prec)
            for b, c in rows[a]:
                if gy_ord is None and b > 0:
                    continue
                if gy_ord is not None and b * gy_ord > prec:
                    continue
                acc = acc + _pow(gyp, gy_pows, b).scale(c)
            if not acc.is_zero():
                out = out + _pow(gxp, gx_pows, a) * acc
        return out

    # slices ----------------------------------------------------------------------

    def pure_part(self, index: int = 0) -> "TruncSeries":
        """The slice with the other variable set to 0 (same variable pair)."""
        if index == 0:
            t = {k: c for k, c in self._t.items() if k & _MASK == 0}
        else:
            t = {k: c for k, c in self._t.items() if k >> _SH == 0}
        return TruncSeries(self.field, self.var_names, self.prec, t, _packed=True)

    def drop_pure_part(self, index: int = 0) -> "TruncSeries":
        if index == 0:
            t = {k: c for k, c in self._t.items() if k & _MASK != 0}
        else:
            t = {k: c for k, c in self._t.items() if k >> _SH != 0}
        return TruncSeries(self.field, self.var_names, self.prec, t, _packed=True)

    def rename(self, var_names) -> "TruncSeries":
        return TruncSeries(self.field, tuple(var_names), self.prec, self._t, _packed=True)

    def map_exponents(self, fn, prec: int) -> "TruncSeries":
        """Apply (a, b) -> fn(a, b) to every monomial (used by monomial transforms)."""
        fld = self.field
        out: dict[int, Raw] = {}
        for k, c in self._t.items():
            a, b = fn(*_unpack(k))
            if a + b > prec:
                continue
            kk = _pack(a, b)
            if kk in out:
                s = fld.add(out[kk], c)
                if fld.is_zero(s):
                    del out[kk]
                else:
                    out[kk] = s
            else:
                out[kk] = c
        return TruncSeries(fld, self.var_names, prec, out, _packed=True)

    # serialization -----------------------------------------------------------------

    def to_text(self) -> str:
        if not self._t:
            return "0"
        x, y = self.var_names
        parts = []
        for a, b in sorted((_unpack(k) for k in self._t), key=_grlex_key):
            cs = self.field.raw_to_str(self._t[_pack(a, b)])
            parts.append(f"{cs} * {x}^{a} * {y}^{b}")
        return " + ".join(parts)

    @staticmethod
    def from_text(field, var_names, prec, text: str) -> "TruncSeries":
        if text.strip() == "0":
            return TruncSeries.zero(field, var_names, prec)
        x, y = var_names
        terms = {}
        for part in text.split(" + "):
            cs, xs, ys = (s.strip() for s in part.split("*"))
            a = int(xs[len(x) + 1:])
            b = int(ys[len(y) + 1:])
            if (a, b) in terms:
                raise DuplicateTerm(f"exponent pair {(a, b)} given twice")
            terms[(a, b)] = field.raw_from_str(cs)
        return TruncSeries(field, var_names, prec, terms)

    def to_json_obj(self) -> dict:
        return {
            "p": self.field.p,
            "n": self.field.n,
            "vars": list(self.var_names),
            "prec": self.prec,
            "terms": [[a, b, self.field.raw_to_str(self._t[_pack(a, b)])]
                      for a, b in sorted((_unpack(k) for k in self._t), key=_grlex_key)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), separators=(",", ":"), sort_keys=True)

    @staticmethod
    def from_json_obj(obj: dict) -> "TruncSeries":
        field = FiniteField.get(obj["p"], obj["n"])
        terms = {}
        for a, b, cs in obj["terms"]:
            if (a, b) in terms:
                raise DuplicateTerm(f"exponent pair {(a, b)} given twice")
            terms[(a, b)] = field.raw_from_str(cs)
        return TruncSeries(field, tuple(obj["vars"]), obj["prec"], terms)

    @staticmethod
    def from_json(s: str) -> "TruncSeries":
        return TruncSeries.from_json_obj(json.loads(s))

    def __repr__(self):
        body = self.to_text()
        if len(body) > 120:
            body = body[:117] + "..."
        return f"<{body} (prec {self.prec})>"


@dataclass(frozen=True)
class ShiftedSeries:
    """x^sx * y^sy * body with sx, sy possibly negative and body monomial-reduced.

    Normalization pulls the common monomial factor of the body into the shift,
    so the body has a term with x-exponent 0 and a term with y-exponent 0.
    """

    shift: tuple[int, int]
    body: TruncSeries

    @staticmethod
    def from_trunc(f: TruncSeries) -> "ShiftedSeries":
        if f.is_zero():
            raise Indeterminate("cannot shift-normalize a zero series")
        terms = f.terms
        sx = min(a for a, _ in terms)
        sy = min(b for _, b in terms)
        body = TruncSeries(f.field, f.var_names, f.prec - sx - sy,
                           {(a - sx, b - sy): c for (a, b), c in terms.items()})
        return ShiftedSeries((sx, sy), body)

    def require_unit_body(self) -> "ShiftedSeries":
        """The monomial-times-unit check: body must have a nonzero constant term."""
        if not self.body.is_unit():
            raise ShapeError(
                f"series is not monomial * unit: shift {self.shift}, "
                f"body order {self.body.order_or_none()}")
        return self

    def is_monomial_times_unit(self) -> bool:
        return self.body.is_unit()

    def __mul__(self, other: "ShiftedSeries") -> "ShiftedSeries":
        return ShiftedSeries(
            (self.shift[0] + other.shift[0], self.shift[1] + other.shift[1]),
            self.body * other.body)

    def inverse(self) -> "ShiftedSeries":
        self.require_unit_body()
        return ShiftedSeries((-self.shift[0], -self.shift[1]), self.body.invert_unit())

    def __pow__(self, k: int) -> "ShiftedSeries":
        if k < 0:
            return self.inverse() ** (-k)
        return ShiftedSeries((self.shift[0] * k, self.shift[1] * k), self.body ** k)

    def to_trunc(self) -> TruncSeries:
        sx, sy = self.shift
        if sx < 0 or sy < 0:
            raise ShapeError(f"negative shift {self.shift} cannot convert to a series")
        f = self.body
        return TruncSeries(f.field, f.var_names, f.prec + sx + sy,
                           {(a + sx, b + sy): c for (a, b), c in f.terms.items()})
