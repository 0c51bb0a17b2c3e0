"""Exact-rational valuation bookkeeping for quadratic-transform sequences.

Normalization: the level-0 parameter has value 1, so the level-i parameter
has value 1/M_i with M_i = m_1 ... m_i.  A Jacobian ideal (x_i^{c_i})
contributes the value (c_i / M_i) / (p - 1); the running infimum of these
is the quantity whose decay certifies distance zero.

No floating point anywhere: everything is int or Fraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import ValueTie

MINUS = "minus"
EXACT = "exact"


@dataclass(frozen=True)
class CutValue:
    """A cut r^- or the realized value r (identified with r^+) in the rationals."""

    r: Fraction
    side: str = EXACT

    def __post_init__(self):
        if self.side not in (MINUS, EXACT):
            raise ValueError(f"side must be '{MINUS}' or '{EXACT}'")

    def _key(self):
        return (self.r, 0 if self.side == MINUS else 1)

    def __lt__(self, other: "CutValue") -> bool:
        return self._key() < other._key()

    def __le__(self, other: "CutValue") -> bool:
        return self._key() <= other._key()

    def __neg__(self) -> "CutValue":
        # -(r^-) = (-r)^+ and -(r^+) = (-r)^-: negation swaps the side
        return CutValue(-self.r, EXACT if self.side == MINUS else MINUS)

    def scale(self, k: int) -> "CutValue":
        """k * cut for a positive integer k; preserves the side."""
        if k <= 0:
            raise ValueError("scale factor must be positive")
        return CutValue(self.r * k, self.side)

    def is_independent(self, p: int) -> bool:
        """The defect-independence criterion: the cut equals p times itself."""
        return self.scale(p) == self

    def __str__(self):
        return f"{self.r}{'-' if self.side == MINUS else ''}"


@dataclass(frozen=True)
class Verdict:
    kind: str                      # "Independent" or "Inconclusive"
    bound_exponent: int | None
    value: Fraction | None         # witness infimum / current infimum

    def __str__(self):
        if self.kind == "Independent":
            return f"Independent (inf {self.value} < 2^-{self.bound_exponent})"
        return f"Inconclusive (current inf {self.value})"


@dataclass(frozen=True)
class ValueLedger:
    """Append-only valuation state of one quadratic-transform chain."""

    p: int
    m_list: tuple[int, ...] = ()
    cum: tuple[int, ...] = (1,)                 # M_0 = 1, M_i = m_1 ... m_i
    c_list: tuple[int, ...] = ()
    jac_values: tuple[Fraction, ...] = ()       # (c_i / M_i) / (p - 1)
    running_inf: Fraction | None = None

    @property
    def current_M(self) -> int:
        return self.cum[-1]

    def extend(self, m: int) -> "ValueLedger":
        if m < 1:
            raise ValueError("m must be >= 1")
        return ValueLedger(self.p, self.m_list + (m,), self.cum + (self.cum[-1] * m,),
                           self.c_list, self.jac_values, self.running_inf)

    def value_of_x(self, i: int | None = None) -> Fraction:
        M = self.cum[-1] if i is None else self.cum[i]
        return Fraction(1, M)

    def monomial_value(self, i: int, exponents: tuple[int, int],
                       aux_value_of_y: Fraction) -> Fraction:
        """a * (1/M_i) + b * aux for a monomial x_i^a y_i^b."""
        if i >= len(self.cum):
            raise IndexError(f"level {i} beyond recorded history {len(self.cum) - 1}")
        a, b = exponents
        return Fraction(a, self.cum[i]) + b * aux_value_of_y

    def record_jacobian(self, c: int) -> "ValueLedger":
        val = Fraction(c, self.cum[-1] * (self.p - 1))
        inf = val if self.running_inf is None else min(self.running_inf, val)
        return ValueLedger(self.p, self.m_list, self.cum, self.c_list + (c,),
                           self.jac_values + (val,), inf)

    def distance_verdict(self, bound_exponent: int) -> Verdict:
        """Independent iff the running infimum is certified below 2^-r.

        One-sided by design: finite data can witness decay, never a positive
        infimum, so the other answer is always Inconclusive.
        """
        if self.running_inf is None:
            return Verdict("Inconclusive", None, None)
        if self.running_inf < Fraction(1, 2**bound_exponent):
            return Verdict("Independent", bound_exponent, self.running_inf)
        return Verdict("Inconclusive", None, self.running_inf)

    def csv_rows(self) -> list[list[str]]:
        rows = [["i", "m_i", "M_i", "c_i", "jac_value", "running_inf"]]
        inf = None
        for i, c in enumerate(self.c_list):
            val = self.jac_values[i]
            inf = val if inf is None else min(inf, val)
            m_i = self.m_list[i - 1] if i >= 1 else 1
            rows.append([str(i), str(m_i), str(self.cum[i]), str(c), str(val), str(inf)])
        return rows

    def to_json_obj(self) -> dict:
        return {
            "p": self.p,
            "m": list(self.m_list),
            "M": [str(M) for M in self.cum],
            "c": list(self.c_list),
            "jac_values": [str(v) for v in self.jac_values],
            "running_inf": str(self.running_inf) if self.running_inf is not None else None,
        }


def series_min_value(terms, vx: Fraction, vy: Fraction):
    """(value, monomial) of the value-minimal monomial; ValueTie when not unique."""
    best = None
    best_ab = None
    ties = []
    for (a, b) in terms:
        val = a * vx + b * vy
        if best is None or val < best:
            best, best_ab, ties = val, (a, b), [(a, b)]
        elif val == best:
            ties.append((a, b))
    if best is None:
        raise ValueTie("no terms to evaluate")
    if len(ties) > 1:
        raise ValueTie(f"value {best} attained by {sorted(ties)}")
    return best, best_ab
