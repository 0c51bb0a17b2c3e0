"""Extension frames between two-dimensional regular local rings.

A frame holds the two lower regular parameters written as series in the two
upper regular parameters.  The step engines realize one quadratic-transform
package: canonicalize the upper parameters, apply the monomial substitution
x -> x1^m (y1+a)^a', y -> x1^q (y1+a)^b', and recover the new lower
parameters by monomial Cramer inversion.  Every step re-derives the Jacobian
exponent of its output from scratch and compares it with the predicted
recursion value; disagreement raises FormulaMismatch.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field, replace
from fractions import Fraction
from math import gcd

from .errors import (
    DegenerateTranslation,
    FormulaMismatch,
    Indeterminate,
    NotPrincipalPowerOfX,
    PrecisionExhausted,
    ShapeError,
)
from .field import FieldElem, FiniteField, Raw
from .series import ShiftedSeries, TruncSeries

TYPE0, TYPE1, TYPE2 = 0, 1, 2
UNCLASSIFIED = None


@dataclass(frozen=True)
class DefectData:
    """Degree bookkeeping e * f * defect * g = n; defect is a power of p."""

    degree: int
    e: int = 1
    f: int = 1
    g: int = 1
    defect: int = 1

    def __post_init__(self):
        if self.e * self.f * self.defect * self.g != self.degree:
            raise ValueError("e * f * defect * g must equal the extension degree")

    def compose(self, other: "DefectData") -> "DefectData":
        return DefectData(self.degree * other.degree, self.e * other.e,
                          self.f * other.f, self.g * other.g,
                          self.defect * other.defect)


@dataclass(frozen=True)
class ChainData:
    """Jacobian data of a composite frame: exponent = upper + scale * lower."""

    lower_exp: int
    upper_exp: int
    scale: int


@dataclass(frozen=True)
class ExtensionFrame:
    """One arrow R -> S: lower parameters expressed in the upper parameters."""

    level: int
    tier: str                       # "RS", "ST" or "RT"
    lower_names: tuple[str, str]
    upper_names: tuple[str, str]
    u_series: TruncSeries
    v_series: TruncSeries
    ext_type: int | None = None
    jac_exp: int | None = None
    defect: DefectData | None = None
    chain: ChainData | None = None
    provenance: tuple = ()

    @property
    def field(self) -> FiniteField:
        return self.u_series.field

    @property
    def prec(self) -> int:
        return min(self.u_series.prec, self.v_series.prec)

    def to_json_obj(self) -> dict:
        return {
            "level": self.level,
            "tier": self.tier,
            "lower": list(self.lower_names),
            "upper": list(self.upper_names),
            "type": self.ext_type,
            "jac_exp": self.jac_exp,
            "u_series": self.u_series.to_json_obj(),
            "v_series": self.v_series.to_json_obj(),
            "provenance": [str(s) for s in self.provenance],
        }


def identity_frame(fld: FiniteField, prec: int, level=0, tier="RS",
                   lower=("u", "v"), upper=("x", "y")) -> ExtensionFrame:
    u = TruncSeries.variable(fld, upper, prec, 0)
    v = TruncSeries.variable(fld, upper, prec, 1)
    return ExtensionFrame(level, tier, lower, upper, u, v, TYPE0, 0)


def bootstrap_artin_schreier(p: int, n: int, e: int, prec: int,
                             level: int = -2, tier: str = "RS",
                             lower=("u", "v"), upper=("x", "y")) -> ExtensionFrame:
    """Frame of the degree-p extension generated by a root of X^p - X - v u^{-pe}.

    With x = u and y = u^e * root, the lower parameters become u = x and
    v = y^p - x^{e(p-1)} y, an extension of type 1 with Jacobian ideal
    (x^{(p-1)e}).
    """
    if e < 1:
        raise ValueError("e must be >= 1")
    fld = FiniteField.get(p, n)
    if prec < p * e:
        raise PrecisionExhausted(f"prec {prec} < p*e = {p * e}")
    u = TruncSeries.variable(fld, upper, prec, 0)
    v = (TruncSeries.monomial(fld, upper, prec, 0, p)
         - TruncSeries.monomial(fld, upper, prec, e * (p - 1), 1))
    frame = ExtensionFrame(level, tier, lower, upper, u, v,
                           defect=DefectData(p, defect=p))
    c = jacobian_exponent(frame)
    if c != (p - 1) * e:
        raise FormulaMismatch(f"bootstrap Jacobian exponent {c} != (p-1)e = {(p - 1) * e}")
    t = classify_type(frame)
    if t != TYPE1:
        raise FormulaMismatch(f"bootstrap frame classified as {t}, expected type 1")
    return replace(frame, ext_type=TYPE1, jac_exp=c)


# classification and Jacobian ------------------------------------------------


def classify_type(frame: ExtensionFrame) -> int | None:
    """0, 1 or 2 per the local normal forms; None when no shape matches."""
    p = frame.field.p
    try:
        ush = ShiftedSeries.from_trunc(frame.u_series)
    except Indeterminate:
        return UNCLASSIFIED
    if not ush.is_monomial_times_unit() or ush.shift[1] != 0:
        return UNCLASSIFIED
    v_pure_y = frame.v_series.pure_part(1)
    if v_pure_y.is_zero():
        return UNCLASSIFIED
    yord = min(b for _, b in v_pure_y.terms)
    if ush.shift[0] == 1 and yord == 1:
        return TYPE0
    if ush.shift[0] == 1 and yord == p:
        return TYPE1
    if ush.shift[0] == p and yord == 1:
        return TYPE2
    return UNCLASSIFIED


def jacobian_of_frame(frame: ExtensionFrame) -> TruncSeries:
    """du/dx * dv/dy - du/dy * dv/dx in the upper parameters."""
    x, y = frame.upper_names
    u, v = frame.u_series, frame.v_series
    return u.partial(x) * v.partial(y) - u.partial(y) * v.partial(x)


def jacobian_exponent(frame: ExtensionFrame) -> int:
    """The c with J(S/R) = (x^c), recomputed from the series.

    When the naive determinant vanishes identically mod p (constant-unit
    type 2 shapes), falls back to the chain-rule product recorded in the
    frame provenance.
    """
    jac = jacobian_of_frame(frame)
    if jac.is_zero():
        if frame.chain is not None:
            ch = frame.chain
            return ch.upper_exp + ch.scale * ch.lower_exp
        raise Indeterminate("zero Jacobian determinant and no provenance chain")
    c, unit = jac.x_ideal_exponent()
    if not unit:
        raise NotPrincipalPowerOfX(
            f"Jacobian is not x^{c} * unit up to precision {jac.prec}")
    return c


def compose(frame_rs: ExtensionFrame, frame_st: ExtensionFrame) -> ExtensionFrame:
    """Composite frame R -> T expressing the R-parameters in the T-parameters."""
    if frame_rs.upper_names != frame_st.lower_names:
        raise ShapeError(
            f"parameter mismatch: {frame_rs.upper_names} vs {frame_st.lower_names}")
    if frame_rs.level != frame_st.level:
        raise ShapeError(f"level mismatch: {frame_rs.level} vs {frame_st.level}")
    u = frame_rs.u_series.substitute(frame_st.u_series, frame_st.v_series)
    v = frame_rs.v_series.substitute(frame_st.u_series, frame_st.v_series)
    chain = None
    if frame_rs.jac_exp is not None and frame_st.jac_exp is not None:
        scale, _ = frame_st.u_series.x_ideal_exponent()
        chain = ChainData(frame_rs.jac_exp, frame_st.jac_exp, scale)
    defect = None
    if frame_rs.defect is not None and frame_st.defect is not None:
        defect = frame_rs.defect.compose(frame_st.defect)
    out = ExtensionFrame(frame_rs.level, "RT", frame_rs.lower_names,
                         frame_st.upper_names, u, v, defect=defect, chain=chain,
                         provenance=frame_rs.provenance + frame_st.provenance)
    return replace(out, ext_type=classify_type(out))


# transform step data ----------------------------------------------------------


def bezout_min_nonneg(m: int, q: int) -> tuple[int, int]:
    """Smallest nonnegative (a, b) with m*b - q*a = 1; requires gcd(m, q) = 1."""
    if gcd(m, q) != 1:
        raise ValueError(f"gcd({m}, {q}) != 1")
    b = 0
    while True:
        if (m * b - 1) % q == 0 and m * b - 1 >= 0:
            return (m * b - 1) // q, b
        b += 1


@dataclass(frozen=True)
class TransformStep:
    """Data of one quadratic-transform package (Theorem A or B flavor)."""

    flavor: str                  # "A" or "B"
    p: int
    m: int
    q: int
    alpha: Raw
    a_: int
    b_: int
    sigma: int
    m_bar: int
    q_bar: int
    c_: int
    d_: int
    use_y_directly: bool = False
    g_coeffs: tuple[tuple[int, Raw], ...] = ()
    beta: Raw | None = None

    def __post_init__(self):
        if gcd(self.m, self.q) != 1:
            raise ValueError(f"gcd(m, q) = gcd({self.m}, {self.q}) != 1")
        if self.m * self.b_ - self.q * self.a_ != 1:
            raise ValueError("upper Bezout m*b' - q*a' = 1 violated")
        if self.m_bar * self.d_ - self.q_bar * self.c_ != 1:
            raise ValueError("lower Bezout m_bar*d' - q_bar*c' = 1 violated")
        if self.flavor == "A":
            if self.m <= 1:
                raise ValueError("Theorem A needs m > 1")
            if self.sigma != gcd(self.m, self.p * self.q):
                raise ValueError("sigma != gcd(m, p*q)")
        elif self.flavor == "B":
            if self.sigma != gcd(self.p * self.m, self.q):
                raise ValueError("sigma != gcd(p*m, q)")
        else:
            raise ValueError(f"unknown flavor {self.flavor!r}")

    def describe(self) -> dict:
        return {
            "flavor": self.flavor, "m": self.m, "q": self.q,
            "sigma": self.sigma, "m_bar": self.m_bar, "q_bar": self.q_bar,
            "bezout_upper": [self.a_, self.b_], "bezout_lower": [self.c_, self.d_],
            "use_y_directly": self.use_y_directly,
            "g_degrees": [i for i, _ in self.g_coeffs],
        }

    def __str__(self):
        return (f"{self.flavor}(m={self.m}, q={self.q}, sigma={self.sigma}"
                f"{', y-direct' if self.use_y_directly else ''})")


@dataclass(frozen=True)
class StepResult:
    frame: ExtensionFrame
    step: TransformStep
    predicted_type: int
    predicted_c1: int
    # old upper parameters as series in the new upper parameters
    upper_map: tuple[TruncSeries, TruncSeries]
    canonical_binding: tuple[TruncSeries, TruncSeries]


def predict_type1(p: int, cbar: int, m: int, q: int) -> tuple[int, int]:
    """Predicted (type, c1) of a Theorem-A step on a type-1 frame with J = (x^cbar)."""
    if Fraction(q, m) >= Fraction(cbar, p - 1):
        return TYPE0, 0
    sigma = gcd(m, p * q)
    if sigma == 1:
        return TYPE1, cbar * m - (p - 1) * q
    return TYPE2, cbar * m - (p - 1) * q + (p - 1)


def predict_type2(p: int, cbar: int, m: int) -> tuple[int, int]:
    """Predicted (type, c1) of a Theorem-B step; sigma decides the case."""
    # c1/(p-1) = (cbar/(p-1))m - m, plus 1 when sigma = p
    return (TYPE1, cbar * m - (p - 1) * m), (TYPE2, cbar * m - (p - 1) * m + (p - 1))


# Newton solvers for the canonical parameter changes ---------------------------


def _newton_solve(F: TruncSeries, dF: TruncSeries, initial: TruncSeries,
                  target_index: int, other_map: TruncSeries | None,
                  label: str) -> TruncSeries:
    """Solve F(x, y) = (bar coordinate) for the variable at target_index.

    target_index 0: find X(xb, yb) with F(X, other_map) = xb;
    target_index 1: find Y(xb, yb) with F(xb, Y) = yb.
    Newton with accuracy doubling; intermediates are promoted approximations
    and soundness comes from the final full-precision residual (dF is a unit,
    so a vanishing residual pins the solution through the precision).
    """
    fld = F.field
    names = F.var_names
    prec = F.prec

    def maps(sol, work):
        if target_index == 0:
            return sol, other_map.with_prec(work)
        return TruncSeries.variable(fld, names, work, 0), sol

    def residual(sol, work):
        gx, gy = maps(sol, work)
        return (F.with_prec(work).substitute(gx, gy)
                - TruncSeries.variable(fld, names, work, target_index))

    sol = initial
    acc = 1
    while acc < prec:
        work = min(2 * acc + 1, prec)
        sol = sol.promote_approx(work)
        res = residual(sol, work)
        if not res.is_zero():
            dw = max(work - 1, 0)
            gx, gy = maps(sol.with_prec(dw), dw)
            deriv = dF.with_prec(dw).substitute(gx, gy)
            sol = (sol - (res * deriv.invert_unit().promote_approx(work))
                   .promote_approx(work)).promote_approx(work)
        acc = work
    sol = sol.promote_approx(prec)
    if not residual(sol, prec).is_zero():
        raise PrecisionExhausted(f"{label}: Newton did not close at precision {prec}")
    return sol


def invert_unit_scale(u: TruncSeries, y_of_bar: TruncSeries) -> TruncSeries:
    """Solve u(X, y_of_bar(xb, yb)) = xb for X as a series in (xb, yb).

    u must be x times a unit; the derivative du/dx is then a unit and each
    Newton step doubles the agreement order.
    """
    fld = u.field
    names = u.var_names
    prec = min(u.prec, y_of_bar.prec)
    gamma0 = u.coeff(1, 0)
    if fld.is_zero(gamma0):
        raise ShapeError("u is not x * unit")
    initial = TruncSeries.variable(fld, names, 1, 0).scale(fld.inv(gamma0))
    return _newton_solve(u.with_prec(prec), u.partial(names[0]), initial, 0,
                         y_of_bar.with_prec(prec), "unit-scale inversion")


def invert_transversal(vbar: TruncSeries) -> TruncSeries:
    """Solve vbar(x, Y) = yb for Y as a series in (x, yb); dvbar/dy must be a unit."""
    fld = vbar.field
    names = vbar.var_names
    tau0 = vbar.coeff(0, 1)
    if fld.is_zero(tau0):
        raise ShapeError("vbar is not y-transversal")
    initial = TruncSeries.variable(fld, names, 1, 1).scale(fld.inv(tau0))
    return _newton_solve(vbar, vbar.partial(names[1]), initial, 1, None,
                         "transversal inversion")


def apply_poly(g_coeffs: tuple[tuple[int, Raw], ...], base: TruncSeries) -> TruncSeries:
    """g(base) for a sparse polynomial g with zero constant term."""
    out = TruncSeries.zero(base.field, base.var_names, base.prec)
    for i, c in g_coeffs:
        if i < 1:
            raise ValueError("polynomial must have zero constant term")
        out = out + (base**i).scale(c)
    return out


def monomial_maps(fld: FiniteField, names, prec, m, q, a_, b_, alpha: Raw):
    """The pair x -> x1^m (y1+alpha)^a', y -> x1^q (y1+alpha)^b'."""
    ya = TruncSeries.make(fld, names, [((0, 1), fld.one()), ((0, 0), alpha)], prec)
    xm = TruncSeries.monomial(fld, names, prec, m, 0)
    xq = TruncSeries.monomial(fld, names, prec, q, 0)
    return xm * ya**a_, xq * ya**b_


class _YAlphaPowers:
    """Cache of (y + alpha)^k expansions, k of either sign."""

    def __init__(self, fld: FiniteField, names, prec, alpha: Raw):
        self.fld = fld
        self.names = names
        self.prec = prec
        self.base = TruncSeries.make(fld, names, [((0, 1), fld.one()), ((0, 0), alpha)], prec)
        self._cache: dict[int, TruncSeries] = {0: TruncSeries.one(fld, names, prec)}

    def pow(self, k: int) -> TruncSeries:
        if k not in self._cache:
            if k < 0:
                self._cache[k] = self.pow(-k).invert_unit()
            else:
                half = self.pow(k >> 1)
                sq = half * half
                self._cache[k] = sq if k % 2 == 0 else sq * self.base
        return self._cache[k]


@dataclass(frozen=True)
class FactoredImage:
    """x^sx * (y+alpha)^E * G: the shape of a monomial image of a term sum.

    Keeping the (y+alpha)-exponent symbolic is what prevents the huge
    binomial and geometric expansions from ever materializing inside the
    Cramer inversion; only the final small exponents are expanded.
    """

    sx: int
    E: int
    G: TruncSeries

    def to_series(self, ypows: _YAlphaPowers) -> TruncSeries:
        s = self.G * ypows.pow(self.E)
        return ShiftedSeries((self.sx, 0), ShiftedSeries.from_trunc(s).body
                             if False else s).to_trunc() if self.sx >= 0 else None


def _factored_to_series(img: FactoredImage, ypows: _YAlphaPowers) -> TruncSeries:
    if img.sx < 0:
        raise ShapeError(f"negative x-shift {img.sx} in factored image")
    body = img.G * ypows.pow(img.E)
    fld = body.field
    return TruncSeries(fld, body.var_names, body.prec + img.sx,
                       {(a + img.sx, b): c for (a, b), c in body.terms.items()})


def image_of_terms(series: TruncSeries, m: int, q: int, a_: int, b_: int,
                   ypows: _YAlphaPowers) -> FactoredImage:
    """Factored image of a term sum under x -> x^m (y+a)^a', y -> x^q (y+a)^b'.

    Each source term c x^i y^j maps to c x^{im+jq} (y+alpha)^{ia'+jb'}; the
    common monomial x^sx (y+alpha)^B0 is pulled out and the rest expanded.
    """
    fld = series.field
    names = series.var_names
    prec = ypows.prec
    if series.is_zero():
        raise PrecisionExhausted("image of a series that is zero up to precision")
    terms = series.terms
    sx = min(i * m + j * q for i, j in terms)
    b0 = min(i * a_ + j * b_ for i, j in terms)
    G = TruncSeries.zero(fld, names, prec)
    rows: dict[int, list] = {}
    for (i, j), c in terms.items():
        rows.setdefault(i * a_ + j * b_ - b0, []).append((i * m + j * q - sx, c))
    for e, entries in sorted(rows.items()):
        row = TruncSeries(fld, names, prec,
                          {(x, 0): c for x, c in entries if x <= prec})
        if row.is_zero():
            continue
        G = G + row * ypows.pow(e)
    if G.is_zero():
        raise PrecisionExhausted("factored image vanishes up to precision")
    return FactoredImage(sx, b0, G)


def _cramer_factored(Ui: FactoredImage, Vi: FactoredImage, m_bar: int, q_bar: int,
                     c_: int, d_: int, ypows: _YAlphaPowers):
    """Factored Cramer: u1 = U^d' V^-c', v1 + beta = U^-qb V^mb."""
    fld = ypows.fld
    names = ypows.names
    if not Ui.G.is_unit() or not Vi.G.is_unit():
        raise ShapeError("factored Cramer needs unit cofactors")
    sigma = Ui.sx * d_ - Vi.sx * c_
    if sigma < 1:
        raise ShapeError(f"Cramer x-shift {sigma} < 1")
    if -Ui.sx * q_bar + Vi.sx * m_bar != 0:
        raise ShapeError("Cramer v-shift is nonzero")
    GU_pows = {}
    GV_pows = {}

    def gu(k):
        if k not in GU_pows:
            GU_pows[k] = Ui.G**k if k >= 0 else Ui.G.invert_unit() ** (-k)
        return GU_pows[k]

    def gv(k):
        if k not in GV_pows:
            GV_pows[k] = Vi.G**k if k >= 0 else Vi.G.invert_unit() ** (-k)
        return GV_pows[k]

    Eu = Ui.E * d_ - Vi.E * c_
    Gu = gu(d_) * gv(-c_)
    u1 = _factored_to_series(FactoredImage(sigma, Eu, Gu), ypows)
    Ev = -Ui.E * q_bar + Vi.E * m_bar
    Gv = gu(-q_bar) * gv(m_bar)
    v1b = Gv * ypows.pow(Ev)
    beta = v1b.constant_term()
    if fld.is_zero(beta):
        raise DegenerateTranslation("translation constant beta = 0")
    v1 = v1b - TruncSeries.const(fld, names, v1b.prec, beta)
    return u1, v1, beta


def _cramer(U: TruncSeries, Vb: TruncSeries, m_bar: int, q_bar: int,
            c_: int, d_: int) -> tuple[TruncSeries, TruncSeries, Raw]:
    """Recover (u1, v1, beta) from U = u1^mb (v1+b)^c', Vb = u1^qb (v1+b)^d'."""
    ush = ShiftedSeries.from_trunc(U).require_unit_body()
    vsh = ShiftedSeries.from_trunc(Vb).require_unit_body()
    if ush.shift[1] != 0 or vsh.shift[1] != 0:
        raise ShapeError(f"Cramer inputs carry y-powers: {ush.shift}, {vsh.shift}")
    u1 = (ush**d_ * vsh**(-c_)).to_trunc()
    v1b = ush**(-q_bar) * vsh**m_bar
    if v1b.shift != (0, 0):
        raise ShapeError(f"v1 + beta has shift {v1b.shift}, expected (0, 0)")
    fld = U.field
    beta = v1b.body.constant_term()
    if fld.is_zero(beta):
        raise DegenerateTranslation("translation constant beta = 0")
    v1 = v1b.to_trunc() - TruncSeries.const(fld, U.var_names, v1b.body.prec, beta)
    return u1, v1, beta


def _verify_cramer(U, Vb, u1, v1, beta, m_bar, q_bar, c_, d_):
    """Re-substitution check of the defining monomial identities."""
    fld = U.field
    prec = min(u1.prec, v1.prec)
    vb = v1 + TruncSeries.const(fld, U.var_names, v1.prec, beta)
    lhs_u = u1**m_bar * vb**c_
    lhs_v = u1**q_bar * vb**d_
    if not lhs_u.agrees_with(U, prec):
        raise FormulaMismatch("u = u1^mb (v1+b)^c' failed re-verification")
    if not lhs_v.agrees_with(Vb, prec):
        raise FormulaMismatch("vbar = u1^qb (v1+b)^d' failed re-verification")


def _finish_step(frame, step, pred_type, pred_c1, U, Vb, upper_map, binding):
    u1, v1, beta = _cramer(U, Vb, step.m_bar, step.q_bar, step.c_, step.d_)
    if min(u1.prec, v1.prec) <= pred_c1 + 1:
        raise PrecisionExhausted(
            f"{step}: output precision {min(u1.prec, v1.prec)} cannot resolve "
            f"the predicted Jacobian exponent {pred_c1}")
    _verify_cramer(U, Vb, u1, v1, beta, step.m_bar, step.q_bar, step.c_, step.d_)
    step = replace(step, beta=beta)
    out = ExtensionFrame(frame.level + 1, frame.tier, frame.lower_names,
                         frame.upper_names, u1, v1,
                         defect=frame.defect,
                         provenance=frame.provenance + (step,))
    got_type = classify_type(out)
    if got_type != pred_type:
        raise FormulaMismatch(
            f"{step}: predicted type {pred_type}, classified {got_type}")
    try:
        got_c1 = jacobian_exponent(out)
    except Indeterminate as exc:
        # honest step outputs are separable; a vanishing determinant here
        # means the precision cannot see the exponent
        raise PrecisionExhausted(f"{step}: {exc}") from exc
    if got_c1 != pred_c1:
        raise FormulaMismatch(
            f"{step}: predicted c1 = {pred_c1}, Jacobian oracle gives {got_c1}")
    out = replace(out, ext_type=got_type, jac_exp=got_c1)
    return StepResult(out, step, pred_type, pred_c1, upper_map, binding)


# step engines ------------------------------------------------------------------


def step_type1(frame: ExtensionFrame, m: int, q: int, alpha,
               g_coeffs: tuple[tuple[int, Raw], ...] = ()) -> StepResult:
    """One Theorem-A package on a type-1 frame.

    Canonicalizes to parameters with u = xbar exactly and ybar = y - g(xbar),
    drops the pure-xbar coefficients e_i with i <= pq/m from v, substitutes,
    and Cramer-recovers the new lower parameters.  The returned upper_map
    expresses the old upper parameters in the new ones.
    """
    fld = frame.field
    p = fld.p
    if frame.ext_type != TYPE1:
        raise ShapeError(f"step_type1 needs a type-1 frame, got type {frame.ext_type}")
    if m <= 1 or gcd(m, q) != 1:
        raise ValueError(f"need m > 1 and gcd(m, q) = 1, got ({m}, {q})")
    alpha = alpha.raw if isinstance(alpha, FieldElem) else alpha
    if fld.is_zero(alpha):
        raise DegenerateTranslation("alpha must be nonzero")
    cbar = frame.jac_exp
    names = frame.upper_names
    prec = frame.prec
    u, v = frame.u_series.with_prec(prec), frame.v_series.with_prec(prec)

    # canonical coordinates: xbar = u, ybar = y - g(xbar)
    xb = TruncSeries.variable(fld, names, prec, 0)
    yb = TruncSeries.variable(fld, names, prec, 1)
    gxb = apply_poly(g_coeffs, xb) if g_coeffs else None
    trivial = u == xb and gxb is None
    if trivial:
        X, Y, v_can = xb, yb, v
    else:
        y_of_bar = yb + gxb if gxb is not None else yb
        X = invert_unit_scale(u, y_of_bar)
        Y = y_of_bar
        v_can = v.substitute(X, Y)
        if not u.substitute(X, Y).agrees_with(xb):
            raise FormulaMismatch("canonicalization did not send u to xbar")

    # shape checks in canonical coordinates
    vy_pure = v_can.pure_part(1)
    if vy_pure.is_zero() or min(b for _, b in vy_pure.terms) != p:
        raise ShapeError("canonical v is not ybar^p * unit + xbar-divisible")

    # normalization: drop e_i xbar^i for i <= pq/m
    cut = (p * q) // m
    f_pure = v_can.pure_part(0)
    dropped = TruncSeries(fld, names, prec,
                          {ab: c for ab, c in f_pure.terms.items() if 0 < ab[0] <= cut})
    v_bar = v_can - dropped

    pred_type, pred_c1 = predict_type1(p, cbar, m, q)
    a_, b_ = bezout_min_nonneg(m, q)
    Xmap, Ymap = monomial_maps(fld, names, prec, m, q, a_, b_, alpha)
    U = Xmap  # u = xbar exactly in canonical coordinates
    Vb = v_bar.substitute(Xmap, Ymap)
    if Vb.is_zero():
        raise PrecisionExhausted(
            f"image of vbar vanishes up to precision {Vb.prec} (pq = {p * q})")

    # effective lower pair from the actual value of vbar (covers case 0)
    val_v = ShiftedSeries.from_trunc(Vb).require_unit_body().shift[0]
    sigma_eff = gcd(m, val_v)
    m_bar, q_bar = m // sigma_eff, val_v // sigma_eff
    if pred_type != TYPE0 and val_v != p * q:
        raise ShapeError(f"vbar image has x-order {val_v}, expected pq = {p * q}")
    c_, d_ = bezout_min_nonneg_lower(m_bar, q_bar)
    step = TransformStep("A", p, m, q, alpha, a_, b_, gcd(m, p * q),
                         m_bar, q_bar, c_, d_, g_coeffs=tuple(g_coeffs))

    upper_map = (X.substitute(Xmap, Ymap), Y.substitute(Xmap, Ymap)) \
        if not trivial else (Xmap, Ymap)
    # the pair the substitution binds, as series in the old upper parameters
    ybind = yb - apply_poly(g_coeffs, u) if g_coeffs else yb
    return _finish_step(frame, step, pred_type, pred_c1, U, Vb, upper_map, (u, ybind))


def bezout_min_nonneg_lower(m_bar: int, q_bar: int) -> tuple[int, int]:
    """Smallest nonnegative (c', d') with m_bar*d' - q_bar*c' = 1."""
    d = 0
    while True:
        if (m_bar * d - 1) % q_bar == 0 and m_bar * d - 1 >= 0:
            return (m_bar * d - 1) // q_bar, d
        d += 1


def step_type2(frame: ExtensionFrame, m: int, q: int, alpha,
               g_coeffs: tuple[tuple[int, Raw], ...] = (),
               use_y_directly: bool = False) -> StepResult:
    """One Theorem-B package on a type-2 frame.

    Classic path re-parametrizes with ybar = vbar = v - g(u) (one series
    inversion); the y-direct variant substitutes on (x, y) unchanged and is
    valid when ord of the pure-x part of vbar exceeds q/m.
    """
    fld = frame.field
    p = fld.p
    if frame.ext_type != TYPE2:
        raise ShapeError(f"step_type2 needs a type-2 frame, got type {frame.ext_type}")
    if m < 1 or gcd(m, q) != 1:
        raise ValueError(f"need m >= 1 and gcd(m, q) = 1, got ({m}, {q})")
    alpha = alpha.raw if isinstance(alpha, FieldElem) else alpha
    if fld.is_zero(alpha):
        raise DegenerateTranslation("alpha must be nonzero")
    cbar = frame.jac_exp
    names = frame.upper_names
    prec = frame.prec
    u, v = frame.u_series.with_prec(prec), frame.v_series.with_prec(prec)

    vbar = v - apply_poly(g_coeffs, u) if g_coeffs else v
    xb = TruncSeries.variable(fld, names, prec, 0)
    yb = TruncSeries.variable(fld, names, prec, 1)

    Y = None
    if use_y_directly:
        f_pure = vbar.pure_part(0)
        fo = f_pure.order_or_none()
        eff_ord = fo if fo is not None else prec + 1
        if eff_ord * m <= q:
            raise ShapeError(
                f"y-direct path needs ord f > q/m = {q}/{m}, have ord {eff_ord}")
        u_bind = u
        binding = (xb, yb)
    else:
        Y = invert_transversal(vbar)
        u_bind = u.substitute(xb, Y)
        binding = (xb, vbar)

    sigma = gcd(p * m, q)
    preds = predict_type2(p, cbar, m)
    pred_type, pred_c1 = preds[0] if sigma == 1 else preds[1]

    a_, b_ = bezout_min_nonneg(m, q)
    Xmap, Ymap = monomial_maps(fld, names, prec, m, q, a_, b_, alpha)
    U = u_bind.substitute(Xmap, Ymap)
    Vb = vbar.substitute(Xmap, Ymap) if use_y_directly else Ymap
    if U.is_zero() or Vb.is_zero():
        raise PrecisionExhausted(
            f"substituted binding pair vanishes up to precision (pm = {p * m}, q = {q})")

    val_u = ShiftedSeries.from_trunc(U).require_unit_body().shift[0]
    val_v = ShiftedSeries.from_trunc(Vb).require_unit_body().shift[0]
    if val_u != p * m or val_v != q:
        raise ShapeError(f"image orders ({val_u}, {val_v}) != (pm, q) = ({p * m}, {q})")
    m_bar, q_bar = p * m // sigma, q // sigma
    c_, d_ = bezout_min_nonneg_lower(m_bar, q_bar)
    step = TransformStep("B", p, m, q, alpha, a_, b_, sigma, m_bar, q_bar, c_, d_,
                         use_y_directly=use_y_directly, g_coeffs=tuple(g_coeffs))

    if use_y_directly:
        upper_map = (Xmap, Ymap)
    else:
        upper_map = (Xmap, Y.substitute(Xmap, Ymap))
    return _finish_step(frame, step, pred_type, pred_c1, U, Vb, upper_map, binding)
