"""Truncated Taylor jets: exact multivariate series with a total-degree cap.

An :class:`MJet` stores the Taylor coefficients of a smooth function around a
base point, indexed by exponent multi-index, up to a total degree ``order``.
Coefficients may be exact rationals, ``Sqrt3`` field elements, or floats; all
operations are generic over the scalar.  A :class:`UJet` is the univariate
analogue used for the outer profile of a composition.

The multivariate coefficient of ``x^a t^b`` is the mixed partial divided by
``a! b!``; :func:`deriv_at_center` undoes the normalization.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .errors import DegenerateParameterError, PreconditionError, StructureError
from .scalars import Rat, factorial

__all__ = [
    "MJet",
    "UJet",
    "Phase",
    "mjet_add",
    "mjet_sub",
    "mjet_scale",
    "mjet_mul",
    "mjet_pow",
    "mjet_compose",
    "mjet_partial",
    "mjet_truncate",
    "mjet_reciprocal",
    "deriv_at_center",
    "sin_affine_jet",
    "compose_analytic",
    "series_sin",
    "series_cos",
    "series_cosh",
    "series_sinh",
    "series_exp",
    "series_arctan",
    "series_sqrt",
    "series_reciprocal",
]


class Phase(enum.Enum):
    """Carrier phase at the expansion point: a node of the sine."""

    ZERO = 0
    PI = 1


@dataclass(frozen=True)
class MJet:
    """Truncated multivariate Taylor expansion.

    coeffs maps exponent tuples (one entry per variable, total degree
    <= order) to scalars; absent entries are zero.
    """

    vars: tuple
    order: int
    coeffs: dict = field(default_factory=dict)

    def coeff(self, idx):
        return self.coeffs.get(tuple(idx), 0)

    def constant_term(self):
        return self.coeffs.get((0,) * len(self.vars), 0)

    def is_zero(self) -> bool:
        return all(not _nonzero(c) for c in self.coeffs.values())

    def var_index(self, var) -> int:
        try:
            return self.vars.index(var)
        except ValueError:
            raise StructureError(f"unknown variable {var!r}; have {self.vars}") from None

    def __repr__(self):
        terms = ", ".join(f"{e}:{c}" for e, c in sorted(self.coeffs.items()))
        return f"MJet({self.vars}, D={self.order}, {{{terms}}})"


@dataclass(frozen=True)
class UJet:
    """Univariate truncated series sum_k coeffs[k] z^k with len == order+1."""

    order: int
    coeffs: tuple

    def __post_init__(self):
        if len(self.coeffs) != self.order + 1:
            raise StructureError("UJet needs exactly order+1 coefficients")

    @staticmethod
    def from_derivatives(derivs) -> "UJet":
        """Build from the list [f(0), f'(0), ..., f^(D)(0)]."""
        return UJet(len(derivs) - 1, tuple(d / Rat(factorial(k)) if not isinstance(d, float)
                                           else d / factorial(k)
                                           for k, d in enumerate(derivs)))

    def derivative_at_zero(self, k: int):
        return self.coeffs[k] * factorial(k)


def _nonzero(c) -> bool:
    return bool(c) if not isinstance(c, float) else c != 0.0


def _check_compatible(a: MJet, b: MJet):
    if a.vars != b.vars or a.order != b.order:
        raise StructureError(
            f"incompatible jets: vars {a.vars}/{b.vars}, orders {a.order}/{b.order}")


def _clean(coeffs: dict) -> dict:
    return {e: c for e, c in coeffs.items() if _nonzero(c)}


def mjet_add(a: MJet, b: MJet) -> MJet:
    _check_compatible(a, b)
    out = dict(a.coeffs)
    for e, c in b.coeffs.items():
        prev = out.get(e)
        out[e] = c if prev is None else prev + c
    return MJet(a.vars, a.order, _clean(out))


def mjet_sub(a: MJet, b: MJet) -> MJet:
    return mjet_add(a, mjet_scale(b, -1))


def mjet_scale(a: MJet, s) -> MJet:
    if not _nonzero(s):
        return MJet(a.vars, a.order, {})
    return MJet(a.vars, a.order, {e: c * s for e, c in a.coeffs.items()})


def mjet_mul(a: MJet, b: MJet) -> MJet:
    """Truncated Cauchy product; terms of total degree > order are dropped."""
    _check_compatible(a, b)
    cap = a.order
    out: dict = {}
    bitems = [(e, sum(e), c) for e, c in b.coeffs.items()]
    bitems.sort(key=lambda t: t[1])
    for ea, ca in a.coeffs.items():
        rem = cap - sum(ea)
        if rem < 0:
            continue
        for eb, db, cb in bitems:
            if db > rem:
                break
            key = tuple(x + y for x, y in zip(ea, eb))
            prod = ca * cb
            prev = out.get(key)
            out[key] = prod if prev is None else prev + prod
    return MJet(a.vars, a.order, _clean(out))


def mjet_pow(a: MJet, n: int) -> MJet:
    if n < 0:
        raise StructureError("negative jet power")
    out = mjet_const(a.vars, a.order, 1)
    base = a
    while n:
        if n & 1:
            out = mjet_mul(out, base)
        base = mjet_mul(base, base) if n > 1 else base
        n >>= 1
    return out


def mjet_const(vars, order: int, value) -> MJet:
    if not _nonzero(value):
        return MJet(tuple(vars), order, {})
    return MJet(tuple(vars), order, {(0,) * len(vars): value})


def mjet_var(vars, order: int, var, one=1) -> MJet:
    """The jet of the displacement in a single variable."""
    vars = tuple(vars)
    idx = list(vars).index(var)
    e = tuple(1 if i == idx else 0 for i in range(len(vars)))
    return MJet(vars, order, {e: one})


def mjet_truncate(a: MJet, order: int) -> MJet:
    if order > a.order:
        raise StructureError("cannot raise truncation order")
    return MJet(a.vars, order, {e: c for e, c in a.coeffs.items() if sum(e) <= order})


def mjet_compose(f: UJet, g: MJet) -> MJet:
    """Jet of f(g) for g with zero constant term, by Horner evaluation."""
    if _nonzero(g.constant_term()):
        raise PreconditionError("composition requires zero constant term in the inner jet")
    out = mjet_const(g.vars, g.order, f.coeffs[-1])
    for k in range(len(f.coeffs) - 2, -1, -1):
        out = mjet_mul(out, g)
        if _nonzero(f.coeffs[k]):
            out = mjet_add(out, mjet_const(g.vars, g.order, f.coeffs[k]))
    return out


def compose_analytic(coeffs, g: MJet) -> MJet:
    """Jet of f(g) where coeffs are the Taylor coefficients of f at g's
    constant term; the shift is handled internally."""
    g0 = g.constant_term()
    w = mjet_sub(g, mjet_const(g.vars, g.order, g0)) if _nonzero(g0) else g
    out = mjet_const(g.vars, g.order, coeffs[-1])
    for k in range(len(coeffs) - 2, -1, -1):
        out = mjet_mul(out, w)
        if _nonzero(coeffs[k]):
            out = mjet_add(out, mjet_const(g.vars, g.order, coeffs[k]))
    return out


def mjet_partial(a: MJet, var, k: int = 1) -> MJet:
    """Formal k-fold derivative in one variable; the order drops by k."""
    i = a.var_index(var)
    if k < 0:
        raise StructureError("negative derivative order")
    if k == 0:
        return a
    new_order = a.order - k
    if new_order < 0:
        raise StructureError("derivative order exceeds truncation order")
    out = {}
    for e, c in a.coeffs.items():
        if e[i] < k:
            continue
        fall = 1
        for j in range(k):
            fall *= e[i] - j
        ne = tuple(x - k if j == i else x for j, x in enumerate(e))
        if sum(ne) <= new_order:
            out[ne] = c * fall
    return MJet(a.vars, new_order, out)


def deriv_at_center(a: MJet, idx):
    """Value of the mixed partial with exponent multi-index idx at the center."""
    idx = tuple(idx)
    c = a.coeffs.get(idx)
    if c is None:
        return 0
    scale = 1
    for e in idx:
        scale *= factorial(e)
    return c * scale


_SIN_CYCLE = (0, 1, 0, -1)  # sin^(n)(0) for n mod 4


def sin_affine_jet(alpha, m, phase: Phase, order: int, vars=("x1", "t")) -> MJet:
    """Exact jet of sin(2*alpha*(x1 + m*t)) around a node of the sine.

    The expansion point has phase 0 or pi, so every Taylor coefficient is
    rational in (alpha, m).  The first and last entries of ``vars`` are the
    x1 and t directions; any middle variables get zero exponents.
    """
    if not _nonzero(alpha):
        raise DegenerateParameterError("alpha = 0 degenerates the carrier")
    vars = tuple(vars)
    nv = len(vars)
    sign = 1 if phase is Phase.ZERO else -1
    cx = 2 * alpha
    ct = 2 * alpha * m
    coeffs = {}
    for a in range(order + 1):
        for b in range(order + 1 - a):
            s = _SIN_CYCLE[(a + b) % 4]
            if s == 0:
                continue
            val = sign * s * cx ** a * ct ** b / Rat(factorial(a) * factorial(b))
            e = [0] * nv
            e[0] = a
            e[-1] = b
            coeffs[tuple(e)] = val
    return MJet(vars, order, coeffs)


def sin_affine_jet_numeric(alpha: float, m: float, theta0: float, order: int,
                           vars=("x1", "t")) -> MJet:
    """Float jet of sin(2*alpha*(x1 + m*t)) around an arbitrary phase theta0."""
    vars = tuple(vars)
    nv = len(vars)
    cx = 2.0 * alpha
    ct = 2.0 * alpha * m
    derivs = [math.sin(theta0), math.cos(theta0), -math.sin(theta0), -math.cos(theta0)]
    coeffs = {}
    for a in range(order + 1):
        for b in range(order + 1 - a):
            val = derivs[(a + b) % 4] * cx ** a * ct ** b / (factorial(a) * factorial(b))
            if val == 0.0:
                continue
            e = [0] * nv
            e[0] = a
            e[-1] = b
            coeffs[tuple(e)] = val
    return MJet(vars, order, coeffs)


def mjet_reciprocal(g: MJet) -> MJet:
    """Jet of 1/g; the constant term must be invertible."""
    g0 = g.constant_term()
    if not _nonzero(g0):
        raise PreconditionError("reciprocal of a jet with zero constant term")
    coeffs = []
    acc = 1 / g0 if isinstance(g0, float) else Rat(1) / g0 if isinstance(g0, int) else 1 / g0
    for k in range(g.order + 1):
        coeffs.append(acc if k % 2 == 0 else -acc)
        acc = acc / g0
    # coeffs[k] = (-1)^k / g0^(k+1)
    return compose_analytic(coeffs, g)


# ---------------------------------------------------------------------------
# Univariate Taylor coefficient generators (float), for the closed-form
# profile catalog.  Each returns the coefficients of f(c + w) in w.
# ---------------------------------------------------------------------------

def series_sin(c: float, order: int):
    d = [math.sin(c), math.cos(c), -math.sin(c), -math.cos(c)]
    return [d[k % 4] / factorial(k) for k in range(order + 1)]


def series_cos(c: float, order: int):
    d = [math.cos(c), -math.sin(c), -math.cos(c), math.sin(c)]
    return [d[k % 4] / factorial(k) for k in range(order + 1)]


def series_cosh(c: float, order: int):
    d = [math.cosh(c), math.sinh(c)]
    return [d[k % 2] / factorial(k) for k in range(order + 1)]


def series_sinh(c: float, order: int):
    d = [math.sinh(c), math.cosh(c)]
    return [d[k % 2] / factorial(k) for k in range(order + 1)]


def series_exp(c: float, order: int):
    e = math.exp(c)
    return [e / factorial(k) for k in range(order + 1)]


def series_reciprocal(p, order: int):
    """Coefficients of 1/p(w) given coefficients of p(w), p(0) != 0."""
    inv0 = 1.0 / p[0]
    out = [inv0]
    for k in range(1, order + 1):
        s = 0.0
        for i in range(1, k + 1):
            if i < len(p):
                s += p[i] * out[k - i]
        out.append(-inv0 * s)
    return out


def series_arctan(c: float, order: int):
    """Coefficients of arctan(c + w): integrate 1/(1 + (c+w)^2) termwise."""
    denom = [1.0 + c * c, 2.0 * c, 1.0]
    r = series_reciprocal(denom, max(order - 1, 0))
    out = [math.atan(c)]
    for k in range(order):
        out.append(r[k] / (k + 1))
    return out


def series_sqrt(c: float, order: int):
    if c <= 0.0:
        raise PreconditionError("sqrt series needs a positive center")
    root = math.sqrt(c)
    out = [root]
    coef = root
    for k in range(1, order + 1):
        coef *= (1.5 - k) / k / c  # binomial(1/2, k) recursion
        out.append(coef)
    return out
