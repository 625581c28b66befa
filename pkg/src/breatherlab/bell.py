"""Partial Bell polynomials and the node constants of the carrier algebra.

``bell_eval`` and ``bell_index_sequences`` implement the combinatorial
polynomials B_{n,k} over derivative vectors.  The ``node_*`` functions give
the exact constants that appear when derivatives of powers of the carrier
sine and its time derivative are evaluated at a node (a point where the sine
vanishes): there everything collapses onto powers of the first derivatives,
with a computable rational prefactor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DegenerateParameterError, PreconditionError, StructureError
from .jets import (
    MJet,
    Phase,
    deriv_at_center,
    mjet_add,
    mjet_const,
    mjet_mul,
    mjet_partial,
    mjet_pow,
    mjet_scale,
    mjet_truncate,
    sin_affine_jet,
)
from .scalars import Rat, binomial, factorial, multinomial

__all__ = [
    "IndexSeq",
    "PDerivTable",
    "bell_index_sequences",
    "bell_eval",
    "bell_polynomial_terms",
    "faa_di_bruno",
    "node_time_constant",
    "node_product_constant",
    "node_bell_xderiv_constant",
    "envelope_bell_coefficient",
]


@dataclass(frozen=True)
class IndexSeq:
    """Exponent sequence (j_1, ..., j_{n-k+1}) with sum j_i = k and
    sum i*j_i = n."""

    entries: tuple
    n: int
    k: int

    def __post_init__(self):
        if sum(self.entries) != self.k or \
                sum(i * j for i, j in enumerate(self.entries, start=1)) != self.n:
            raise StructureError(f"invalid index sequence {self.entries} for (n,k)=({self.n},{self.k})")


@dataclass(frozen=True)
class PDerivTable:
    """Partial derivatives of the envelope at a fixed point.

    entries maps spatial multi-indices (a_1, ..., a_N) to scalars; the
    zero index (the envelope value itself) must be present.
    """

    dims: int
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        if (0,) * self.dims not in self.entries:
            raise StructureError("envelope table must contain the value at index 0")

    def value(self, idx):
        idx = tuple(idx)
        if len(idx) != self.dims:
            raise StructureError(f"index {idx} has wrong arity for N={self.dims}")
        try:
            return self.entries[idx]
        except KeyError:
            raise StructureError(f"missing envelope derivative {idx}") from None

    def d1(self, k: int):
        """Pure x1-derivative of order k."""
        return self.value((k,) + (0,) * (self.dims - 1))

    def to_jet(self, vars, order: int, zero=Rat(0)) -> MJet:
        """Taylor jet of the envelope around the table's base point."""
        if len(vars) < self.dims:
            raise StructureError("not enough jet variables for the envelope dims")
        coeffs = {}
        for e in _multi_indices(self.dims, order):
            v = self.value(e)
            if v == zero or (isinstance(v, float) and v == 0.0):
                continue
            scale = 1
            for x in e:
                scale *= factorial(x)
            # spatial variables come first in the jet variable tuple
            full = e + (0,) * (len(vars) - self.dims)
            coeffs[full] = v / Rat(scale) if not isinstance(v, float) else v / scale
        return MJet(tuple(vars), order, coeffs)


def _multi_indices(dims: int, order: int):
    if dims == 0:
        yield ()
        return
    for head in range(order + 1):
        for tail in _multi_indices(dims - 1, order - head):
            yield (head,) + tail


def bell_index_sequences(n: int, k: int) -> list:
    """All admissible sequences for B_{n,k}, in lexicographic order."""
    if n < 1 or k < 1 or k > n:
        raise StructureError(f"need 1 <= k <= n, got (n,k)=({n},{k})")
    length = n - k + 1
    out = []

    def descend(pos: int, prefix: list, count: int, weight: int):
        if pos == length:
            if count == k and weight == n:
                out.append(IndexSeq(tuple(prefix), n, k))
            return
        i = pos + 1
        for j in range(min(k - count, (n - weight) // i) + 1):
            nc, nw = count + j, weight + i * j
            # every remaining count unit sits at a position of index >= i+1
            if pos + 1 < length and (k - nc) * (i + 1) > n - nw:
                continue
            if pos + 1 == length and (nc != k or nw != n):
                continue
            descend(pos + 1, prefix + [j], nc, nw)

    descend(0, [], 0, 0)
    return out


def bell_eval(n: int, k: int, xs):
    """Exact value of B_{n,k}(x_1, ..., x_{n-k+1}).

    B_{n,0} is 0 for n >= 1 (and 1 for n = 0); otherwise the sum over all
    admissible index sequences of n!/(j_1!...j_{n-k+1}!) prod (x_a/a!)^{j_a}.
    Homogeneous of degree k in xs.
    """
    if k == 0:
        return Rat(1) if n == 0 else Rat(0)
    if len(xs) != n - k + 1:
        raise StructureError(f"B_({n},{k}) needs {n - k + 1} arguments, got {len(xs)}")
    total = Rat(0)
    for seq in bell_index_sequences(n, k):
        term = Rat(factorial(n))
        for a, j in enumerate(seq.entries, start=1):
            if j == 0:
                continue
            term = term / Rat(factorial(j))
            term = term * (xs[a - 1] / Rat(factorial(a))) ** j
        total = total + term
    return total


def bell_polynomial_terms(n: int, k: int):
    """Integer-coefficient monomial list [(coeff, powers)] for B_{n,k},
    powers being the exponent tuple on (x_1, ..., x_{n-k+1})."""
    out = []
    for seq in bell_index_sequences(n, k):
        denom = 1
        for a, j in enumerate(seq.entries, start=1):
            denom *= factorial(j) * factorial(a) ** j
        coeff = factorial(n) // denom
        out.append((coeff, seq.entries))
    return out


def faa_di_bruno(f_derivs, ell: int, g: MJet, var, n: int):
    """n-th derivative in ``var`` of (the ell-th derivative of f) composed
    with g, evaluated at the center, via the Bell polynomial sum.

    f_derivs[i] is the i-th derivative of f at 0; g must have zero constant
    term so the composition is anchored at 0.
    """
    if n < 1:
        raise StructureError("need n >= 1")
    if g.constant_term() != 0 and not (isinstance(g.constant_term(), float)
                                       and g.constant_term() == 0.0):
        raise PreconditionError("inner jet must vanish at the center")
    i = g.var_index(var)
    gder = []
    for v in range(1, n + 1):
        idx = tuple(v if j == i else 0 for j in range(len(g.vars)))
        gder.append(deriv_at_center(g, idx))
    if len(f_derivs) <= ell + n:
        raise StructureError("not enough outer derivatives supplied")
    total = 0
    for k in range(1, n + 1):
        total = total + f_derivs[ell + k] * bell_eval(n, k, gder[: n - k + 1])
    return total


def node_time_constant(n: int, k: int, alpha, m):
    """Constant relating B_{n,k} of the carrier's time-derivative vector at a
    node to (d/dt s)^k.  Vanishes whenever n - k is odd."""
    if k == 0:
        return Rat(1) if n == 0 else Rat(0)
    if k > n:
        raise StructureError(f"need k <= n, got (n,k)=({n},{k})")
    if (n - k) % 2 == 1:
        return Rat(0)
    total = Rat(0)
    for seq in bell_index_sequences(n, k):
        if any(j != 0 for a, j in enumerate(seq.entries, start=1) if a % 2 == 0):
            continue
        term = Rat(factorial(n))
        for a, j in enumerate(seq.entries, start=1):
            if j:
                term = term / Rat(factorial(j) * factorial(a) ** j)
        total = total + term
    sign = -1 if ((n - k) // 2) % 2 else 1
    return sign * (2 * alpha * m) ** (n - k) * total


def _compositions(total: int, parts: int, parity: int):
    """Tuples of ``parts`` nonnegative integers of the given parity (0 even,
    1 odd) summing to ``total``."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    start = parity
    for first in range(start, total + 1, 2):
        for rest in _compositions(total - first, parts - 1, parity):
            yield (first,) + rest


def node_product_constant(a: int, b: int, h: int, alpha):
    """Constant relating the h-th x1-derivative of s^a (d/dt s)^b at a node
    to (d/dx1 s)^a (d/dt s)^b.

    Zero when a > h or a and h differ in parity; otherwise
    (-1)^((h-a)/2) (2 alpha)^(h-a) times a sum of multinomials over odd/even
    compositions.
    """
    if a < 0 or b < 0 or h < 0:
        raise StructureError("indices must be nonnegative")
    if a > h or (h - a) % 2 == 1:
        return Rat(0)
    total = 0
    for g in range(a, h + 1):
        for cs in _compositions(g, a, 1):
            for ds in _compositions(h - g, b, 0):
                total += multinomial(h, cs + ds)
    if total == 0:
        return Rat(0)
    sign = -1 if ((h - a) // 2) % 2 else 1
    return sign * (2 * alpha) ** (h - a) * Rat(total)


def node_bell_xderiv_constant(n: int, k: int, h: int, alpha, m):
    """Constant relating the h-th x1-derivative of B_{n,k} (over the
    carrier's time-derivative vector) at a node to (d/dt s)^k.

    No closed form is used: the value is produced by the jet engine and obeys
    the parity vanishing laws (zero when n is even and k, h differ in parity;
    zero when n is odd and k, h share parity).
    """
    if not (1 <= k <= n) or h < 0:
        raise StructureError(f"need 1 <= k <= n and h >= 0, got ({n},{k},{h})")
    if m == 0:
        raise DegenerateParameterError("m = 0 makes the normalizing power vanish")
    base = h + (n - k + 1)
    s = sin_affine_jet(Rat(alpha), Rat(m), Phase.ZERO, base)
    args = [mjet_truncate(mjet_partial(s, "t", a), h) for a in range(1, n - k + 2)]
    acc = mjet_const(args[0].vars, h, Rat(0))
    for seq in bell_index_sequences(n, k):
        term = mjet_const(args[0].vars, h, Rat(factorial(n)))
        for a, j in enumerate(seq.entries, start=1):
            if j == 0:
                continue
            term = mjet_scale(term, Rat(1, factorial(j) * factorial(a) ** j))
            term = mjet_mul(term, mjet_pow(args[a - 1], j))
        acc = mjet_add(acc, term)
    value = mjet_partial(acc, "x1", h).constant_term()
    return value / (2 * Rat(alpha) * Rat(m)) ** k


def envelope_bell_coefficient(n: int, k: int, p: PDerivTable, alpha):
    """Exact coefficient C such that B_{n,k} of the x1-derivative vector of
    envelope*carrier at a node equals C * (d/dx1 s)^k.

    C is the Bell polynomial of the odd-slot binomial contractions of the
    envelope's x1-derivatives.
    """
    if not (1 <= k <= n):
        raise StructureError(f"need 1 <= k <= n, got ({n},{k})")
    ws = []
    for a in range(1, n - k + 2):
        w = Rat(0)
        for ell in range((a - 1) // 2 + 1):
            sign = -1 if ell % 2 else 1
            w = w + sign * binomial(a, 2 * ell + 1) * (2 * alpha) ** (2 * ell) \
                * p.d1(a - (2 * ell + 1))
        ws.append(w)
    return bell_eval(n, k, ws)
