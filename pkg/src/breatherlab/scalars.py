"""Exact scalar types used as jet coefficients.

Everything downstream is generic over the scalar: ``gmpy2.mpq`` (or
``fractions.Fraction`` when gmpy2 is unavailable) for exact checks, plain
``float`` for the numeric instantiation, and :class:`Sqrt3` for exact
arithmetic in the quadratic field Q(sqrt 3), which is where the closed-form
envelope lives.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

try:
    from gmpy2 import mpq as _mpq

    def Rat(numerator=0, denominator=1):
        """Exact rational; always reduced, denominator > 0."""
        return _mpq(numerator, denominator)

except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    def Rat(numerator=0, denominator=1):
        return Fraction(numerator, denominator)

RAT_ZERO = Rat(0)
RAT_ONE = Rat(1)


def rat_from_fraction(f):
    return Rat(f.numerator, f.denominator)


_FACTORIALS = [1]


def factorial(n: int):
    """Exact n!, cached."""
    while len(_FACTORIALS) <= n:
        _FACTORIALS.append(_FACTORIALS[-1] * len(_FACTORIALS))
    return _FACTORIALS[n]


def binomial(n: int, k: int):
    if k < 0 or k > n:
        return 0
    return factorial(n) // (factorial(k) * factorial(n - k))


def multinomial(n: int, parts) -> int:
    """n! / (k1! k2! ...) with sum(parts) == n."""
    out = factorial(n)
    for p in parts:
        out //= factorial(p)
    return out


@dataclass(frozen=True)
class Sqrt3:
    """Element a + b*sqrt(3) of Q(sqrt 3) with exact rational a, b.

    Supports the ring/field operations the jet engine needs.  Mixed
    arithmetic with ints and rationals coerces into the field.
    """

    a: object = RAT_ZERO
    b: object = RAT_ZERO

    @staticmethod
    def of(x) -> "Sqrt3":
        if isinstance(x, Sqrt3):
            return x
        return Sqrt3(Rat(x), RAT_ZERO)

    @staticmethod
    def root3() -> "Sqrt3":
        return Sqrt3(RAT_ZERO, RAT_ONE)

    def __add__(self, other):
        o = Sqrt3.of(other)
        return Sqrt3(self.a + o.a, self.b + o.b)

    __radd__ = __add__

    def __neg__(self):
        return Sqrt3(-self.a, -self.b)

    def __sub__(self, other):
        return self + (-Sqrt3.of(other))

    def __rsub__(self, other):
        return Sqrt3.of(other) + (-self)

    def __mul__(self, other):
        o = Sqrt3.of(other)
        return Sqrt3(self.a * o.a + 3 * self.b * o.b, self.a * o.b + self.b * o.a)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = Sqrt3.of(other)
        norm = o.a * o.a - 3 * o.b * o.b
        if norm == 0:
            raise ZeroDivisionError("division by zero in Q(sqrt 3)")
        return self * Sqrt3(o.a / norm, -o.b / norm)

    def __rtruediv__(self, other):
        return Sqrt3.of(other) / self

    def __pow__(self, n: int):
        if n < 0:
            return Sqrt3.of(1) / self ** (-n)
        out = Sqrt3.of(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        o = Sqrt3.of(other)
        return self.a == o.a and self.b == o.b

    def __hash__(self):
        return hash((self.a, self.b))

    def __bool__(self):
        return self.a != 0 or self.b != 0

    def __float__(self):
        return float(self.a) + float(self.b) * 3.0 ** 0.5

    def __repr__(self):
        return f"({self.a}+{self.b}*sqrt3)"
