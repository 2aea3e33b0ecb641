"""Linear terms ``c0 + sum(ci * xi)`` with exact rational coefficients."""

from __future__ import annotations

from fractions import Fraction
from math import gcd, lcm
from typing import Iterable, Mapping, Union

Number = Union[int, Fraction]


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        # floats only come in from sampling; their binary value is exact
        return Fraction(value)
    raise TypeError(f"cannot convert {value!r} to an exact rational")


class Term:
    """Immutable linear term. Zero coefficients are never stored."""

    __slots__ = ("coeffs", "const", "_hash")

    def __init__(self, coeffs: Mapping[str, Number] | Iterable[tuple[str, Number]] = (),
                 const: Number = 0):
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        acc: dict[str, Fraction] = {}
        for name, c in items:
            acc[name] = acc.get(name, Fraction(0)) + as_fraction(c)
        self.coeffs = tuple(sorted((k, v) for k, v in acc.items() if v != 0))
        self.const = as_fraction(const)
        self._hash = hash((self.coeffs, self.const))

    @classmethod
    def var(cls, name: str, coeff: Number = 1) -> "Term":
        return cls(((name, coeff),))

    @classmethod
    def constant(cls, value: Number) -> "Term":
        return cls((), value)

    # -- structure ---------------------------------------------------------
    @property
    def variables(self) -> frozenset[str]:
        return frozenset(k for k, _ in self.coeffs)

    def coeff(self, name: str) -> Fraction:
        for k, v in self.coeffs:
            if k == name:
                return v
        return Fraction(0)

    def is_constant(self) -> bool:
        return not self.coeffs

    def without(self, name: str) -> "Term":
        return Term(tuple((k, v) for k, v in self.coeffs if k != name), self.const)

    # -- arithmetic --------------------------------------------------------
    def __add__(self, other) -> "Term":
        if not isinstance(other, Term):
            other = Term.constant(as_fraction(other))
        return Term(self.coeffs + other.coeffs, self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> "Term":
        return Term(tuple((k, -v) for k, v in self.coeffs), -self.const)

    def __sub__(self, other) -> "Term":
        if not isinstance(other, Term):
            other = Term.constant(as_fraction(other))
        return self + (-other)

    def __rsub__(self, other) -> "Term":
        return (-self) + other

    def scale(self, factor: Number) -> "Term":
        f = as_fraction(factor)
        if f == 0:
            return Term()
        return Term(tuple((k, v * f) for k, v in self.coeffs), self.const * f)

    def __mul__(self, other) -> "Term":
        if isinstance(other, Term):
            if other.is_constant():
                return self.scale(other.const)
            if self.is_constant():
                return other.scale(self.const)
            raise ValueError("product of two non-constant terms is not linear")
        return self.scale(other)

    __rmul__ = __mul__

    def substitute(self, bindings: Mapping[str, "Term"]) -> "Term":
        if not any(k in bindings for k, _ in self.coeffs):
            return self
        out = Term.constant(self.const)
        rest = []
        for k, v in self.coeffs:
            if k in bindings:
                out = out + bindings[k].scale(v)
            else:
                rest.append((k, v))
        return out + Term(rest)

    def rename(self, mapping: Mapping[str, str]) -> "Term":
        return Term(tuple((mapping.get(k, k), v) for k, v in self.coeffs), self.const)

    def evaluate(self, valuation: Mapping[str, Number]) -> Fraction:
        total = self.const
        for k, v in self.coeffs:
            total += v * valuation[k]
        return total

    def integer_normal(self) -> tuple["Term", Fraction]:
        """Return ``(t, f)`` with ``t == self * f``, ``f > 0`` and ``t`` having
        coprime integer coefficients (constant included)."""
        values = [v for _, v in self.coeffs] + [self.const]
        den = 1
        for v in values:
            den = lcm(den, v.denominator)
        nums = [int(v * den) for v in values]
        g = 0
        for n in nums:
            g = gcd(g, n)
        if g == 0:
            return self, Fraction(1)
        factor = Fraction(den, g)
        return self.scale(factor), factor

    # -- protocol ----------------------------------------------------------
    def __eq__(self, other) -> bool:
        return (isinstance(other, Term) and self._hash == other._hash
                and self.coeffs == other.coeffs and self.const == other.const)

    def __hash__(self) -> int:
        return self._hash

    def sort_key(self):
        return (self.coeffs, self.const)

    def __repr__(self) -> str:
        return f"Term({format_term(self)!r})"

    def __str__(self) -> str:
        return format_term(self)


def format_number(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def format_term(t: Term, with_const: bool = True) -> str:
    parts: list[str] = []
    for name, c in t.coeffs:
        mag = abs(c)
        body = name if mag == 1 else f"{format_number(mag)}*{name}"
        if not parts:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append(("+ " if c > 0 else "- ") + body)
    if with_const and (t.const != 0 or not parts):
        if not parts:
            parts.append(format_number(t.const))
        else:
            parts.append(("+ " if t.const > 0 else "- ") + format_number(abs(t.const)))
    return " ".join(parts)
