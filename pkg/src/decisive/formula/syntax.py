"""Formula syntax trees for first-order linear real arithmetic.

Atoms are kept in the normal form ``t < 0``, ``t <= 0`` or ``t = 0`` where
``t`` has coprime integer coefficients; equalities additionally have a
positive leading coefficient. Constant atoms collapse to ``TRUE``/``FALSE``
at construction time, so structural equality is meaningful.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Iterable, Mapping

from decisive.errors import MissingVariable, QuantifierPresent
from decisive.formula.terms import Number, Term, format_number, format_term

RELATIONS = ("<", "<=", "=")

_fresh_counter = itertools.count()


def fresh_name(hint: str = "v") -> str:
    """Variable name that cannot clash with user names (``$`` is not lexable)."""
    return f"${hint}{next(_fresh_counter)}"


class Formula:
    __slots__ = ()

    def free_vars(self) -> frozenset[str]:
        raise NotImplementedError

    def is_quantifier_free(self) -> bool:
        raise NotImplementedError

    def evaluate(self, valuation: Mapping[str, Number]) -> bool:
        raise NotImplementedError

    def substitute(self, bindings: Mapping[str, Term]) -> "Formula":
        raise NotImplementedError

    def atoms(self) -> Iterable["Atom"]:
        raise NotImplementedError

    def __and__(self, other: "Formula") -> "Formula":
        return conj([self, other])

    def __or__(self, other: "Formula") -> "Formula":
        return disj([self, other])

    def __invert__(self) -> "Formula":
        return neg(self)

    def __str__(self) -> str:
        return to_text(self)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {to_text(self)}>"

    def rename(self, mapping: Mapping[str, str]) -> "Formula":
        return self.substitute({k: Term.var(v) for k, v in mapping.items()})


class _Const(Formula):
    __slots__ = ("value",)

    def __init__(self, value: bool):
        self.value = value

    def free_vars(self):
        return frozenset()

    def is_quantifier_free(self):
        return True

    def evaluate(self, valuation):
        return self.value

    def substitute(self, bindings):
        return self

    def atoms(self):
        return ()

    def __eq__(self, other):
        return isinstance(other, _Const) and other.value == self.value

    def __hash__(self):
        return hash(self.value)

    def sort_key(self):
        return (0, self.value)


TRUE = _Const(True)
FALSE = _Const(False)


class Atom(Formula):
    """``term rel 0``; build through :func:`atom` to get the normal form."""

    __slots__ = ("term", "rel", "_hash")

    def __init__(self, term: Term, rel: str):
        self.term = term
        self.rel = rel
        self._hash = hash(("atom", term, rel))

    def free_vars(self):
        return self.term.variables

    def is_quantifier_free(self):
        return True

    def evaluate(self, valuation):
        try:
            v = self.term.evaluate(valuation)
        except KeyError as exc:
            raise MissingVariable(f"no value for variable {exc.args[0]!r}") from None
        if self.rel == "<":
            return v < 0
        if self.rel == "<=":
            return v <= 0
        return v == 0

    def substitute(self, bindings):
        t = self.term.substitute(bindings)
        if t is self.term:
            return self
        return atom(t, self.rel)

    def atoms(self):
        return (self,)

    def __eq__(self, other):
        return (isinstance(other, Atom) and self._hash == other._hash
                and self.rel == other.rel and self.term == other.term)

    def __hash__(self):
        return self._hash

    def sort_key(self):
        return (1, self.term.sort_key(), self.rel)


class _NAry(Formula):
    __slots__ = ("args", "_hash", "_fv")
    tag = ""

    def __init__(self, args: tuple[Formula, ...]):
        self.args = args
        self._hash = hash((self.tag, args))
        self._fv = None

    def free_vars(self):
        if self._fv is None:
            fv = frozenset()
            for a in self.args:
                fv = fv | a.free_vars()
            self._fv = fv
        return self._fv

    def is_quantifier_free(self):
        return all(a.is_quantifier_free() for a in self.args)

    def atoms(self):
        for a in self.args:
            yield from a.atoms()

    def __eq__(self, other):
        return (type(other) is type(self) and self._hash == other._hash
                and self.args == other.args)

    def __hash__(self):
        return self._hash

    def sort_key(self):
        return (2 if self.tag == "and" else 3, tuple(a.sort_key() for a in self.args))


class And(_NAry):
    __slots__ = ()
    tag = "and"

    def evaluate(self, valuation):
        return all(a.evaluate(valuation) for a in self.args)

    def substitute(self, bindings):
        return conj(a.substitute(bindings) for a in self.args)


class Or(_NAry):
    __slots__ = ()
    tag = "or"

    def evaluate(self, valuation):
        return any(a.evaluate(valuation) for a in self.args)

    def substitute(self, bindings):
        return disj(a.substitute(bindings) for a in self.args)


class Not(Formula):
    __slots__ = ("arg", "_hash")

    def __init__(self, arg: Formula):
        self.arg = arg
        self._hash = hash(("not", arg))

    def free_vars(self):
        return self.arg.free_vars()

    def is_quantifier_free(self):
        return self.arg.is_quantifier_free()

    def evaluate(self, valuation):
        return not self.arg.evaluate(valuation)

    def substitute(self, bindings):
        return neg(self.arg.substitute(bindings))

    def atoms(self):
        return self.arg.atoms()

    def __eq__(self, other):
        return isinstance(other, Not) and self.arg == other.arg

    def __hash__(self):
        return self._hash

    def sort_key(self):
        return (4, self.arg.sort_key())


class _Quant(Formula):
    __slots__ = ("var", "body", "_hash", "_fv")
    tag = ""

    def __init__(self, var: str, body: Formula):
        self.var = var
        self.body = body
        self._hash = hash((self.tag, var, body))
        self._fv = None

    def free_vars(self):
        if self._fv is None:
            self._fv = self.body.free_vars() - {self.var}
        return self._fv

    def is_quantifier_free(self):
        return False

    def evaluate(self, valuation):
        raise QuantifierPresent("evaluate() needs a quantifier-free formula")

    def atoms(self):
        return self.body.atoms()

    def substitute(self, bindings):
        bindings = {k: v for k, v in bindings.items() if k != self.var and k in self.body.free_vars()}
        if not bindings:
            return self
        incoming = frozenset().union(*(t.variables for t in bindings.values()))
        var, body = self.var, self.body
        if var in incoming:
            new = fresh_name(var.lstrip("$").rstrip("'") or "v")
            body = body.substitute({var: Term.var(new)})
            var = new
        return type(self)(var, body.substitute(bindings))

    def __eq__(self, other):
        return (type(other) is type(self) and self.var == other.var
                and self.body == other.body)

    def __hash__(self):
        return self._hash

    def sort_key(self):
        return (5 if self.tag == "E" else 6, self.var, self.body.sort_key())


class Exists(_Quant):
    __slots__ = ()
    tag = "E"


class Forall(_Quant):
    __slots__ = ()
    tag = "A"


# -- smart constructors -----------------------------------------------------

def atom(term: Term, rel: str) -> Formula:
    """Normalised atom ``term rel 0`` (or a constant when ``term`` is constant)."""
    if rel not in RELATIONS:
        raise ValueError(f"unknown relation {rel!r}")
    if term.is_constant():
        c = term.const
        return TRUE if (c < 0 if rel == "<" else c <= 0 if rel == "<=" else c == 0) else FALSE
    t, _ = term.integer_normal()
    if rel == "=" and t.coeffs[0][1] < 0:
        t = -t
    return Atom(t, rel)


def _as_term(x: Term | Number) -> Term:
    return x if isinstance(x, Term) else Term.constant(x)


def lt(a: Term | Number, b: Term | Number = 0) -> Formula:
    return atom(_as_term(a) - _as_term(b), "<")


def le(a: Term | Number, b: Term | Number = 0) -> Formula:
    return atom(_as_term(a) - _as_term(b), "<=")


def eq(a: Term | Number, b: Term | Number = 0) -> Formula:
    return atom(_as_term(a) - _as_term(b), "=")


def gt(a: Term | Number, b: Term | Number = 0) -> Formula:
    return lt(b, a)


def ge(a: Term | Number, b: Term | Number = 0) -> Formula:
    return le(b, a)


def _sorted_unique(items: Iterable[Formula]) -> tuple[Formula, ...]:
    seen = {}
    for f in items:
        seen.setdefault(f, None)
    return tuple(sorted(seen, key=lambda f: f.sort_key()))


def conj(items: Iterable[Formula]) -> Formula:
    flat: list[Formula] = []
    for f in items:
        if f is FALSE or f == FALSE:
            return FALSE
        if f == TRUE:
            continue
        if isinstance(f, And):
            flat.extend(f.args)
        else:
            flat.append(f)
    args = _sorted_unique(flat)
    if not args:
        return TRUE
    if len(args) == 1:
        return args[0]
    return And(args)


def disj(items: Iterable[Formula]) -> Formula:
    flat: list[Formula] = []
    for f in items:
        if f == TRUE:
            return TRUE
        if f == FALSE:
            continue
        if isinstance(f, Or):
            flat.extend(f.args)
        else:
            flat.append(f)
    args = _sorted_unique(flat)
    if not args:
        return FALSE
    if len(args) == 1:
        return args[0]
    return Or(args)


def neg(f: Formula) -> Formula:
    if f == TRUE:
        return FALSE
    if f == FALSE:
        return TRUE
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def implies(a: Formula, b: Formula) -> Formula:
    return disj([neg(a), b])


def exists(var: str | Iterable[str], body: Formula) -> Formula:
    names = [var] if isinstance(var, str) else list(var)
    for v in reversed(names):
        if v in body.free_vars():
            body = Exists(v, body)
    return body


def forall(var: str | Iterable[str], body: Formula) -> Formula:
    names = [var] if isinstance(var, str) else list(var)
    for v in reversed(names):
        if v in body.free_vars():
            body = Forall(v, body)
    return body


# -- printing ---------------------------------------------------------------

_FLIP = {"<": ">", "<=": ">="}


def format_atom(a: Atom) -> str:
    t = a.term
    rel = a.rel
    lhs = Term(t.coeffs)
    rhs = -t.const
    if all(c < 0 for _, c in t.coeffs):
        lhs, rhs = -lhs, -rhs
        rel = _FLIP.get(rel, rel)
    return f"{format_term(lhs)} {rel} {format_number(rhs)}"


def to_text(f: Formula, _ctx: int = 0) -> str:
    """Render in the input grammar; the output parses back to an equal formula
    modulo normalisation."""
    if f == TRUE:
        return "true"
    if f == FALSE:
        return "false"
    if isinstance(f, Atom):
        return format_atom(f)
    if isinstance(f, Or):
        s = " | ".join(to_text(a, 1) for a in f.args)
        return f"({s})" if _ctx >= 1 else s
    if isinstance(f, And):
        s = " & ".join(to_text(a, 2) for a in f.args)
        return f"({s})" if _ctx >= 2 else s
    if isinstance(f, Not):
        return "!" + to_text(f.arg, 3) if isinstance(f.arg, (Atom, _Const, _Quant)) else f"!({to_text(f.arg)})"
    if isinstance(f, _Quant):
        return f"{f.tag} {f.var} ({to_text(f.body)})"
    raise TypeError(f)


def evaluate(f: Formula, valuation: Mapping[str, Number]) -> bool:
    """Truth value of a quantifier-free formula under an exact valuation."""
    if not f.is_quantifier_free():
        raise QuantifierPresent("evaluate() needs a quantifier-free formula")
    missing = f.free_vars() - set(valuation)
    if missing:
        raise MissingVariable(f"no value for variable(s) {sorted(missing)}")
    return f.evaluate({k: v if isinstance(v, (int, Fraction)) else Fraction(v) for k, v in valuation.items()})


def substitute(f: Formula, bindings: Mapping[str, Term]) -> Formula:
    """Capture-avoiding simultaneous substitution of linear terms."""
    return f.substitute(bindings)
