"""Quantifier elimination for linear real arithmetic.

Formulas are brought to negation normal form while being expanded into DNF;
each existential is then pushed through the disjunction and eliminated per
conjunct, equalities first (Gaussian substitution), inequalities by
Fourier-Motzkin pairing. Conjuncts are simplified eagerly: bounds on
parallel linear forms are merged and infeasible conjuncts are dropped.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import gcd
from typing import Iterable, Sequence

from decisive.errors import FreeVariablePresent, ResourceExceeded, UnknownVariable
from decisive.formula.syntax import (
    FALSE, TRUE, And, Atom, Exists, Forall, Formula, Not, Or, _Const, atom, conj, disj,
)
from decisive.formula.terms import Term

DEFAULT_ATOM_CAP = 100_000

Conj = tuple  # tuple[Atom, ...], sorted and duplicate-free
DNF = list    # list[Conj]

_cap = DEFAULT_ATOM_CAP


def set_atom_cap(cap: int) -> int:
    """Change the Fourier-Motzkin blow-up guard; returns the previous cap."""
    global _cap
    previous, _cap = _cap, int(cap)
    _clear_caches()
    return previous


def get_atom_cap() -> int:
    return _cap


# -- atoms ------------------------------------------------------------------

def negate_atom(a: Atom) -> DNF:
    t = a.term
    if a.rel == "<":
        return [(atom(-t, "<="),)]
    if a.rel == "<=":
        return [(atom(-t, "<"),)]
    return [(atom(t, "<"),), (atom(-t, "<"),)]


def _direction(a: Atom) -> tuple[tuple, Fraction, int]:
    """Split ``a.term`` as ``k * L + c`` with ``L`` a primitive integer form
    whose leading coefficient is positive."""
    coeffs = a.term.coeffs
    g = 0
    for _, c in coeffs:
        g = gcd(g, c.numerator)
    k = g if coeffs[0][1] > 0 else -g
    direction = tuple((name, c / k) for name, c in coeffs)
    return direction, a.term.const, k


def simplify_conj(atoms: Iterable[Formula]) -> Conj | None:
    """Merge bounds on parallel forms; ``None`` when trivially infeasible."""
    # per direction: [lower, upper, eq]; bounds are (value, strict)
    bounds: dict[tuple, list] = {}
    for a in atoms:
        if a is TRUE or a == TRUE:
            continue
        if a is FALSE or a == FALSE:
            return None
        direction, c, k = _direction(a)
        value = -c / k
        slot = bounds.setdefault(direction, [None, None, None])
        if a.rel == "=":
            if slot[2] is not None and slot[2] != value:
                return None
            slot[2] = value
            continue
        strict = a.rel == "<"
        if k > 0:
            cur = slot[1]
            if cur is None or value < cur[0] or (value == cur[0] and strict):
                slot[1] = (value, strict)
        else:
            cur = slot[0]
            if cur is None or value > cur[0] or (value == cur[0] and strict):
                slot[0] = (value, strict)
    out: list[Atom] = []
    for direction, (lower, upper, eqv) in bounds.items():
        form = Term(direction)
        if eqv is not None:
            if lower is not None and (eqv < lower[0] or (eqv == lower[0] and lower[1])):
                return None
            if upper is not None and (eqv > upper[0] or (eqv == upper[0] and upper[1])):
                return None
            out.append(atom(form - eqv, "="))
            continue
        if lower is not None and upper is not None:
            if lower[0] > upper[0]:
                return None
            if lower[0] == upper[0]:
                if lower[1] or upper[1]:
                    return None
                out.append(atom(form - lower[0], "="))
                continue
        if lower is not None:
            out.append(atom(-form + lower[0], "<" if lower[1] else "<="))
        if upper is not None:
            out.append(atom(form - upper[0], "<" if upper[1] else "<="))
    out.sort(key=lambda x: x.sort_key())
    return tuple(out)


# -- projection -------------------------------------------------------------

def _eliminate_from_conj(c: Conj, var: str) -> Conj | None:
    with_v = [a for a in c if a.term.coeff(var) != 0]
    if not with_v:
        return c
    rest = [a for a in c if a.term.coeff(var) == 0]
    eqs = [a for a in with_v if a.rel == "="]
    if eqs:
        pivot = min(eqs, key=lambda a: (len(a.term.coeffs), a.sort_key()))
        cv = pivot.term.coeff(var)
        solution = pivot.term.without(var).scale(-1 / cv)
        new = [atom(a.term.substitute({var: solution}), a.rel) for a in c if a is not pivot]
        return simplify_conj(new)
    lowers: list[tuple[Term, bool]] = []
    uppers: list[tuple[Term, bool]] = []
    for a in with_v:
        cv = a.term.coeff(var)
        bound = a.term.without(var).scale(-1 / cv)
        strict = a.rel == "<"
        (uppers if cv > 0 else lowers).append((bound, strict))
    new: list[Formula] = list(rest)
    for lo, ls in lowers:
        for up, us in uppers:
            new.append(atom(lo - up, "<" if (ls or us) else "<="))
    if len(new) > _cap:
        raise ResourceExceeded(len(new), _cap)
    return simplify_conj(new)


def _pick_variable(c: Conj, candidates: Iterable[str]) -> str:
    best, best_cost = None, None
    for v in sorted(candidates):
        lo = up = 0
        has_eq = False
        for a in c:
            cv = a.term.coeff(v)
            if cv == 0:
                continue
            if a.rel == "=":
                has_eq = True
            elif cv > 0:
                up += 1
            else:
                lo += 1
        cost = -1 if has_eq else lo * up - lo - up
        if best_cost is None or cost < best_cost:
            best, best_cost = v, cost
    return best


@lru_cache(maxsize=200_000)
def conj_satisfiable(c: Conj) -> bool:
    cur: Conj | None = c
    names = set()
    for a in c:
        names |= a.term.variables
    while cur and names:
        v = _pick_variable(cur, names)
        names.discard(v)
        cur = _eliminate_from_conj(cur, v)
    return cur is not None


@lru_cache(maxsize=100_000)
def project_conj(c: Conj, variables: tuple[str, ...]) -> Conj | None:
    cur: Conj | None = c
    remaining = set(variables)
    while cur is not None and remaining:
        present = remaining & frozenset().union(*(a.term.variables for a in cur)) if cur else set()
        if not present:
            break
        v = _pick_variable(cur, present)
        remaining.discard(v)
        cur = _eliminate_from_conj(cur, v)
    if cur is not None and not conj_satisfiable(cur):
        return None
    return cur


# -- DNF algebra ------------------------------------------------------------

def _prune(d: Iterable[Conj]) -> DNF:
    """Drop infeasible, duplicate and syntactically subsumed conjuncts."""
    seen: dict[Conj, None] = {}
    for c in d:
        if c is not None and conj_satisfiable(c):
            seen.setdefault(c, None)
    items = sorted(seen, key=len)
    if len(items) > 60:
        return items
    kept: list[Conj] = []
    sets: list[frozenset] = []
    for c in items:
        s = frozenset(c)
        if any(k <= s for k in sets):
            continue
        kept.append(c)
        sets.append(s)
    if () in seen:
        return [()]
    total = sum(len(c) for c in kept)
    if total > _cap:
        raise ResourceExceeded(total, _cap)
    return kept


def dnf_and(a: DNF, b: DNF) -> DNF:
    if not a or not b:
        return []
    out = []
    for x in a:
        for y in b:
            c = simplify_conj(x + y)
            if c is not None:
                out.append(c)
        if len(out) > _cap:
            raise ResourceExceeded(len(out), _cap)
    return _prune(out)


def dnf_or(a: DNF, b: DNF) -> DNF:
    return _prune(list(a) + list(b))


def dnf_not(d: DNF) -> DNF:
    result: DNF = [()]
    for c in d:
        if not c:
            return []
        alternatives: DNF = []
        for a in c:
            alternatives.extend(negate_atom(a))
        result = dnf_and(result, alternatives)
        if not result:
            return []
    return result


def dnf_exists(variables: Sequence[str], d: DNF) -> DNF:
    key = tuple(sorted(set(variables)))
    return _prune(project_conj(c, key) for c in d)


def dnf_to_formula(d: DNF) -> Formula:
    return disj(conj(c) for c in d)


@lru_cache(maxsize=50_000)
def _dnf(f: Formula, positive: bool = True) -> tuple:
    if isinstance(f, _Const):
        return ((),) if f.value == positive else ()
    if isinstance(f, Atom):
        return ((f,),) if positive else tuple(negate_atom(f))
    if isinstance(f, Not):
        return _dnf(f.arg, not positive)
    if isinstance(f, (And, Or)):
        product = isinstance(f, And) == positive
        parts = [list(_dnf(a, positive)) for a in f.args]
        parts.sort(key=len)
        if product:
            acc: DNF = [()]
            for p in parts:
                acc = dnf_and(acc, p)
                if not acc:
                    break
            return tuple(acc)
        acc = []
        for p in parts:
            acc.extend(p)
        return tuple(_prune(acc))
    if isinstance(f, Exists):
        inner = dnf_exists([f.var], list(_dnf(f.body, True)))
        return tuple(inner) if positive else tuple(dnf_not(inner))
    if isinstance(f, Forall):
        inner = dnf_exists([f.var], list(_dnf(f.body, False)))
        return tuple(dnf_not(inner)) if positive else tuple(inner)
    raise TypeError(f"not a formula: {f!r}")


def to_dnf(f: Formula) -> DNF:
    """Quantifier-free DNF (list of atom tuples) equivalent to ``f``."""
    return list(_dnf(f, True))


def _clear_caches() -> None:
    _dnf.cache_clear()
    conj_satisfiable.cache_clear()
    project_conj.cache_clear()
    eliminate_quantifiers.cache_clear()


# -- public operations ------------------------------------------------------

@lru_cache(maxsize=50_000)
def eliminate_quantifiers(f: Formula) -> Formula:
    """Equivalent quantifier-free formula (a normalised DNF)."""
    return dnf_to_formula(to_dnf(f))


def simplify(f: Formula, redundancy: bool = False) -> Formula:
    """Normalised DNF of ``f``; with ``redundancy`` atoms implied by the rest of
    their conjunct are removed (exact, one feasibility check per atom)."""
    d = to_dnf(f)
    if redundancy:
        d = [_drop_redundant(c) for c in d]
        d = _prune(d)
    return dnf_to_formula(d)


def _drop_redundant(c: Conj) -> Conj:
    atoms = list(c)
    i = 0
    while i < len(atoms):
        others = tuple(atoms[:i] + atoms[i + 1:])
        implied = True
        for alt in negate_atom(atoms[i]):
            test = simplify_conj(others + alt)
            if test is not None and conj_satisfiable(test):
                implied = False
                break
        if implied:
            atoms.pop(i)
        else:
            i += 1
    return tuple(sorted(atoms, key=lambda a: a.sort_key()))


def decide_sentence(f: Formula) -> bool:
    """Truth value over the reals of a formula without free variables."""
    free = f.free_vars()
    if free:
        raise FreeVariablePresent(f"sentence has free variables {sorted(free)}")
    return bool(to_dnf(f))


def satisfiable(f: Formula) -> bool:
    return any(conj_satisfiable(c) for c in to_dnf(f))


def valid(f: Formula) -> bool:
    return not satisfiable(Not(f))


def equivalent(f: Formula, g: Formula) -> bool:
    return not satisfiable(And((f, Not(g)))) and not satisfiable(And((g, Not(f))))


def interior_nonempty_formula(f: Formula, bound_vars: Sequence[str], strict: bool = True) -> Formula:
    """Formula over the remaining free variables stating that the section of
    ``f`` in ``bound_vars`` has non-empty interior.

    A finite union has non-empty interior iff one member does, and a convex
    polyhedron has non-empty interior iff its strict relaxation is feasible
    (an equality on a bound variable rules it out).
    """
    bound = tuple(bound_vars)
    if strict:
        unknown = set(bound) - f.free_vars()
        if unknown:
            raise UnknownVariable(f"bound variable(s) {sorted(unknown)} do not occur free")
    return dnf_to_formula(interior_dnf(to_dnf(f), bound))


def interior_dnf(d: DNF, bound: Sequence[str]) -> DNF:
    bound_set = frozenset(bound)
    out = []
    for c in d:
        relaxed = []
        ok = True
        for a in c:
            if a.term.variables & bound_set:
                if a.rel == "=":
                    ok = False
                    break
                relaxed.append(atom(a.term, "<"))
            else:
                relaxed.append(a)
        if not ok:
            continue
        rc = simplify_conj(relaxed)
        if rc is None:
            continue
        out.append(project_conj(rc, tuple(sorted(bound_set))))
    return _prune(out)
