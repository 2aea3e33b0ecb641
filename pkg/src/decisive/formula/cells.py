"""Exact decomposition of one-variable definable sets into points and open
intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

from decisive.errors import WrongArity
from decisive.formula.qe import to_dnf
from decisive.formula.syntax import Formula, conj, disj, eq, lt
from decisive.formula.terms import Term, format_number

Endpoint = Union[Fraction, float]  # float only for +-inf


def _fmt(v: Endpoint) -> str:
    if v == math.inf:
        return "+inf"
    if v == -math.inf:
        return "-inf"
    return format_number(v)


@dataclass(frozen=True)
class CellDecomposition1D:
    """Disjoint points and maximal open intervals, both sorted."""

    points: tuple[Fraction, ...] = ()
    intervals: tuple[tuple[Endpoint, Endpoint], ...] = ()

    def contains(self, v) -> bool:
        v = Fraction(v)
        if v in self.points:
            return True
        return any(lo < v < hi for lo, hi in self.intervals)

    __contains__ = contains

    def is_empty(self) -> bool:
        return not self.points and not self.intervals

    def is_finite(self) -> bool:
        return not self.intervals

    def has_interior(self) -> bool:
        return bool(self.intervals)

    def is_bounded(self) -> bool:
        return all(math.isfinite(lo) and math.isfinite(hi) for lo, hi in self.intervals)

    def length(self) -> Endpoint:
        total: Endpoint = Fraction(0)
        for lo, hi in self.intervals:
            total = total + (hi - lo)
        return total

    def pieces(self) -> list[tuple[str, object]]:
        """Points and intervals merged in increasing order."""
        items = [(p, 0, ("point", p)) for p in self.points]
        items += [(lo, 1, ("interval", (lo, hi))) for lo, hi in self.intervals]
        items.sort(key=lambda t: (t[0], t[1]))
        return [t[2] for t in items]

    def to_formula(self, var: str) -> Formula:
        x = Term.var(var)
        parts = [eq(x, p) for p in self.points]
        for lo, hi in self.intervals:
            bounds = []
            if lo != -math.inf:
                bounds.append(lt(lo, x))
            if hi != math.inf:
                bounds.append(lt(x, hi))
            parts.append(conj(bounds))
        return disj(parts)

    def __str__(self) -> str:
        segs = [f"{{{_fmt(p)}}}" if kind == "point" else f"({_fmt(p[0])}, {_fmt(p[1])})"
                for kind, p in self.pieces()]
        return " u ".join(segs) if segs else "{}"

    def to_dict(self) -> dict:
        return {"points": [_fmt(p) for p in self.points],
                "intervals": [[_fmt(lo), _fmt(hi)] for lo, hi in self.intervals]}


def _thresholds(conjuncts: Iterable[tuple], var: str) -> list[Fraction]:
    out = set()
    for c in conjuncts:
        for a in c:
            k = a.term.coeff(var)
            out.add(-a.term.const / k)
    return sorted(out)


def _holds(conjuncts, var: str, v: Fraction) -> bool:
    env = {var: v}
    return any(all(a.evaluate(env) for a in c) for c in conjuncts)


def decompose_1d(f: Formula, var: str) -> CellDecomposition1D:
    """Exact decomposition of ``{v | f(v)}``.

    ``f`` may also be a sentence (its set is then empty or the whole line);
    any other free variable raises :class:`WrongArity`.
    """
    extra = f.free_vars() - {var}
    if extra:
        raise WrongArity(f"expected only {var!r} free, also found {sorted(extra)}")
    dnf = to_dnf(f)
    cuts = _thresholds(dnf, var)
    if not cuts:
        return CellDecomposition1D((), ((-math.inf, math.inf),) if dnf else ())
    # gaps[i] is the open interval left of cuts[i]; gaps[-1] is right of the last cut
    samples = [cuts[0] - 1] + [(a + b) / 2 for a, b in zip(cuts, cuts[1:])] + [cuts[-1] + 1]
    gap_in = [_holds(dnf, var, s) for s in samples]
    cut_in = [_holds(dnf, var, c) for c in cuts]
    edges: list[Endpoint] = [-math.inf] + cuts + [math.inf]
    points: list[Fraction] = []
    intervals: list[tuple[Endpoint, Endpoint]] = []
    start = None
    for i, inside in enumerate(gap_in):
        if inside and start is None:
            start = edges[i]
        if i == len(cuts):
            if start is not None:
                intervals.append((start, math.inf))
            break
        # at cuts[i], between gap i and gap i+1
        if start is not None:
            if cut_in[i] and gap_in[i + 1]:
                continue
            intervals.append((start, cuts[i]))
            start = None
            if cut_in[i]:
                points.append(cuts[i])
        elif cut_in[i]:
            points.append(cuts[i])
    return CellDecomposition1D(tuple(points), tuple(intervals))


class CompiledSection:
    """Fast exact sections ``{v | f(env, v)}`` for many valuations ``env``.

    The DNF of ``f`` is computed once; at a valuation each conjunct reduces to
    an interval in ``var``, and the union is put in canonical form.
    """

    def __init__(self, f: Formula, var: str):
        self.var = var
        self.conjuncts = []
        for c in to_dnf(f):
            self.conjuncts.append(tuple((a.term.coeff(var), a.term.without(var), a.rel) for a in c))

    def intervals(self, env) -> list[tuple]:
        """Per-conjunct intervals ``(lo, lo_closed, hi, hi_closed)``."""
        out = []
        for c in self.conjuncts:
            lo, lo_c, hi, hi_c = -math.inf, False, math.inf, False
            ok = True
            for k, rest, rel in c:
                r = rest.evaluate(env)
                if k == 0:
                    if not (r < 0 if rel == "<" else r <= 0 if rel == "<=" else r == 0):
                        ok = False
                        break
                    continue
                b = -r / k
                if rel == "=":
                    upper = lower = True
                    closed = True
                else:
                    upper, lower = k > 0, k < 0
                    closed = rel == "<="
                if upper and (b < hi or (b == hi and not closed)):
                    hi, hi_c = b, closed
                if lower and (b > lo or (b == lo and not closed)):
                    lo, lo_c = b, closed
                if lo > hi or (lo == hi and not (lo_c and hi_c)):
                    ok = False
                    break
            if ok:
                out.append((lo, lo_c, hi, hi_c))
        return out

    def at(self, env) -> CellDecomposition1D:
        return union_of_intervals(self.intervals(env))


def union_of_intervals(items: Iterable[tuple]) -> CellDecomposition1D:
    """Canonical form of a union of intervals ``(lo, lo_closed, hi, hi_closed)``."""
    items = sorted(items, key=lambda t: (t[0], not t[1]))
    merged: list[list] = []
    for lo, lo_c, hi, hi_c in items:
        if merged:
            m = merged[-1]
            if lo < m[2] or (lo == m[2] and (m[3] or lo_c)):
                if hi > m[2] or (hi == m[2] and hi_c):
                    m[2], m[3] = hi, hi_c
                continue
        merged.append([lo, lo_c, hi, hi_c])
    points: list[Fraction] = []
    intervals: list[tuple[Endpoint, Endpoint]] = []
    for lo, lo_c, hi, hi_c in merged:
        if lo == hi:
            points.append(lo)
            continue
        if lo_c:
            points.append(lo)
        intervals.append((lo, hi))
        if hi_c:
            points.append(hi)
    return CellDecomposition1D(tuple(points), tuple(intervals))
