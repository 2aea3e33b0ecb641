"""Symbolic semantics: delay sets, enabledness and the one-step
positive-probability predicate."""

from __future__ import annotations

from dataclasses import dataclass

from decisive.errors import EdgeLocationMismatch
from decisive.formula.cells import CellDecomposition1D, decompose_1d
from decisive.formula.qe import eliminate_quantifiers, interior_nonempty_formula
from decisive.formula.syntax import (
    FALSE, Formula, conj, disj, exists, forall, fresh_name, implies, le, neg,
)
from decisive.formula.terms import Term
from decisive.shs.model import TAU, Edge, HybridSystem, State, primed


def _cached(H: HybridSystem, key, compute):
    cache = H._cache
    if key not in cache:
        cache[key] = compute()
    return cache[key]


def flow_bindings(H: HybridSystem, location: str, tau: str = TAU) -> dict[str, Term]:
    loc = H.location(location)
    sub = {TAU: Term.var(tau)} if tau != TAU else {}
    return {v: t.substitute(sub) for v, t in zip(H.variables, loc.flow)}


def flow_at(H: HybridSystem, location: str, valuation, tau) -> tuple:
    """Exact valuation after letting ``tau`` time units elapse."""
    env = dict(zip(H.variables, valuation))
    env[TAU] = tau
    return tuple(t.evaluate(env) for t in H.location(location).flow)


def to_primed(H: HybridSystem, f: Formula) -> Formula:
    return f.rename({v: primed(v) for v in H.variables})


def delay_ok_formula(H: HybridSystem, location: str) -> Formula:
    """``tau >= 0`` and the invariant holds all along ``[0, tau]``."""
    def compute():
        inv = H.location(location).invariant
        s = fresh_name("s")
        along = inv.substitute(flow_bindings(H, location, s))
        sv, tv = Term.var(s), Term.var(TAU)
        body = forall(s, implies(conj([le(0, sv), le(sv, tv)]), along))
        return eliminate_quantifiers(conj([le(0, tv), body]))
    return _cached(H, ("delay_ok", location), compute)


def enabled_formula(H: HybridSystem, e: Edge) -> Formula:
    """Inv(source) & guard & some reset target satisfies Inv(target)."""
    def compute():
        src = H.location(e.source).invariant
        tgt = to_primed(H, H.location(e.target).invariant)
        landing = exists(H.primed_variables, conj([e.reset.relation(H.variables), tgt]))
        return eliminate_quantifiers(conj([src, e.guard, landing]))
    return _cached(H, ("enabled", e.name), compute)


def _after_delay(H: HybridSystem, location: str, f: Formula) -> Formula:
    return f.substitute(flow_bindings(H, location))


def delay_set_formula(H: HybridSystem, location: str, e: Edge | str, tau: str = TAU) -> Formula:
    """Formula over the variables and ``tau`` describing the delays after which
    ``e`` may be taken from ``location``."""
    edge = H.edge(e) if isinstance(e, str) else e
    if edge.source != location:
        raise EdgeLocationMismatch(f"edge {edge.name} leaves {edge.source}, not {location}")

    def compute():
        f = conj([delay_ok_formula(H, location),
                  _after_delay(H, location, enabled_formula(H, edge))])
        return eliminate_quantifiers(f)
    f = _cached(H, ("delay_set", location, edge.name), compute)
    return f if tau == TAU else f.rename({TAU: tau})


def total_delay_formula(H: HybridSystem, location: str) -> Formula:
    return _cached(H, ("delay_total", location), lambda: eliminate_quantifiers(
        disj(delay_set_formula(H, location, e) for e in H.outgoing(location))))


@dataclass(frozen=True)
class DelaySets:
    total: CellDecomposition1D
    per_edge: dict

    def __str__(self) -> str:
        return str(self.total)


def _at_state(H: HybridSystem, f: Formula, s: State) -> Formula:
    return f.substitute({v: Term.constant(c) for v, c in zip(H.variables, s.valuation)})


def delay_set(H: HybridSystem, s: State) -> DelaySets:
    per_edge = {}
    for e in H.outgoing(s.location):
        per_edge[e.name] = decompose_1d(_at_state(H, delay_set_formula(H, s.location, e), s), TAU)
    total = decompose_1d(_at_state(H, total_delay_formula(H, s.location), s), TAU)
    return DelaySets(total, per_edge)


def enabled_edges(H: HybridSystem, s: State) -> list[Edge]:
    env = s.env(H.variables)
    return [e for e in H.outgoing(s.location) if enabled_formula(H, e).evaluate(env)]


def posreset_formula(H: HybridSystem, e: Edge, Q: Formula) -> Formula:
    """Over source variables: the reset of ``e`` lands in ``Q`` (given over the
    unprimed variables) with positive probability."""
    def compute():
        body = conj([e.reset.relation(H.variables), to_primed(H, Q)])
        if e.reset.kind == "uniform":
            return interior_nonempty_formula(body, H.primed_variables, strict=False)
        return eliminate_quantifiers(exists(H.primed_variables, body))
    return _cached(H, ("posreset", e.name, Q), compute)


def hit_formula(H: HybridSystem, e: Edge, Q: Formula) -> Formula:
    return eliminate_quantifiers(conj([enabled_formula(H, e), posreset_formula(H, e, Q)]))


def one_step_positive_formula(H: HybridSystem, location: str, target: str, Q: Formula) -> Formula:
    """Quantifier-free ``Pre+`` over the variables: one mixed transition from
    ``(location, x)`` lands in ``{target} x [[Q]]`` with positive probability."""
    def compute():
        edges = [e for e in H.outgoing(location) if e.target == target]
        if not edges:
            return FALSE
        hit = disj(hit_formula(H, e, Q) for e in edges)
        T = eliminate_quantifiers(conj([delay_ok_formula(H, location), _after_delay(H, location, hit)]))
        I = total_delay_formula(H, location)
        int_I = interior_nonempty_formula(I, [TAU], strict=False)
        int_T = interior_nonempty_formula(T, [TAU], strict=False)
        some_T = eliminate_quantifiers(exists(TAU, T))
        return eliminate_quantifiers(disj([conj([neg(int_I), some_T]), conj([int_I, int_T])]))
    return _cached(H, ("pre+", location, target, Q), compute)
