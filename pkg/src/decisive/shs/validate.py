"""Well-formedness checks decided as first-order sentences, and the
cycle-reset test."""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx

from decisive.formula.qe import decide_sentence, interior_nonempty_formula
from decisive.formula.syntax import (
    Formula, conj, exists, forall, fresh_name, implies, le,
)
from decisive.formula.terms import Term
from decisive.shs.model import TAU, HybridSystem
from decisive.shs.semantics import total_delay_formula, to_primed


@dataclass(frozen=True)
class Diagnostic:
    check: str        # non_blocking | reset_containment | strong_flag | interior | flow_identity | initial
    subject: str      # location or edge name
    message: str
    sentence: str = ""

    def to_dict(self) -> dict:
        return {"check": self.check, "subject": self.subject, "message": self.message,
                "sentence": self.sentence}

    def __str__(self) -> str:
        tail = f"\n    falsified: {self.sentence}" if self.sentence else ""
        return f"[{self.check}] {self.subject}: {self.message}{tail}"


def _bounded(f: Formula, variables) -> Formula:
    """``f`` confines ``variables`` to some box (free variables stay free)."""
    m = fresh_name("M")
    mt = Term.var(m)
    box = conj([conj([le(-mt, Term.var(v)), le(Term.var(v), mt)]) for v in variables])
    return exists(m, forall(variables, implies(f, box)))


def validate(H: HybridSystem) -> list[Diagnostic]:
    """All violated well-formedness conditions; empty means valid."""
    out: list[Diagnostic] = []
    xs = H.variables
    ys = H.primed_variables

    def check(kind, subject, message, sentence):
        if not decide_sentence(sentence):
            out.append(Diagnostic(kind, subject, message, str(sentence)))

    for loc in H.locations:
        for v, t in zip(xs, loc.flow):
            if t.substitute({TAU: Term.constant(0)}) != Term.var(v):
                out.append(Diagnostic("flow_identity", loc.name,
                                      f"flow of {v} at delay 0 is {t.substitute({TAU: Term.constant(0)})}, not {v}"))
    if any(d.check == "flow_identity" for d in out):
        return out

    for loc in H.locations:
        inv = loc.invariant
        check("non_blocking", loc.name, "some state inside the invariant has no admissible delay",
              forall(xs, implies(inv, exists(TAU, total_delay_formula(H, loc.name)))))

    for e in H.edges:
        src = H.location(e.source).invariant
        tgt = to_primed(H, H.location(e.target).invariant)
        rel = e.reset.relation(xs)
        pre = conj([src, e.guard])
        check("reset_containment", e.name, f"reset may leave the invariant of {e.target}",
              forall(xs + ys, implies(conj([pre, rel]), tgt)))
        if e.strong and not e.reset.is_state_independent(xs):
            out.append(Diagnostic("strong_flag", e.name,
                                  "edge is flagged strong but its reset depends on the source valuation",
                                  str(rel)))
        if e.reset.kind == "uniform":
            check("interior", e.name, "uniform reset region has empty interior for some enabled state",
                  forall(xs, implies(pre, interior_nonempty_formula(rel, ys, strict=False))))
            check("interior", e.name, "uniform reset region is unbounded",
                  forall(xs, implies(pre, _bounded(rel, ys))))

    init = H.initial
    inv0 = H.location(init.location).invariant
    support = init.support_formula(xs)
    check("initial", init.location, "initial support is not contained in the invariant",
          forall(xs, implies(support, inv0)))
    if init.kind == "uniform":
        check("interior", "init", "initial region has empty interior",
              interior_nonempty_formula(support, xs, strict=False))
        check("interior", "init", "initial region is unbounded", _bounded(support, xs))
    return out


def _non_strong_graph(H: HybridSystem) -> nx.MultiDiGraph:
    g = nx.MultiDiGraph()
    g.add_nodes_from(H.location_names())
    for e in H.edges:
        if not e.strong:
            g.add_edge(e.source, e.target, key=e.name)
    return g


def is_cycle_reset(H: HybridSystem) -> tuple[bool, tuple[str, ...]]:
    """``(True, ())`` when every simple cycle has a strong edge, otherwise
    ``(False, witness)`` with a cycle of non-strong edge names."""
    try:
        cycle = nx.find_cycle(_non_strong_graph(H))
    except nx.NetworkXNoCycle:
        return True, ()
    return False, tuple(key for _, _, key in cycle)


def longest_non_strong_path(H: HybridSystem) -> int:
    """Edges on the longest path avoiding strong edges (the segment bound)."""
    g = _non_strong_graph(H)
    return nx.dag_longest_path_length(g) if g.number_of_edges() else 0
