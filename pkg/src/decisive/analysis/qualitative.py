"""Almost-sure and zero-probability reachability through the finite
abstraction."""

from __future__ import annotations

import networkx as nx

from decisive.abstraction import AbstractSts, build_abstraction, to_finite_sts
from decisive.analysis.report import ReachReport, Verdict
from decisive.errors import NotCycleReset
from decisive.finite_sts import avoid_set
from decisive.shs.model import HybridSystem
from decisive.shs.validate import is_cycle_reset


def classify(A: AbstractSts) -> Verdict:
    """Verdict on the block graph: reachability of targets from the initial
    support, and of the avoid set before the targets."""
    targets = A.targets
    T = to_finite_sts(A)
    g = nx.DiGraph()
    g.add_nodes_from(range(len(A.blocks)))
    for i, succ in enumerate(A.successors):
        if i not in targets:
            g.add_edges_from((i, j) for j in succ)
    reachable = set(A.initial_support)
    for b in A.initial_support:
        reachable |= nx.descendants(g, b)
    if not reachable & targets:
        return Verdict.ZERO
    if reachable & avoid_set(T, targets):
        return Verdict.POSITIVE
    return Verdict.ALMOST_SURE


def decide_qualitative(H: HybridSystem, B, max_iter: int = 50) -> ReachReport:
    """Decide whether ``P(F B)`` is 1, 0 or strictly in between.

    Refuses (``NotCycleReset``) when the system is not cycle-reset, since the
    abstraction verdict is only sound for decisive systems.
    """
    ok, witness = is_cycle_reset(H)
    if not ok:
        raise NotCycleReset(witness)
    A = build_abstraction(H, B, max_iter)
    verdict = classify(A)
    diagnostics = {
        "cycle_reset": True,
        "witness_cycle": [],
        "abstraction": {"blocks": len(A.blocks), "iterations": A.iterations},
    }
    return ReachReport(verdict, None, diagnostics, A)
