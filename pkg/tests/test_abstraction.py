from __future__ import annotations

import json
import random
from fractions import Fraction

import networkx as nx
import pytest

from decisive import models
from decisive.abstraction import (
    AbstractSts, Partition, build_abstraction, check_partition, initial_partition,
    pushforward_support, refine_once, to_finite_sts,
)
from decisive.analysis.qualitative import classify, decide_qualitative
from decisive.analysis.simulate import sample_rng, simulate
from decisive.analysis.sts_view import sts_view
from decisive.errors import BlockingBlock, CapExceeded
from decisive.finite_sts import FiniteSts, avoid_set
from decisive.formula import TRUE, parse_formula
from decisive.formula.qe import equivalent
from decisive.shs import parse_model

F = Fraction


def blocks_of(P, loc):
    return [b.formula for b in P.of_location(loc)]


def same_sets(found, expected, names):
    expected = [parse_formula(e, names) for e in expected]
    return len(found) == len(expected) and all(any(equivalent(f, e) for f in found) for e in expected)


# -- initial partition -----------------------------------------------------------------

def test_initial_partition_pacman(pacman):
    P = initial_partition(pacman, "pacman_B")
    assert [(b.location, b.target) for b in P.blocks] == [
        ("l0", False), ("l1", False), ("l2", True), ("l3", False), ("l4", False)]
    for b in P.blocks:
        assert equivalent(b.formula, pacman.location(b.location).invariant)


def test_initial_partition_empty_and_full_targets(ladder):
    P = initial_partition(ladder, {})
    assert len(P.blocks) == 2 and not any(b.target for b in P.blocks)
    P = initial_partition(ladder, {"l1": TRUE})
    assert [(b.location, b.target) for b in P.blocks] == [("l0", False), ("l1", True)]


def test_initial_partition_splits_on_target(half):
    H = half
    P = initial_partition(H, {"l0": parse_formula("x < 1", ["x"])})
    assert same_sets(blocks_of(P, "l0"), ["x < 1", "1 <= x & x <= 2"], ["x"])


# -- refinement ----------------------------------------------------------------------

def test_ladder_first_refinements(ladder):
    P0 = initial_partition(ladder, "goal")
    P1, changed = refine_once(ladder, P0)
    assert changed and same_sets(blocks_of(P1, "l0"), ["x < 0", "x >= 0"], ["x"])
    P2, changed = refine_once(ladder, P1)
    assert changed and same_sets(blocks_of(P2, "l0"), ["x < 0", "0 <= x & x < 1", "x >= 1"], ["x"])


def test_stable_partition_is_a_fixpoint(pacman_strong):
    A = build_abstraction(pacman_strong, "pacman_B")
    P, changed = refine_once(pacman_strong, A.partition)
    assert not changed and P.blocks == A.partition.blocks


def test_ladder_diverges_with_cap(ladder):
    with pytest.raises(CapExceeded) as err:
        build_abstraction(ladder, "goal", max_iter=10)
    exc = err.value
    assert [t["blocks"] for t in exc.trace] == list(range(2, 13))
    l0 = blocks_of(exc.partition, "l0")
    expected = ["x < 0"] + [f"{i} <= x & x < {i + 1}" for i in range(9)] + ["x >= 9"]
    assert same_sets(l0, expected, ["x"])
    d = exc.to_dict()
    assert d["block_counts"] == list(range(2, 13)) and d["max_iter"] == 10


def test_strong_pacman_abstraction(pacman_strong):
    A = build_abstraction(pacman_strong, "pacman_B", max_iter=50)
    assert len(A.blocks) == 6 and A.iterations == 2
    assert all(A.successors)


def test_single_strong_self_loop():
    H = parse_model("""
vars x;
location l { flow: x' = 1; inv: x <= 1; }
edge e { from: l; to: l; guard: x = 1; reset: map(x := 0); strong; }
init { loc: l; points{(0)}; }
""")
    A = build_abstraction(H, {})
    assert len(A.blocks) <= 2 and A.iterations <= 2


@pytest.mark.parametrize("name, target, passes", [
    ("pacman_strong", "pacman_B", None), ("half", "half", None), ("ladder", "goal", 5), ("pacman", "pacman_B", 4),
])
def test_partition_invariants_every_pass(name, target, passes):
    H = models.load(name)
    P = initial_partition(H, target)
    assert check_partition(H, P) == []
    counts = [len(P.blocks)]
    for _ in range(passes or 50):
        P, changed = refine_once(H, P)
        assert check_partition(H, P) == []
        counts.append(len(P.blocks))
        if not changed:
            break
    assert counts == sorted(counts)
    assert all(a < b for a, b in zip(counts, counts[1:-1]))


def test_check_partition_detects_overlap(pacman_strong):
    P = initial_partition(pacman_strong, "pacman_B")
    b = P.blocks[0]
    bad = Partition(P.blocks + (type(b)(b.location, parse_formula("y < 0", ["x", "y"]), 99),))
    assert any("overlapping" in m for m in check_partition(pacman_strong, bad))


# -- finite chain of the abstraction -----------------------------------------------------

def _abstract(successors, targets=(), initial=(0,)):
    from decisive.abstraction import Block
    blocks = tuple(Block("l", TRUE, i, i in targets) for i in range(len(successors)))
    return AbstractSts(Partition(blocks), tuple(frozenset(s) for s in successors), frozenset(initial), 1)


def test_to_finite_sts_small_cases():
    T = to_finite_sts(_abstract([{0, 1}, {0, 1}]))
    assert T.kernel == ((F(1, 2), F(1, 2)), (F(1, 2), F(1, 2)))
    T = to_finite_sts(_abstract([{1}, {2}, {0}]))
    assert T.kernel == ((0, 1, 0), (0, 0, 1), (1, 0, 0))
    with pytest.raises(BlockingBlock):
        to_finite_sts(_abstract([{1}, set()]))


def test_avoid_set_empty_iff_almost_sure(pacman_strong, half):
    for H, B in ((pacman_strong, "pacman_B"), (half, "half")):
        A = build_abstraction(H, B)
        empty = not avoid_set(to_finite_sts(A), A.targets)
        assert empty == (classify(A).value == "AlmostSure")


def _verdict_with(A, T: FiniteSts) -> str:
    g = nx.DiGraph()
    g.add_nodes_from(range(T.n_states))
    g.add_edges_from((i, j) for i in range(T.n_states) if i not in A.targets for j in T.successors(i))
    reach = set(A.initial_support).union(*(nx.descendants(g, b) for b in A.initial_support))
    if not reach & A.targets:
        return "Zero"
    return "PositiveNotAlmostSure" if reach & avoid_set(T, A.targets) else "AlmostSure"


@pytest.mark.parametrize("name, target", [("pacman_strong", "pacman_B"), ("half", "half"),
                                          ("pacman_strong", "pacman_empty")])
def test_verdict_invariant_under_reweighting(name, target):
    H = models.load(name)
    A = build_abstraction(H, target)
    base = classify(A).value
    assert _verdict_with(A, to_finite_sts(A)) == base
    rng = random.Random(4)
    n = len(A.blocks)
    for _ in range(20):
        w = [[F(rng.randint(1, 50), rng.randint(1, 7)) for _ in range(n)] for _ in range(n)]
        assert _verdict_with(A, to_finite_sts(A, w)) == base


# -- pushforward -------------------------------------------------------------------------

def test_pushforward_dirac(pacman_strong):
    A = build_abstraction(pacman_strong, "pacman_B")
    assert A.initial_support == {A.block_of(pacman_strong, "l0", (0, 0))}


BOX_MODEL = """
vars x, y;
location l { flow: x' = 1, y' = 0; inv: x <= 5; }
edge e { from: l; to: l; guard: x = 5; reset: map(x := 0); strong; }
init { loc: l; uniform(%s); }
target left { l: x < 1; }
"""


@pytest.mark.parametrize("box, expected", [
    ("0 <= x & x <= 2 & 0 <= y & y <= 1", {"left", "right"}),
    ("0 <= x & x <= 1 & 0 <= y & y <= 1", {"left"}),
    ("1 <= x & x <= 2 & 0 <= y & y <= 1", {"right"}),
    ("-1 <= x & x <= 0 & 0 <= y & y <= 1", {"left"}),
    ("1/2 <= x & x <= 3/2 & 0 <= y & y <= 1", {"left", "right"}),
    ("x >= 0 & y >= 0 & x + y <= 1", {"left"}),
    ("x >= 0 & y >= 0 & x + y <= 2", {"left", "right"}),
    ("x >= 1 & y >= 0 & x + y <= 2", {"right"}),
    ("x <= 1 & y >= 0 & y <= 1 & x >= 1 - y", {"left"}),
    ("x >= 3/4 & x <= 5/4 & y >= 1 & y <= 2", {"left", "right"}),
])
def test_pushforward_uniform_boxes(box, expected):
    H = parse_model(BOX_MODEL % box)
    P = initial_partition(H, "left")
    got = {"left" if P.blocks[i].target else "right" for i in pushforward_support(H, P)}
    assert got == expected


# -- one-step qualitative equivalence -------------------------------------------------------

def _states_per_block(H, A, n, seed):
    res = simulate(H, {}, horizon=40, samples=max(1, n // 20), seed=seed, keep_runs=n)
    out = {}
    for run in res.runs:
        for s in run.states:
            out.setdefault(A.block_of(H, s.location, s.valuation), []).append(s)
    return out


@pytest.mark.parametrize("name, target", [("pacman_strong", "pacman_B"), ("half", "half")])
def test_abstraction_one_step_equivalence(name, target):
    H = models.load(name)
    A = build_abstraction(H, target)
    view = sts_view(H)
    per_block = _states_per_block(H, A, 400, 8)
    for i, states in per_block.items():
        witnessed = set()
        for k, s in enumerate(states[:60]):
            rng = sample_rng(5, 1000 * i + k)
            for _ in range(40):
                t = view.sample(s, rng)
                assert A.block_of(H, t.location, t.valuation) in A.successors[i]
            for j in A.successors[i]:
                b = A.blocks[j]
                if view.probability(s, b.location, b.formula) > 0:
                    witnessed.add(j)
        assert witnessed == set(A.successors[i]), (i, A.blocks[i])


# -- export ---------------------------------------------------------------------------------

def test_json_and_dot_export(pacman_strong):
    A = build_abstraction(pacman_strong, "pacman_B")
    doc = json.loads(A.to_json())
    assert len(doc["blocks"]) == 6 and doc["iterations"] == 2
    assert [t["blocks"] for t in doc["trace"]] == [5, 6, 6]
    for blk in doc["blocks"]:
        parse_formula(blk["formula"], pacman_strong.variables)
    dot = A.to_dot()
    assert dot.startswith("digraph") and "peripheries=2" in dot and "color=\"blue\"" in dot
    assert dot.count("->") == sum(len(s) for s in A.successors)


def test_qualitative_report_exposes_abstraction(pacman_strong):
    rep = decide_qualitative(pacman_strong, "pacman_B")
    assert rep.abstraction is not None and rep.diagnostics["abstraction"]["blocks"] == 6
