"""Finite qualitative abstraction of an SHS by partition refinement.

Each block is a location plus a quantifier-free formula. A block is split by
a splitter block whenever the one-step positive-probability predicate
towards the splitter holds on part of the block only. At the fixpoint all
states of a block share the same set of positive-probability successor
blocks, which makes the block graph an abstraction for qualitative
questions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from decisive.errors import BlockingBlock, CapExceeded
from decisive.finite_sts import FiniteSts
from decisive.formula.qe import decide_sentence, interior_nonempty_formula, satisfiable, simplify
from decisive.formula.syntax import FALSE, Formula, conj, disj, forall, implies, neg
from decisive.shs.model import HybridSystem
from decisive.shs.semantics import one_step_positive_formula


@dataclass(frozen=True)
class Block:
    location: str
    formula: Formula
    index: int           # creation order, used for deterministic scheduling
    target: bool = False

    def __str__(self) -> str:
        return f"{self.location}: {self.formula}"

    def to_dict(self) -> dict:
        return {"location": self.location, "formula": str(self.formula), "target": self.target}


@dataclass(frozen=True)
class Partition:
    blocks: tuple[Block, ...]
    next_index: int = 0

    def of_location(self, location: str) -> list[Block]:
        return [b for b in self.blocks if b.location == location]

    def ordered(self, H: HybridSystem) -> "Partition":
        order = {name: k for k, name in enumerate(H.location_names())}
        blocks = tuple(sorted(self.blocks, key=lambda b: (order[b.location], b.index)))
        return Partition(blocks, self.next_index)

    def to_list(self) -> list[dict]:
        return [b.to_dict() for b in self.blocks]


def _norm(f: Formula) -> Formula:
    return simplify(f, redundancy=True)


def initial_partition(H: HybridSystem, B: Mapping[str, Formula]) -> Partition:
    """Per location: ``Inv & B`` (target) and ``Inv & !B``; empty blocks dropped."""
    target = H.target(B)
    blocks = []
    k = 0
    for loc in H.locations:
        b = target.get(loc.name, FALSE)
        for phi, is_target in ((conj([loc.invariant, b]), True), (conj([loc.invariant, neg(b)]), False)):
            if satisfiable(phi):
                blocks.append(Block(loc.name, _norm(phi), k, is_target))
                k += 1
    return Partition(tuple(blocks), k).ordered(H)


def refine_once(H: HybridSystem, P: Partition) -> tuple[Partition, bool]:
    """Split every block by every block of ``P`` (splitters snapshotted
    first). Returns the refined partition and whether anything changed."""
    splitters = list(P.blocks)
    result: list[Block] = []
    tail: list[Block] = []
    next_index = P.next_index
    changed = False
    for block in P.blocks:
        fragments = [block]
        for sp in splitters:
            pre = one_step_positive_formula(H, block.location, sp.location, sp.formula)
            new_fragments = []
            for frag in fragments:
                inside = conj([frag.formula, pre])
                outside = conj([frag.formula, neg(pre)])
                if satisfiable(inside) and satisfiable(outside):
                    changed = True
                    new_fragments.append(Block(frag.location, _norm(inside), frag.index, frag.target))
                    new_fragments.append(Block(frag.location, _norm(outside), next_index, frag.target))
                    next_index += 1
                else:
                    new_fragments.append(frag)
            fragments = new_fragments
        result.append(fragments[0])
        tail.extend(fragments[1:])
    return Partition(tuple(result + tail), next_index).ordered(H), changed


def _trace_entry(iteration: int, P: Partition, changed: bool) -> dict:
    return {"iteration": iteration, "blocks": len(P.blocks), "changed": changed,
            "partition": P.to_list()}


@dataclass(frozen=True)
class AbstractSts:
    partition: Partition
    successors: tuple[frozenset[int], ...]
    initial_support: frozenset[int]
    iterations: int
    trace: tuple[dict, ...] = field(default=(), repr=False)

    @property
    def blocks(self) -> tuple[Block, ...]:
        return self.partition.blocks

    @property
    def targets(self) -> frozenset[int]:
        return frozenset(i for i, b in enumerate(self.blocks) if b.target)

    def matrix(self) -> list[list[bool]]:
        n = len(self.blocks)
        return [[j in self.successors[i] for j in range(n)] for i in range(n)]

    def block_of(self, H: HybridSystem, location: str, valuation) -> int:
        env = dict(zip(H.variables, valuation))
        for i, b in enumerate(self.blocks):
            if b.location == location and b.formula.evaluate(env):
                return i
        raise ValueError(f"no block contains ({location}, {tuple(valuation)})")

    def to_dict(self) -> dict:
        return {"blocks": [dict(b.to_dict(), id=i, initial=i in self.initial_support,
                                successors=sorted(self.successors[i]))
                           for i, b in enumerate(self.blocks)],
                "iterations": self.iterations, "trace": list(self.trace)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_dot(self) -> str:
        lines = ["digraph abstraction {", "  rankdir=LR;"]
        for i, b in enumerate(self.blocks):
            attrs = [f'label="{b.location}\\n{_dot_escape(str(b.formula))}"']
            if b.target:
                attrs.append("peripheries=2")
            if i in self.initial_support:
                attrs.append('style=bold color="blue"')
            lines.append(f"  b{i} [{', '.join(attrs)}];")
        for i, succ in enumerate(self.successors):
            for j in sorted(succ):
                lines.append(f"  b{i} -> b{j};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def pushforward_support(H: HybridSystem, P: Partition) -> frozenset[int]:
    """Indices of blocks receiving positive initial probability."""
    init = H.initial
    out = set()
    for i, b in enumerate(P.blocks):
        if b.location != init.location:
            continue
        if init.kind == "points":
            if any(b.formula.evaluate(dict(zip(H.variables, p))) for p in init.points):
                out.add(i)
        elif decide_sentence(interior_nonempty_formula(conj([init.region, b.formula]),
                                                       H.variables, strict=False)):
            out.add(i)
    return frozenset(out)


def abstract_successors(H: HybridSystem, P: Partition) -> tuple[frozenset[int], ...]:
    succ = []
    for b in P.blocks:
        row = set()
        for j, q in enumerate(P.blocks):
            pre = one_step_positive_formula(H, b.location, q.location, q.formula)
            if satisfiable(conj([b.formula, pre])):
                row.add(j)
        succ.append(frozenset(row))
    return tuple(succ)


def build_abstraction(H: HybridSystem, B, max_iter: int = 50) -> AbstractSts:
    """Refine to a fixpoint; raise :class:`CapExceeded` (with the partial
    partition and trace) if the last permitted pass still split a block."""
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    P = initial_partition(H, B)
    trace = [_trace_entry(0, P, True)]
    for it in range(1, max_iter + 1):
        P, changed = refine_once(H, P)
        trace.append(_trace_entry(it, P, changed))
        if not changed:
            return AbstractSts(P, abstract_successors(H, P), pushforward_support(H, P), it, tuple(trace))
    raise CapExceeded(P, trace, max_iter)


def check_partition(H: HybridSystem, P: Partition) -> list[str]:
    """Violated partition invariants (disjointness, coverage, non-emptiness)."""
    problems = []
    xs = H.variables
    for loc in H.locations:
        blocks = P.of_location(loc.name)
        for b in blocks:
            if not satisfiable(b.formula):
                problems.append(f"empty block {b}")
        for i, a in enumerate(blocks):
            for b in blocks[i + 1:]:
                if satisfiable(conj([a.formula, b.formula])):
                    problems.append(f"overlapping blocks {a} and {b}")
        cover = disj(b.formula for b in blocks)
        if not decide_sentence(forall(xs, conj([implies(loc.invariant, cover), implies(cover, loc.invariant)]))):
            problems.append(f"blocks of {loc.name} do not cover its invariant")
    return problems


def to_finite_sts(A: AbstractSts, weights: Sequence[Sequence[Fraction]] | None = None) -> FiniteSts:
    """Chain over blocks, uniform (or ``weights``-proportional) on positive
    successors. Only its support is meaningful."""
    n = len(A.blocks)
    rows = []
    for i in range(n):
        succ = sorted(A.successors[i])
        if not succ:
            raise BlockingBlock(f"block {A.blocks[i]} has no positive successor")
        w = [Fraction(weights[i][j]) if weights else Fraction(1) for j in succ]
        total = sum(w)
        row = [Fraction(0)] * n
        for j, wj in zip(succ, w):
            row[j] = wj / total
        rows.append(tuple(row))
    return FiniteSts(tuple(rows), tuple(f"b{i}" for i in range(n)))
