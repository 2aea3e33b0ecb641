"""Exact analysis of finite Markov chains.

All probabilities are :class:`fractions.Fraction`. Bounded-step iteration
uses an integer kernel with a common denominator, so large step counts stay
cheap while remaining exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Callable, Iterable, Sequence

import networkx as nx

from decisive.errors import DimensionMismatch, SingularSystem
from decisive.formula.terms import as_fraction

StateSet = frozenset


@dataclass(frozen=True)
class FiniteSts:
    """Row-stochastic kernel with exact rational entries."""

    kernel: tuple[tuple[Fraction, ...], ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        rows = tuple(tuple(as_fraction(v) for v in row) for row in self.kernel)
        object.__setattr__(self, "kernel", rows)
        n = len(rows)
        for i, row in enumerate(rows):
            if len(row) != n:
                raise DimensionMismatch(f"row {i} has {len(row)} entries, expected {n}")
            if any(v < 0 for v in row):
                raise ValueError(f"row {i} has a negative entry")
            if sum(row) != 1:
                raise ValueError(f"row {i} sums to {sum(row)}, not 1")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != n:
                raise DimensionMismatch("one label per state is required")

    @property
    def n_states(self) -> int:
        return len(self.kernel)

    def successors(self, i: int) -> list[int]:
        return [j for j, p in enumerate(self.kernel[i]) if p > 0]

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(range(self.n_states))
        g.add_edges_from((i, j) for i in range(self.n_states) for j in self.successors(i))
        return g

    def label(self, i: int) -> str:
        return self.labels[i] if self.labels else str(i)

    def to_text(self) -> str:
        def fmt(q: Fraction) -> str:
            return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"
        return "\n".join(" ".join(fmt(v) for v in row) for row in self.kernel) + "\n"


def parse_matrix(text: str, labels: Sequence[str] | None = None) -> FiniteSts:
    """Read one row per line, entries as ``p/q`` or decimals; ``#`` comments."""
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append([Fraction(tok) for tok in line.replace(",", " ").split()])
    return FiniteSts(tuple(tuple(r) for r in rows), tuple(labels) if labels else None)


def dirac(n: int, i: int) -> tuple[Fraction, ...]:
    return tuple(Fraction(int(j == i)) for j in range(n))


def _check_dist(T: FiniteSts, mu: Sequence) -> tuple[Fraction, ...]:
    if len(mu) != T.n_states:
        raise DimensionMismatch(f"distribution has {len(mu)} entries, chain has {T.n_states} states")
    mu = tuple(as_fraction(v) for v in mu)
    if any(v < 0 for v in mu) or sum(mu) != 1:
        raise ValueError("not a probability distribution")
    return mu


def _states(T: FiniteSts, S: Iterable[int]) -> frozenset[int]:
    S = frozenset(S)
    bad = [s for s in S if not 0 <= s < T.n_states]
    if bad:
        raise DimensionMismatch(f"states {bad} out of range")
    return S


def transform(T: FiniteSts, mu: Sequence) -> tuple[Fraction, ...]:
    """One-step image of a distribution."""
    mu = _check_dist(T, mu)
    n = T.n_states
    out = [Fraction(0)] * n
    for i, m in enumerate(mu):
        if m:
            for j, p in enumerate(T.kernel[i]):
                if p:
                    out[j] += m * p
    return tuple(out)


def backward_reach(T: FiniteSts, B: Iterable[int]) -> frozenset[int]:
    B = _states(T, B)
    g = T.graph()
    seen = set(B)
    for b in B:
        seen |= nx.ancestors(g, b)
    return frozenset(seen)


def avoid_set(T: FiniteSts, B: Iterable[int]) -> frozenset[int]:
    """States from which no positive-probability path reaches ``B``."""
    return frozenset(range(T.n_states)) - backward_reach(T, B)


def is_attractor(T: FiniteSts, A: Iterable[int]) -> bool:
    return not avoid_set(T, A)


# -- exact linear algebra ---------------------------------------------------

def solve_exact(A: Sequence[Sequence], b: Sequence) -> list[Fraction]:
    """Solve ``A x = b`` exactly by fraction-free (Bareiss) elimination."""
    n = len(A)
    if any(len(row) != n for row in A) or len(b) != n:
        raise DimensionMismatch("square system expected")
    if n == 0:
        return []
    # scale each row to integers
    M: list[list[int]] = []
    for row, rhs in zip(A, b):
        vals = [as_fraction(v) for v in row] + [as_fraction(rhs)]
        d = 1
        for v in vals:
            d = lcm(d, v.denominator)
        M.append([int(v * d) for v in vals])
    prev = 1
    for k in range(n):
        pivot = next((r for r in range(k, n) if M[r][k] != 0), None)
        if pivot is None:
            raise SingularSystem("singular linear system")
        if pivot != k:
            M[k], M[pivot] = M[pivot], M[k]
        mk = M[k]
        akk = mk[k]
        for i in range(k + 1, n):
            mi = M[i]
            aik = mi[k]
            for j in range(k + 1, n + 1):
                mi[j] = (akk * mi[j] - aik * mk[j]) // prev
            mi[k] = 0
        prev = akk
    x = [Fraction(0)] * n
    for i in range(n - 1, -1, -1):
        s = Fraction(M[i][n])
        for j in range(i + 1, n):
            if M[i][j]:
                s -= M[i][j] * x[j]
        x[i] = s / M[i][i]
    return x


def reach_prob_exact(T: FiniteSts, B: Iterable[int]) -> list[Fraction]:
    """``P_s(F B)`` for every state ``s``."""
    B = _states(T, B)
    zero = avoid_set(T, B)
    unknown = [s for s in range(T.n_states) if s not in B and s not in zero]
    index = {s: k for k, s in enumerate(unknown)}
    A = []
    rhs = []
    for s in unknown:
        row = [Fraction(0)] * len(unknown)
        row[index[s]] += 1
        b = Fraction(0)
        for t, p in enumerate(T.kernel[s]):
            if not p:
                continue
            if t in B:
                b += p
            elif t in index:
                row[index[t]] -= p
        A.append(row)
        rhs.append(b)
    sol = solve_exact(A, rhs)
    out = []
    for s in range(T.n_states):
        out.append(Fraction(1) if s in B else Fraction(0) if s in zero else sol[index[s]])
    return out


# -- bounded-step scheme ----------------------------------------------------

class _ScaledChain:
    """Chain with ``B`` and ``B~`` absorbing, stored as integers over ``L``."""

    def __init__(self, T: FiniteSts, absorbing: frozenset[int]):
        n = T.n_states
        L = 1
        for row in T.kernel:
            for v in row:
                L = lcm(L, v.denominator)
        self.L = L
        self.rows = []
        for i in range(n):
            if i in absorbing:
                self.rows.append([(i, L)])
            else:
                self.rows.append([(j, int(p * L)) for j, p in enumerate(T.kernel[i]) if p])

    def step(self, v: list[int]) -> list[int]:
        out = [0] * len(v)
        for i, m in enumerate(v):
            if m:
                for j, k in self.rows[i]:
                    out[j] += m * k
        return out


def _scaled_dist(mu: Sequence[Fraction]) -> tuple[list[int], int]:
    d = 1
    for v in mu:
        d = lcm(d, v.denominator)
    return [int(v * d) for v in mu], d


def p_yes_no(T: FiniteSts, mu: Sequence, B: Iterable[int], n: int) -> tuple[Fraction, Fraction]:
    """``P(F<=n B)`` and ``P(not B U<=n B~)`` from ``mu``."""
    mu = _check_dist(T, mu)
    B = _states(T, B)
    Bt = avoid_set(T, B)
    chain = _ScaledChain(T, B | Bt)
    v, den = _scaled_dist(mu)
    for _ in range(n):
        v = chain.step(v)
        den *= chain.L
    return (Fraction(sum(v[i] for i in B), den), Fraction(sum(v[i] for i in Bt), den))


@dataclass(frozen=True)
class ProbInterval:
    lo: Fraction
    hi: Fraction
    steps_used: int
    converged: bool
    history: tuple[tuple[Fraction, Fraction], ...] = field(default=(), repr=False)

    def __post_init__(self):
        if not (0 <= self.lo <= self.hi <= 1):
            raise ValueError(f"invalid probability interval [{self.lo}, {self.hi}]")

    @property
    def width(self):
        return self.hi - self.lo

    def contains(self, p) -> bool:
        return self.lo <= p <= self.hi

    def to_dict(self) -> dict:
        return {"lo": float(self.lo), "hi": float(self.hi), "lo_exact": str(self.lo),
                "hi_exact": str(self.hi), "steps_used": self.steps_used,
                "converged": self.converged}


def approx_reach(T: FiniteSts, mu: Sequence, B: Iterable[int], eps, n_cap: int = 10**6,
                 progress: Callable[[int, Fraction, Fraction], None] | None = None,
                 keep_history: bool = False) -> ProbInterval:
    """Iterate until ``p_yes(n) + p_no(n) >= 1 - eps`` or ``n = n_cap``."""
    eps = as_fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    mu = _check_dist(T, mu)
    B = _states(T, B)
    Bt = avoid_set(T, B)
    chain = _ScaledChain(T, B | Bt)
    v, den = _scaled_dist(mu)
    history = []
    n = 0
    while True:
        yes = sum(v[i] for i in B)
        no = sum(v[i] for i in Bt)
        if keep_history:
            history.append((Fraction(yes, den), Fraction(no, den)))
        if progress is not None and n and n % 1000 == 0:
            progress(n, Fraction(yes, den), Fraction(no, den))
        done = (yes + no) >= (1 - eps) * den
        if done or n >= n_cap:
            return ProbInterval(Fraction(yes, den), 1 - Fraction(no, den), n, done, tuple(history))
        v = chain.step(v)
        den *= chain.L
        n += 1


# -- trap and criterion checkers ----------------------------------------------

def bottom_sccs(T: FiniteSts, absorbing: Iterable[int] = ()) -> list[frozenset[int]]:
    """Bottom strongly connected components, with ``absorbing`` states made
    absorbing first."""
    absorbing = frozenset(absorbing)
    g = nx.DiGraph()
    g.add_nodes_from(range(T.n_states))
    for i in range(T.n_states):
        if i not in absorbing:
            g.add_edges_from((i, j) for j in T.successors(i))
    cond = nx.condensation(g)
    return sorted((frozenset(cond.nodes[c]["members"]) for c in cond.nodes if cond.out_degree(c) == 0),
                  key=min)


@dataclass(frozen=True)
class Lemma6Report:
    hypothesis: bool
    p: Fraction | None                 # min over A of P_s(F B); None when A is empty
    probabilities: tuple[Fraction, ...]  # P_s(G !B & GF A) per state
    traps: tuple[frozenset, ...]       # bottom components avoiding B and meeting A
    conclusion_holds: bool

    def to_dict(self) -> dict:
        return {"hypothesis": self.hypothesis, "p": None if self.p is None else str(self.p),
                "probabilities": [str(v) for v in self.probabilities],
                "traps": [sorted(t) for t in self.traps],
                "conclusion_holds": self.conclusion_holds}


def check_lemma6(T: FiniteSts, A: Iterable[int], B: Iterable[int]) -> Lemma6Report:
    A = _states(T, A)
    B = _states(T, B)
    reach = reach_prob_exact(T, B)
    p = min((reach[s] for s in A), default=None)
    hypothesis = p is None or p > 0
    traps = tuple(c for c in bottom_sccs(T, B) if not (c & B) and (c & A))
    trap_states = frozenset().union(*traps) if traps else frozenset()
    probs = tuple(reach_prob_exact(T, trap_states)) if trap_states else (Fraction(0),) * T.n_states
    return Lemma6Report(hypothesis, p, probs, traps,
                        (not hypothesis) or all(v == 0 for v in probs))


@dataclass(frozen=True)
class CriterionReport:
    attractor: bool
    a_prime: frozenset
    p: Fraction | None
    hypotheses_hold: bool
    decisive: bool             # P_s(F B or F B~) = 1 for every s, computed exactly
    agreement: bool            # hypotheses imply decisiveness on this chain

    def to_dict(self) -> dict:
        return {"attractor": self.attractor, "a_prime": sorted(self.a_prime),
                "p": None if self.p is None else str(self.p),
                "hypotheses_hold": self.hypotheses_hold, "decisive": self.decisive,
                "agreement": self.agreement}

    def summary(self) -> str:
        if not self.hypotheses_hold:
            why = "A is not an attractor" if not self.attractor else "p = 0 on A'"
            return f"criterion not applicable ({why}); no claim"
        return f"criterion applies with p = {self.p}; decisiveness {'confirmed' if self.decisive else 'REFUTED'}"


def check_criterion(T: FiniteSts, A: Iterable[int], B: Iterable[int]) -> CriterionReport:
    A = _states(T, A)
    B = _states(T, B)
    Bt = avoid_set(T, B)
    a_prime = A - Bt
    attractor = is_attractor(T, A)
    reach = reach_prob_exact(T, B)
    p = min((reach[s] for s in a_prime), default=None)
    hypotheses = attractor and (p is None or p > 0)
    decisive = all(v == 1 for v in reach_prob_exact(T, B | Bt))
    return CriterionReport(attractor, a_prime, p, hypotheses, decisive,
                           (not hypotheses) or decisive)
