"""Certified approximation of reachability probabilities through the reset
chain.

Every strong edge resets the valuation to a law that does not depend on the
source state, so a run splits into segments that start either at the
initial law or right after a strong edge. Because the non-strong edges form
an acyclic graph, a segment has at most ``b + 1`` steps, where ``b`` is the
longest non-strong path. For each segment start we compute, per step ``j``,
the probability of hitting the target at ``j``, of entering the avoid set at
``j``, and of taking strong edge ``e`` at ``j``. Bounded-step probabilities
then follow from a renewal recursion over the segment starts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np
from scipy.integrate import quad_vec

from decisive.abstraction import AbstractSts, build_abstraction, to_finite_sts
from decisive.analysis.sts_view import StepModel, _integrate_piece, _interior_point
from decisive.errors import NotCycleReset, QuadratureBudgetExceeded, QuantModeViolation
from decisive.finite_sts import ProbInterval, avoid_set
from decisive.formula.cells import CompiledSection
from decisive.formula.qe import to_dnf
from decisive.formula.syntax import Formula
from decisive.shs.model import TAU, Edge, HybridSystem, State
from decisive.shs.validate import is_cycle_reset, longest_non_strong_path


def box_bounds(region: Formula, names) -> list[tuple[Fraction, Fraction]] | None:
    """Per-variable bounds if ``region`` is a product of intervals, else ``None``."""
    dnf = to_dnf(region)
    if len(dnf) != 1:
        return None
    lo = {v: None for v in names}
    hi = {v: None for v in names}
    for a in dnf[0]:
        vs = a.term.variables
        if len(vs) != 1 or a.rel == "=":
            return None
        (v,) = vs
        if v not in lo:
            return None
        k = a.term.coeff(v)
        b = -a.term.const / k
        if k > 0:
            hi[v] = b
        else:
            lo[v] = b
    if any(lo[v] is None or hi[v] is None or not lo[v] < hi[v] for v in names):
        return None
    return [(lo[v], hi[v]) for v in names]


def check_quant_mode(H: HybridSystem) -> None:
    for e in H.edges:
        r = e.reset
        if not e.strong:
            if r.kind not in ("identity", "map"):
                raise QuantModeViolation(f"non-strong edge {e.name} must have an identity or map reset", e.name)
        elif r.kind == "map":
            if not r.is_state_independent(H.variables):
                raise QuantModeViolation(f"strong edge {e.name} has a state-dependent map", e.name)
        elif r.kind == "uniform":
            if box_bounds(r.region, H.primed_variables) is None:
                raise QuantModeViolation(f"strong edge {e.name}: uniform reset must be over a box", e.name)
        elif r.kind != "points":
            raise QuantModeViolation(f"strong edge {e.name} needs a point, map or box reset", e.name)
    if H.initial.kind == "uniform" and box_bounds(H.initial.region, H.variables) is None:
        raise QuantModeViolation("uniform initial law must be over a box", None)


@dataclass
class ResetChain:
    """Segment statistics per node (``"init"`` or a strong edge name).

    ``hit[v][j]``, ``avoid[v][j]`` and ``cont[v][e][j]`` are lower bounds
    (estimate minus certified quadrature error, clipped at zero).
    """

    nodes: list[str]
    length: int
    hit: dict = field(default_factory=dict)
    avoid: dict = field(default_factory=dict)
    cont: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    terms: int = 0
    memo: dict = field(default_factory=dict, repr=False)

    def iterate(self, eps: float, n_cap: int):
        """Yield ``(n, yes_lo, no_lo)`` for ``n = 0, 1, ...`` until ``n_cap``."""
        L = self.length
        Y = {v: [] for v in self.nodes}
        N = {v: [] for v in self.nodes}
        for n in range(n_cap + 1):
            for v in self.nodes:
                h = self.hit[v]
                a = self.avoid[v]
                y = sum(h[: min(n, L - 1) + 1])
                z = sum(a[: min(n, L - 1) + 1])
                for e, c in self.cont[v].items():
                    for j in range(1, min(n, L - 1) + 1):
                        if c[j]:
                            y += c[j] * Y[e][n - j]
                            z += c[j] * N[e][n - j]
                Y[v].append(min(y, 1.0))
                N[v].append(min(z, 1.0))
            yield n, Y["init"][n], N["init"][n]


class _SegmentSolver:
    def __init__(self, H: HybridSystem, target: Mapping[str, Formula], abstraction: AbstractSts,
                 tol: float):
        self.H = H
        self.model = StepModel(H)
        self.target = target
        self.abstraction = abstraction
        T = to_finite_sts(abstraction)
        self.avoid_blocks = avoid_set(T, abstraction.targets)
        self.strong = [e.name for e in H.edges if e.strong]
        self.L = longest_non_strong_path(H) + 2
        self.K = (2 + len(self.strong)) * self.L
        self.tol = tol
        self.memo: dict = {}
        self.terms = 0
        self.budget_used = 0.0
        self._block_sections: dict = {}

    def slot(self, kind: str, j: int, edge: str | None = None) -> int:
        if kind == "hit":
            return j
        if kind == "avoid":
            return self.L + j
        return (2 + self.strong.index(edge)) * self.L + j

    def classify(self, s: State) -> str | None:
        env = self.model.env(s.valuation)
        f = self.target.get(s.location)
        if f is not None and f.evaluate(env):
            return "hit"
        if self.abstraction.block_of(self.H, s.location, s.valuation) in self.avoid_blocks:
            return "avoid"
        return None

    def segment(self, s: State, j: int) -> tuple[np.ndarray, float]:
        """Outcome vector, and its error bound, for state ``s`` at step ``j``."""
        key = (s.location, s.valuation, j)
        if key in self.memo:
            return self.memo[key]
        vec = np.zeros(self.K)
        err = 0.0
        kind = self.classify(s)
        if kind is not None:
            vec[self.slot(kind, j)] = 1.0
            self.memo[key] = (vec, 0.0)
            return vec, 0.0
        if j + 1 >= self.L:
            raise RuntimeError(f"segment longer than the non-strong path bound at {s}")
        law, pieces = self.model.pieces(s)
        for piece in pieces:
            if not piece.edges or not piece.mass:
                continue
            mass = float(piece.mass)
            moving = []
            for e, w in piece.edges:
                if e.strong:
                    vec[self.slot("cont", j + 1, e.name)] += mass * float(w)
                    self.terms += 1
                else:
                    moving.append((e, w))
            if not moving:
                continue
            if piece.kind == "point":
                moved = self.model.after(s.location, s.valuation, piece.lo)
                for e, w in moving:
                    nxt = State(e.target, self.model.reset_deterministic(e, moved))
                    v2, e2 = self.segment(nxt, j + 1)
                    vec += mass * float(w) * v2
                    err += mass * float(w) * e2
                continue
            v2, e2 = self._integrate_moving(s, law, piece, moving, j)
            vec += v2
            err += e2
        self.memo[key] = (vec, err)
        return vec, err

    def _integrate_moving(self, s, law, piece, moving, j):
        inner_err = [0.0]
        lo, hi = piece.lo, piece.hi

        def fn(t):
            tau = Fraction(float(t))
            if not lo < tau < hi:
                tau = _interior_point(lo, hi)
            moved = self.model.after(s.location, s.valuation, tau)
            out = np.zeros(self.K)
            e_acc = 0.0
            for e, w in moving:
                nxt = State(e.target, self.model.reset_deterministic(e, moved))
                v2, e2 = self.segment(nxt, j + 1)
                out += float(w) * v2
                e_acc = max(e_acc, e2)
            inner_err[0] = max(inner_err[0], e_acc)
            return out

        # split further where the landing block changes, which is exact
        cuts = self._landing_cuts(s, moving, lo, hi)
        bounds = [lo] + cuts + [hi]
        total = np.zeros(self.K)
        total_err = 0.0
        for a, b in zip(bounds, bounds[1:]):
            sub = type(piece)(piece.kind, a, b, law.mass(a, b), piece.edges)
            val, qerr, status = _integrate_piece(law, sub, fn, self.tol)
            self.terms += 1
            if status != 0 and qerr > self.tol:
                raise QuadratureBudgetExceeded(
                    f"quadrature on ({a}, {b}) from {s} stopped with error {qerr:.3g} > {self.tol:.3g}")
            total += val
            total_err += qerr + float(sub.mass) * inner_err[0]
            self.budget_used += qerr
        return total, total_err

    def _landing_cuts(self, s, moving, lo, hi) -> list[Fraction]:
        cuts = set()
        env = self.model.env(s.valuation)
        flow = dict(zip(self.H.variables, self.H.location(s.location).flow))
        for e, _ in moving:
            terms = e.reset.resolved_terms(self.H.variables)
            landing = {v: t.substitute(flow) for v, t in zip(self.H.variables, terms)}
            formulas = [b.formula for b in self.abstraction.blocks if b.location == e.target]
            f = self.target.get(e.target)
            if f is not None:
                formulas.append(f)
            for g in formulas:
                key = (e.name, g)
                if key not in self._block_sections:
                    self._block_sections[key] = CompiledSection(g.substitute(landing), TAU)
                d = self._block_sections[key].at(env)
                cuts.update(d.points)
                for a, b in d.intervals:
                    cuts.update(x for x in (a, b) if math.isfinite(x))
        return sorted(c for c in cuts if lo < c < hi)

    # -- start laws --------------------------------------------------------
    def start_vector(self, location: str, kind: str, points=(), box=None) -> tuple[np.ndarray, float]:
        if kind == "points":
            vec = np.zeros(self.K)
            err = 0.0
            for p in points:
                v, e = self.segment(State(location, p), 0)
                vec += v / len(points)
                err += e / len(points)
            return vec, err
        return self._box_integral(location, box, ())

    def _box_integral(self, location, box, prefix) -> tuple[np.ndarray, float]:
        k = len(prefix)
        lo, hi = box[k]
        width = float(hi - lo)
        inner_err = [0.0]

        def fn(y):
            c = Fraction(float(y))
            if not lo < c < hi:
                c = (lo + hi) / 2
            point = prefix + (c,)
            if len(point) == len(box):
                v, e = self.segment(State(location, point), 0)
            else:
                v, e = self._box_integral(location, box, point)
            inner_err[0] = max(inner_err[0], e)
            return v / width

        val, qerr, info = quad_vec(fn, float(lo), float(hi), epsabs=self.tol, epsrel=0,
                                   norm="max", limit=2000, full_output=True)
        self.terms += 1
        if info.status != 0 and qerr > self.tol:
            raise QuadratureBudgetExceeded(f"box quadrature stopped with error {qerr:.3g}")
        self.budget_used += qerr
        return val, qerr + inner_err[0]


def _constant_point(H: HybridSystem, e: Edge) -> tuple[Fraction, ...]:
    return tuple(t.const for t in e.reset.resolved_terms(H.variables))


def build_reset_chain(H: HybridSystem, B, abstraction: AbstractSts, eps: float) -> tuple[ResetChain, _SegmentSolver]:
    target = H.target(B)
    strong = [e for e in H.edges if e.strong]
    nodes = ["init"] + [e.name for e in strong]
    tol = max(eps / (64.0 * len(nodes)), 1e-13)
    solver = _SegmentSolver(H, target, abstraction, tol)
    chain = ResetChain(nodes, solver.L)
    starts = {}
    init = H.initial
    if init.kind == "points":
        starts["init"] = (init.location, "points", init.points, None)
    else:
        starts["init"] = (init.location, "box", (), box_bounds(init.region, H.variables))
    for e in strong:
        r = e.reset
        if r.kind == "points":
            starts[e.name] = (e.target, "points", r.points, None)
        elif r.kind == "map":
            starts[e.name] = (e.target, "points", (_constant_point(H, e),), None)
        else:
            starts[e.name] = (e.target, "box", (), box_bounds(r.region, H.primed_variables))
    for v in nodes:
        loc, kind, pts, box = starts[v]
        vec, err = solver.start_vector(loc, kind, pts, box)
        lower = np.clip(vec - err, 0.0, 1.0)
        L = solver.L
        chain.hit[v] = [float(x) for x in lower[0:L]]
        chain.avoid[v] = [float(x) for x in lower[L:2 * L]]
        chain.cont[v] = {e.name: [float(x) for x in lower[(2 + i) * L:(3 + i) * L]]
                         for i, e in enumerate(strong)}
        chain.errors[v] = err
    chain.terms = solver.terms
    chain.memo = solver.memo
    return chain, solver


@dataclass(frozen=True)
class QuantResult:
    interval: ProbInterval
    eps: float
    history: tuple[tuple[float, float], ...]
    terms: int
    budget_used: float
    abstraction_blocks: int
    abstraction_iterations: int


def approx_quantitative(H: HybridSystem, B, eps: float = 1e-3, n_cap: int = 10_000,
                        max_iter: int = 50, abstraction: AbstractSts | None = None) -> QuantResult:
    """Certified interval ``[p_yes(n), 1 - p_no(n)]`` for ``P(F B)``."""
    ok, witness = is_cycle_reset(H)
    if not ok:
        raise NotCycleReset(witness)
    check_quant_mode(H)
    eps = float(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    abstraction = abstraction or build_abstraction(H, B, max_iter)
    chain, solver = build_reset_chain(H, B, abstraction, eps)
    history = []
    yes = no = 0.0
    n = 0
    for n, yes, no in chain.iterate(eps, n_cap):
        history.append((yes, no))
        if yes + no >= 1 - eps:
            break
    converged = yes + no >= 1 - eps
    lo = Fraction(max(0.0, min(yes, 1.0)))
    hi = Fraction(min(1.0, max(1.0 - no, 0.0)))
    if hi < lo:
        hi = lo
    iv = ProbInterval(lo, hi, n, converged)
    return QuantResult(iv, eps, tuple(history), chain.terms, solver.budget_used,
                       len(abstraction.blocks), abstraction.iterations)
