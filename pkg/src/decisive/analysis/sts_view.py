"""The SHS seen as a transition system on concrete states: delay laws, edge
choice and resets, exposed as a one-step sampler and a one-step evaluator."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.integrate import quad_vec

from decisive.errors import BlockedState
from decisive.formula.cells import CellDecomposition1D, CompiledSection
from decisive.formula.qe import eliminate_quantifiers
from decisive.formula.syntax import Formula, conj, exists
from decisive.formula.terms import Term
from decisive.shs.model import TAU, Edge, HybridSystem, State
from decisive.shs.semantics import (
    delay_set_formula, enabled_formula, to_primed, total_delay_formula,
)

_TWO53 = 2 ** 53


def uniform01(rng: random.Random) -> Fraction:
    """Exact dyadic uniform sample in ``[0, 1)``."""
    return Fraction(rng.getrandbits(53), _TWO53)


def _exp_mass(rate: float, lo, hi) -> float:
    """``P(lo < T < hi)`` for an exponential variable."""
    a = math.exp(-rate * float(lo))
    b = 0.0 if hi == math.inf else math.exp(-rate * float(hi))
    return a - b


@dataclass(frozen=True)
class DelayLaw:
    """Distribution of the delay at one state, derived from its delay set."""

    support: CellDecomposition1D
    kind: str            # "discrete", "uniform" or "exponential"
    rate: Fraction = Fraction(1)

    @property
    def normaliser(self):
        if self.kind == "discrete":
            return Fraction(len(self.support.points))
        if self.kind == "uniform":
            return self.support.length()
        r = float(self.rate)
        return sum(_exp_mass(r, lo, hi) for lo, hi in self.support.intervals)

    def mass(self, lo, hi):
        """Probability of the open interval ``(lo, hi)`` (inside the support)."""
        if self.kind == "discrete":
            return Fraction(0)
        if self.kind == "uniform":
            return Fraction(hi - lo) / self.normaliser
        return _exp_mass(float(self.rate), lo, hi) / self.normaliser

    def density(self, tau: float) -> float:
        if self.kind == "uniform":
            return 1.0 / float(self.normaliser)
        r = float(self.rate)
        return r * math.exp(-r * tau) / self.normaliser

    def sample(self, rng: random.Random) -> Fraction:
        pts, ivs = self.support.points, self.support.intervals
        if self.kind == "discrete":
            return pts[rng.randrange(len(pts))] if len(pts) > 1 else pts[0]
        while True:
            if self.kind == "uniform":
                target = uniform01(rng) * self.normaliser
                for lo, hi in ivs:
                    if target < hi - lo:
                        tau = lo + target
                        break
                    target -= hi - lo
                else:
                    continue
            else:
                r = float(self.rate)
                masses = [_exp_mass(r, lo, hi) for lo, hi in ivs]
                pick = float(uniform01(rng)) * sum(masses)
                k = 0
                while k < len(ivs) - 1 and pick >= masses[k]:
                    pick -= masses[k]
                    k += 1
                lo, hi = ivs[k]
                width = math.inf if hi == math.inf else float(hi - lo)
                u = float(uniform01(rng))
                span = 1.0 if width == math.inf else -math.expm1(-r * width)
                offset = -math.log1p(-u * span) / r
                tau = lo + Fraction(offset)
            if any(lo < tau < hi for lo, hi in ivs):
                return tau


@dataclass(frozen=True)
class Piece:
    """Part of the delay support on which the enabled edge set is constant."""

    kind: str                    # "point" or "interval"
    lo: object
    hi: object
    mass: object                 # probability of the piece
    edges: tuple[tuple[Edge, Fraction], ...]   # enabled edges with normalised weights


class StepModel:
    """Compiled per-location data for fast exact stepping."""

    def __init__(self, H: HybridSystem):
        self.H = H
        self.vars = H.variables
        self.total = {l.name: CompiledSection(total_delay_formula(H, l.name), TAU) for l in H.locations}
        self.per_edge = {e.name: CompiledSection(delay_set_formula(H, e.source, e), TAU) for e in H.edges}
        self.enabled = {e.name: enabled_formula(H, e) for e in H.edges}
        self.out = {l.name: H.outgoing(l.name) for l in H.locations}
        self.flow = {l.name: l.flow for l in H.locations}
        self._regions = {}

    def env(self, valuation) -> dict:
        return dict(zip(self.vars, valuation))

    def after(self, location: str, valuation, tau) -> tuple[Fraction, ...]:
        env = self.env(valuation)
        env[TAU] = tau
        return tuple(t.evaluate(env) for t in self.flow[location])

    def delay_law(self, s: State) -> DelayLaw:
        support = self.total[s.location].at(self.env(s.valuation))
        if support.is_empty():
            raise BlockedState(f"no admissible delay at {s}")
        rate = self.H.location(s.location).delay.rate
        if not support.has_interior():
            return DelayLaw(support, "discrete", rate)
        if support.is_bounded():
            return DelayLaw(support, "uniform", rate)
        return DelayLaw(support, "exponential", rate)

    def enabled_at(self, location: str, valuation) -> list[Edge]:
        env = self.env(valuation)
        return [e for e in self.out[location] if self.enabled[e.name].evaluate(env)]

    def weights(self, edges: Sequence[Edge]) -> tuple[tuple[Edge, Fraction], ...]:
        total = sum(e.weight for e in edges)
        return tuple((e, e.weight / total) for e in edges)

    def pieces(self, s: State) -> tuple[DelayLaw, list[Piece]]:
        law = self.delay_law(s)
        env = self.env(s.valuation)
        sets = {e.name: self.per_edge[e.name].at(env) for e in self.out[s.location]}
        out: list[Piece] = []
        if law.kind == "discrete":
            m = Fraction(1, len(law.support.points))
            for p in law.support.points:
                edges = [e for e in self.out[s.location] if sets[e.name].contains(p)]
                out.append(Piece("point", p, p, m, self.weights(edges)))
            return law, out
        cuts = set()
        for d in sets.values():
            cuts.update(d.points)
            for lo, hi in d.intervals:
                cuts.update(v for v in (lo, hi) if math.isfinite(v))
        for lo, hi in law.support.intervals:
            inner = sorted(c for c in cuts if lo < c < hi)
            bounds = [lo] + inner + [hi]
            for a, b in zip(bounds, bounds[1:]):
                mid = _interior_point(a, b)
                edges = [e for e in self.out[s.location]
                         if any(x < mid < y for x, y in sets[e.name].intervals)]
                out.append(Piece("interval", a, b, law.mass(a, b), self.weights(edges)))
        return law, out

    # -- resets ------------------------------------------------------------
    def reset_deterministic(self, e: Edge, valuation) -> tuple[Fraction, ...]:
        env = self.env(valuation)
        return tuple(t.evaluate(env) for t in e.reset.resolved_terms(self.vars))

    def region_bounds(self, region: Formula, names: Sequence[str], env: dict) -> list[tuple]:
        """Bounding box of the ``names``-section of ``region`` at ``env``."""
        key = (region, tuple(names))
        if key not in self._regions:
            secs = []
            for i, v in enumerate(names):
                others = [w for j, w in enumerate(names) if j != i]
                secs.append(CompiledSection(eliminate_quantifiers(exists(others, region)), v))
            self._regions[key] = secs
        box = []
        for sec in self._regions[key]:
            d = sec.at(env)
            los = [lo for lo, _ in d.intervals] + list(d.points)
            his = [hi for _, hi in d.intervals] + list(d.points)
            box.append((min(los), max(his)))
        return box

    def sample_region(self, region: Formula, names: Sequence[str], env: dict,
                      rng: random.Random) -> tuple[Fraction, ...]:
        box = self.region_bounds(region, names, env)
        for _ in range(100_000):
            point = tuple(lo + uniform01(rng) * (hi - lo) for lo, hi in box)
            full = dict(env)
            full.update(zip(names, point))
            if region.evaluate(full):
                return point
        raise BlockedState("rejection sampling of a uniform region failed")

    def sample_reset(self, e: Edge, valuation, rng: random.Random) -> tuple[Fraction, ...]:
        r = e.reset
        if r.kind in ("identity", "map"):
            return self.reset_deterministic(e, valuation)
        if r.kind == "points":
            return r.points[rng.randrange(len(r.points))] if len(r.points) > 1 else r.points[0]
        return self.sample_region(r.region, self.H.primed_variables, self.env(valuation), rng)

    # -- one mixed transition ---------------------------------------------
    def step(self, s: State, rng: random.Random, tau=None) -> tuple[Fraction, Edge, State, bool]:
        """Sample one mixed transition; returns ``(tau, edge, next, random_used)``."""
        used = False
        if tau is None:
            law = self.delay_law(s)
            used = law.kind != "discrete" or len(law.support.points) > 1
            tau = law.sample(rng)
        moved = self.after(s.location, s.valuation, tau)
        edges = self.enabled_at(s.location, moved)
        if not edges:
            raise BlockedState(f"no edge enabled after delay {tau} from {s}")
        if len(edges) == 1:
            e = edges[0]
        else:
            used = True
            pick = uniform01(rng) * sum(x.weight for x in edges)
            for e in edges:
                if pick < e.weight:
                    break
                pick -= e.weight
        if e.reset.kind == "uniform" or (e.reset.kind == "points" and len(e.reset.points) > 1):
            used = True
        return tau, e, State(e.target, self.sample_reset(e, moved, rng)), used


def _interior_point(a, b) -> Fraction:
    if a == -math.inf and b == math.inf:
        return Fraction(0)
    if a == -math.inf:
        return b - 1
    if b == math.inf:
        return a + 1
    return (a + b) / 2


def region_volume(region: Formula, names: Sequence[str], env: dict, tol: float = 1e-10) -> float:
    """Lebesgue volume of the ``names``-section of ``region`` at ``env``."""
    if len(names) == 1:
        d = CompiledSection(region, names[0]).at(env)
        return float(d.length())
    first, rest = names[0], list(names[1:])
    proj = CompiledSection(eliminate_quantifiers(exists(rest, region)), first).at(env)

    def inner(y):
        e = dict(env)
        e[first] = Fraction(float(y))
        return region_volume(region, rest, e, tol)

    total = 0.0
    for lo, hi in proj.intervals:
        val, _ = quad_vec(inner, float(lo), float(hi), epsabs=tol, epsrel=0, norm="max")
        total += float(val)
    return total


class StsView:
    """``kappa(s, .)`` as a sampler and as a numeric evaluator."""

    def __init__(self, H: HybridSystem):
        self.H = H
        self.model = StepModel(H)

    def sample(self, s: State, rng: random.Random) -> State:
        return self.model.step(s, rng)[2]

    def probability(self, s: State, location: str, Q: Formula, tol: float = 1e-9) -> float:
        """``kappa(s, {location} x [[Q]])``; exact up to float rounding for
        deterministic and point resets, quadrature for uniform resets."""
        m = self.model
        H = self.H
        law, pieces = m.pieces(s)
        total = 0.0
        for piece in pieces:
            for e, w in piece.edges:
                if e.target != location:
                    continue
                total += float(w) * self._edge_mass(s, law, piece, e, Q, tol)
        return total

    def _edge_mass(self, s, law, piece, e, Q, tol) -> float:
        m = self.model
        H = self.H
        r = e.reset
        if r.kind == "points":
            frac = sum(Q.evaluate(m.env(p)) for p in r.points) / len(r.points)
            return float(piece.mass) * frac
        if r.kind == "uniform":
            ys = H.primed_variables
            qy = to_primed(H, Q)

            def frac_at(tau):
                moved = m.after(s.location, s.valuation, tau)
                env = m.env(moved)
                whole = region_volume(r.region, ys, env, tol)
                part = region_volume(conj([r.region, qy]), ys, env, tol)
                return part / whole if whole > 0 else 0.0
            if piece.kind == "point":
                return float(piece.mass) * frac_at(piece.lo)
            if r.is_state_independent(H.variables):
                return float(piece.mass) * frac_at(_interior_point(piece.lo, piece.hi))
            return _integrate_piece(law, piece, lambda t: np.array([frac_at(Fraction(t))]), tol)[0][0]
        # deterministic reset: the landing condition is a definable set of delays
        terms = r.resolved_terms(H.variables)
        flow = H.location(s.location).flow
        env = m.env(s.valuation)
        composed = Q.substitute({v: t.substitute(dict(zip(H.variables, flow))) for v, t in zip(H.variables, terms)})
        section = CompiledSection(composed, TAU).at(env)
        if piece.kind == "point":
            return float(piece.mass) if section.contains(piece.lo) else 0.0
        mass = 0.0
        for lo, hi in section.intervals:
            a, b = max(lo, piece.lo), min(hi, piece.hi)
            if a < b:
                mass += float(law.mass(a, b))
        return mass


def _integrate_piece(law: DelayLaw, piece: Piece, fn, tol: float, limit: int = 2000):
    """``int fn(tau) dP(tau)`` over an interval piece; returns ``(value, error, status)``."""
    lo, hi = piece.lo, piece.hi
    if law.kind == "uniform":
        dens = 1.0 / float(law.normaliser)
        val, err, info = quad_vec(lambda t: fn(t) * dens, float(lo), float(hi), epsabs=tol,
                                  epsrel=0, norm="max", limit=limit, full_output=True)
        return val, err, info.status
    r = float(law.rate)
    Z = law.normaliser
    if hi == math.inf:
        scale = math.exp(-r * float(lo)) / Z

        def g(u):
            u = max(u, 1e-300)
            return fn(float(lo) - math.log(u) / r) * scale
        val, err, info = quad_vec(g, 0.0, 1.0, epsabs=tol, epsrel=0, norm="max", limit=limit,
                                  full_output=True)
        return val, err, info.status
    val, err, info = quad_vec(lambda t: fn(t) * (r * math.exp(-r * t) / Z), float(lo), float(hi),
                              epsabs=tol, epsrel=0, norm="max", limit=limit, full_output=True)
    return val, err, info.status


def sts_view(H: HybridSystem) -> StsView:
    return StsView(H)
