"""Stochastic hybrid system data model."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from decisive.errors import DimensionMismatch, ModelError
from decisive.formula.syntax import FALSE, TRUE, Formula, conj, disj, eq
from decisive.formula.terms import Term, as_fraction

TAU = "$tau"


def primed(name: str) -> str:
    return name + "'"


@dataclass(frozen=True)
class DelaySpec:
    """Delay law derived from the delay set; ``rate`` is used only when the set
    is unbounded (exponential restricted to it)."""

    kind: str = "auto"
    rate: Fraction = Fraction(1)

    def __post_init__(self):
        if self.kind != "auto":
            raise ModelError(f"unknown delay kind {self.kind!r}")
        if self.rate <= 0:
            raise ModelError("exponential rate must be positive")


@dataclass(frozen=True)
class ResetSpec:
    """One of ``identity``, ``map`` (terms over source variables, one per
    variable), ``points`` (uniform over a finite list) or ``uniform``
    (Lebesgue-uniform over a region given by a formula in source and primed
    target variables)."""

    kind: str
    terms: tuple[Term, ...] = ()
    points: tuple[tuple[Fraction, ...], ...] = ()
    region: Formula | None = None

    @staticmethod
    def identity() -> "ResetSpec":
        return ResetSpec("identity")

    @staticmethod
    def map(terms: Sequence[Term]) -> "ResetSpec":
        return ResetSpec("map", terms=tuple(terms))

    @staticmethod
    def discrete(points: Sequence[Sequence]) -> "ResetSpec":
        return ResetSpec("points", points=tuple(tuple(as_fraction(c) for c in p) for p in points))

    @staticmethod
    def uniform(region: Formula) -> "ResetSpec":
        return ResetSpec("uniform", region=region)

    def resolved_terms(self, variables: Sequence[str]) -> tuple[Term, ...]:
        if self.kind == "identity":
            return tuple(Term.var(v) for v in variables)
        if self.kind == "map":
            return self.terms
        raise ValueError(f"{self.kind} reset has no deterministic terms")

    def relation(self, variables: Sequence[str]) -> Formula:
        """The reset formula over source variables and primed targets."""
        ys = [Term.var(primed(v)) for v in variables]
        if self.kind in ("identity", "map"):
            return conj(eq(y, t) for y, t in zip(ys, self.resolved_terms(variables)))
        if self.kind == "points":
            return disj(conj(eq(y, c) for y, c in zip(ys, p)) for p in self.points)
        return self.region

    def is_state_independent(self, variables: Sequence[str]) -> bool:
        if self.kind == "points":
            return True
        if self.kind == "uniform":
            return not (self.region.free_vars() & set(variables))
        terms = self.resolved_terms(variables)
        return all(t.is_constant() for t in terms)


@dataclass(frozen=True)
class Location:
    name: str
    flow: tuple[Term, ...]          # one term over (variables, TAU) per variable
    invariant: Formula = TRUE
    delay: DelaySpec = DelaySpec()


@dataclass(frozen=True)
class Edge:
    name: str
    source: str
    target: str
    guard: Formula = TRUE
    reset: ResetSpec = ResetSpec("identity")
    weight: Fraction = Fraction(1)
    strong: bool = False


@dataclass(frozen=True)
class InitialSpec:
    location: str
    kind: str                       # "points" or "uniform"
    points: tuple[tuple[Fraction, ...], ...] = ()
    region: Formula | None = None

    def support_formula(self, variables: Sequence[str]) -> Formula:
        if self.kind == "uniform":
            return self.region
        xs = [Term.var(v) for v in variables]
        return disj(conj(eq(x, c) for x, c in zip(xs, p)) for p in self.points)


@dataclass(frozen=True)
class State:
    location: str
    valuation: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "valuation", tuple(as_fraction(v) for v in self.valuation))

    def env(self, variables: Sequence[str]) -> dict[str, Fraction]:
        return dict(zip(variables, self.valuation))

    def __str__(self) -> str:
        vals = ", ".join(str(v) for v in self.valuation)
        return f"({self.location}, ({vals}))"


@dataclass(frozen=True, eq=False)
class HybridSystem:
    """Locations, edges, a variable vector, an initial law and named targets.

    Structural well-formedness is checked on construction; semantic checks
    (non-blocking, reset containment, ...) live in :func:`validate`.
    """

    variables: tuple[str, ...]
    locations: tuple[Location, ...]
    edges: tuple[Edge, ...]
    initial: InitialSpec
    targets: Mapping[str, Mapping[str, Formula]] = field(default_factory=dict)
    name: str = "model"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "locations", tuple(self.locations))
        object.__setattr__(self, "edges", tuple(self.edges))
        n = len(self.variables)
        if len(set(self.variables)) != n:
            raise ModelError("duplicate variable names")
        declared = set(self.variables)
        primes = {primed(v) for v in self.variables}
        locs = [l.name for l in self.locations]
        if not locs:
            raise ModelError("a system needs at least one location")
        if len(set(locs)) != len(locs):
            raise ModelError("duplicate location names")
        names = [e.name for e in self.edges]
        if len(set(names)) != len(names):
            raise ModelError("duplicate edge names")
        for l in self.locations:
            if len(l.flow) != n:
                raise DimensionMismatch(f"location {l.name}: flow has {len(l.flow)} components, expected {n}")
            for t in l.flow:
                _check_vars(t.variables, declared | {TAU}, f"flow of {l.name}")
            _check_vars(l.invariant.free_vars(), declared, f"invariant of {l.name}")
        for e in self.edges:
            for end in (e.source, e.target):
                if end not in locs:
                    raise ModelError(f"edge {e.name}: unknown location {end!r}")
            if e.weight <= 0:
                raise ModelError(f"edge {e.name}: weight must be positive")
            _check_vars(e.guard.free_vars(), declared, f"guard of {e.name}")
            r = e.reset
            if r.kind == "map":
                if len(r.terms) != n:
                    raise DimensionMismatch(f"edge {e.name}: map has {len(r.terms)} components, expected {n}")
                for t in r.terms:
                    _check_vars(t.variables, declared, f"reset of {e.name}")
            elif r.kind == "points":
                if not r.points:
                    raise ModelError(f"edge {e.name}: empty point list")
                if any(len(p) != n for p in r.points):
                    raise DimensionMismatch(f"edge {e.name}: reset point of wrong dimension")
            elif r.kind == "uniform":
                if r.region is None:
                    raise ModelError(f"edge {e.name}: uniform reset without region")
                _check_vars(r.region.free_vars(), declared | primes, f"reset of {e.name}")
            elif r.kind != "identity":
                raise ModelError(f"edge {e.name}: unknown reset kind {r.kind!r}")
        init = self.initial
        if init.location not in locs:
            raise ModelError(f"initial location {init.location!r} does not exist")
        if init.kind == "points":
            if not init.points:
                raise ModelError("initial point list is empty")
            if any(len(p) != n for p in init.points):
                raise DimensionMismatch("initial point of wrong dimension")
        elif init.kind == "uniform":
            if init.region is None:
                raise ModelError("uniform initial law without region")
            _check_vars(init.region.free_vars(), declared, "initial region")
        else:
            raise ModelError(f"unknown initial kind {init.kind!r}")
        for tname, spec in self.targets.items():
            for loc, f in spec.items():
                if loc not in locs:
                    raise ModelError(f"target {tname}: unknown location {loc!r}")
                _check_vars(f.free_vars(), declared, f"target {tname}")

    # -- lookup ------------------------------------------------------------
    def location(self, name: str) -> Location:
        for l in self.locations:
            if l.name == name:
                return l
        raise ModelError(f"unknown location {name!r}")

    def edge(self, name: str) -> Edge:
        for e in self.edges:
            if e.name == name:
                return e
        raise ModelError(f"unknown edge {name!r}")

    def outgoing(self, location: str) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if e.source == location)

    @property
    def primed_variables(self) -> tuple[str, ...]:
        return tuple(primed(v) for v in self.variables)

    def location_names(self) -> tuple[str, ...]:
        return tuple(l.name for l in self.locations)

    def target(self, name_or_spec: str | Mapping[str, Formula]) -> dict[str, Formula]:
        """Per-location target formulas, ``FALSE`` where unlisted."""
        if isinstance(name_or_spec, str):
            if name_or_spec not in self.targets:
                raise ModelError(f"unknown target {name_or_spec!r}; known: {sorted(self.targets)}")
            spec = self.targets[name_or_spec]
        else:
            spec = name_or_spec
        for loc in spec:
            self.location(loc)
        return {l.name: spec.get(l.name, FALSE) for l in self.locations}

    def state(self, location: str, valuation: Sequence) -> State:
        self.location(location)
        if len(valuation) != len(self.variables):
            raise DimensionMismatch("valuation has the wrong dimension")
        return State(location, tuple(valuation))

    def with_edges(self, edges: Sequence[Edge]) -> "HybridSystem":
        return HybridSystem(self.variables, self.locations, tuple(edges), self.initial,
                            self.targets, self.name)


def _check_vars(found, allowed, where: str) -> None:
    unknown = set(found) - set(allowed)
    if unknown:
        raise ModelError(f"{where}: undeclared variable(s) {sorted(unknown)}")
