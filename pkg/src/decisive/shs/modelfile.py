"""Reader for the ``.shs`` model-file format.

::

    vars x, y;
    location l0 {
        flow: x' = 1, y' = 1;      # rates; or x -> x + 2*tau
        inv: y < 2;
        delay: auto;               # or: exp 3/2
    }
    edge e0 {
        from: l0; to: l1;
        guard: y < 1;
        reset: map(y := 0);        # identity | points{(0,0),(1,0)} | uniform(0 < x' & x' < 1 & y' = 0)
        strong;
        weight: 2;
    }
    init { loc: l0; points{(0,0)}; }
    target reach_l1 { l1: true; }

Unlisted flow components have rate 0; unlisted map components are kept.
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

from decisive.errors import ModelError
from decisive.formula.parser import Parser, parse_rational, tokenize
from decisive.formula.syntax import TRUE, Formula
from decisive.formula.terms import Term
from decisive.shs.model import (
    TAU, DelaySpec, Edge, HybridSystem, InitialSpec, Location, ResetSpec, primed,
)


class _ModelParser(Parser):
    def __init__(self, text: str):
        super().__init__(tokenize(text), ())
        self.variables: list[str] = []

    def fail(self, message: str):
        return self.error(message, cls=_located_model_error)

    def rational(self) -> Fraction:
        sign = -1 if self.accept("-") else 1
        if self.tok.kind != "num":
            raise self.fail(f"expected a number, found {self.tok.text or 'end of input'!r}")
        value = parse_rational(self.tok.text)
        self.pos += 1
        return sign * value

    def with_scope(self, names, fn):
        self.scope.append(set(names))
        try:
            return fn()
        finally:
            self.scope.pop()

    def formula_over(self, names) -> Formula:
        return self.with_scope(names, self.formula)

    def point(self) -> tuple[Fraction, ...]:
        self.expect("(")
        coords = [self.rational()]
        while self.accept(","):
            coords.append(self.rational())
        self.expect(")")
        return tuple(coords)

    def point_list(self) -> tuple[tuple[Fraction, ...], ...]:
        self.expect("points")
        self.expect("{")
        pts = [self.point()]
        while self.accept(","):
            pts.append(self.point())
        self.expect("}")
        return tuple(pts)

    # -- sections ----------------------------------------------------------
    def model(self, name: str) -> HybridSystem:
        locations, edges, targets = [], [], {}
        initial = None
        while self.tok.kind != "eof":
            kw = self.tok
            if self.accept("vars"):
                if self.variables:
                    raise self.fail("duplicate vars section")
                self.variables = [self.expect_ident()]
                while self.accept(","):
                    self.variables.append(self.expect_ident())
                self.expect(";")
                self.scope = [set(self.variables)]
            elif self.accept("location"):
                locations.append(self.location())
            elif self.accept("edge"):
                edges.append(self.edge())
            elif self.accept("init"):
                if initial is not None:
                    raise self.fail("duplicate init section")
                initial = self.initial()
            elif self.accept("target"):
                tname = self.expect_ident()
                if tname in targets:
                    raise self.error(f"duplicate target {tname!r}", kw, _located_model_error)
                targets[tname] = self.target()
            else:
                raise self.fail(f"expected a section keyword, found {kw.text!r}")
        if initial is None:
            raise ModelError("model has no init section")
        return HybridSystem(tuple(self.variables), tuple(locations), tuple(edges), initial,
                            targets, name)

    def location(self) -> Location:
        name = self.expect_ident()
        self.expect("{")
        flow = {v: Term.var(v) for v in self.variables}
        inv: Formula = TRUE
        delay = DelaySpec()
        while not self.accept("}"):
            if self.accept("flow"):
                self.expect(":")
                self.flow_item(flow)
                while self.accept(","):
                    self.flow_item(flow)
            elif self.accept("inv"):
                self.expect(":")
                inv = self.formula()
            elif self.accept("delay"):
                self.expect(":")
                if self.accept("exp"):
                    delay = DelaySpec("auto", self.rational())
                else:
                    self.expect("auto")
            else:
                raise self.fail(f"unexpected {self.tok.text!r} in location {name}")
            self.expect(";")
        return Location(name, tuple(flow[v] for v in self.variables), inv, delay)

    def flow_item(self, flow: dict) -> None:
        tok = self.tok
        name = self.expect_ident()
        if name.endswith("'"):
            base = name[:-1]
            if base not in flow:
                raise self.error(f"undeclared variable {base!r}", tok, _located_model_error)
            self.expect("=")
            rate = self.with_scope((), self.term)
            if not rate.is_constant():
                raise self.error("flow rates must be constants", tok, _located_model_error)
            flow[base] = Term.var(base) + Term.var(TAU).scale(rate.const)
            return
        if name not in flow:
            raise self.error(f"undeclared variable {name!r}", tok, _located_model_error)
        self.expect("->")
        term = self.with_scope({"tau"}, self.term)
        flow[name] = term.substitute({"tau": Term.var(TAU)})

    def edge(self) -> Edge:
        name = self.expect_ident()
        self.expect("{")
        fields: dict = {}
        while not self.accept("}"):
            if self.accept("from"):
                self.expect(":")
                fields["source"] = self.expect_ident()
            elif self.accept("to"):
                self.expect(":")
                fields["target"] = self.expect_ident()
            elif self.accept("guard"):
                self.expect(":")
                fields["guard"] = self.formula()
            elif self.accept("reset"):
                self.expect(":")
                fields["reset"] = self.reset()
            elif self.accept("strong"):
                fields["strong"] = True
            elif self.accept("weight"):
                self.accept(":")
                fields["weight"] = self.rational()
            else:
                raise self.fail(f"unexpected {self.tok.text!r} in edge {name}")
            self.expect(";")
        for required in ("source", "target"):
            if required not in fields:
                raise ModelError(f"edge {name}: missing {'from' if required == 'source' else 'to'}")
        return Edge(name, **fields)

    def reset(self) -> ResetSpec:
        if self.accept("identity"):
            return ResetSpec.identity()
        if self.at("points"):
            return ResetSpec.discrete(self.point_list())
        if self.accept("uniform"):
            self.expect("(")
            region = self.formula_over({primed(v) for v in self.variables})
            self.expect(")")
            return ResetSpec.uniform(region)
        if self.accept("map"):
            self.expect("(")
            terms = {v: Term.var(v) for v in self.variables}
            while True:
                tok = self.tok
                v = self.expect_ident()
                if v not in terms:
                    raise self.error(f"undeclared variable {v!r}", tok, _located_model_error)
                self.expect(":=")
                terms[v] = self.term()
                if not self.accept(","):
                    break
            self.expect(")")
            return ResetSpec.map([terms[v] for v in self.variables])
        raise self.fail(f"expected a reset, found {self.tok.text!r}")

    def initial(self) -> InitialSpec:
        self.expect("{")
        loc = None
        spec = None
        while not self.accept("}"):
            if self.accept("loc"):
                self.expect(":")
                loc = self.expect_ident()
            elif self.at("points"):
                spec = ("points", self.point_list(), None)
            elif self.accept("uniform"):
                self.expect("(")
                spec = ("uniform", (), self.formula())
                self.expect(")")
            else:
                raise self.fail(f"unexpected {self.tok.text!r} in init")
            self.expect(";")
        if loc is None or spec is None:
            raise ModelError("init needs a location and a points or uniform law")
        return InitialSpec(loc, spec[0], spec[1], spec[2])

    def target(self) -> dict[str, Formula]:
        self.expect("{")
        out = {}
        while not self.accept("}"):
            loc = self.expect_ident()
            self.expect(":")
            out[loc] = self.formula()
            self.expect(";")
        return out


def _located_model_error(message: str, line: int, column: int) -> ModelError:
    return ModelError(message, line, column)


def parse_model(text: str, name: str = "model") -> HybridSystem:
    """Build a :class:`HybridSystem` from model-file text."""
    return _ModelParser(text).model(name)


def load_model(path: str | Path) -> HybridSystem:
    path = Path(path)
    return parse_model(path.read_text(encoding="utf-8"), path.stem)
