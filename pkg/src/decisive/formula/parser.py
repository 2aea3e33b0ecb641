"""Recursive-descent parser for the ASCII formula grammar.

::

    formula  := disj
    disj     := conj ('|' conj)*
    conj     := unary ('&' unary)*
    unary    := '!' unary | ('E' | 'A') var (',' var)* unary | primary
    primary  := 'true' | 'false' | term (rel term)+ | '(' formula ')'
    term     := ['+'|'-'] product (('+'|'-') product)*
    product  := factor ('*' factor)*
    factor   := rational | var | '(' term ')' | '-' factor
    rel      := '<' | '<=' | '=' | '!=' | '>=' | '>'

Rationals are ``123``, ``4/7`` or ``0.8`` and are read exactly. Comparison
chains such as ``0 <= x < 1`` are conjunctions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from decisive.errors import FormulaSyntaxError, NonLinear, UnknownVariable
from decisive.formula.syntax import (
    FALSE, TRUE, Exists, Forall, Formula, atom, conj, disj, neg,
)
from decisive.formula.terms import Term

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<num>\d+(?:\.\d+)?(?:/\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*'?)
  | (?P<op><=|>=|!=|->|:=|[<>=+\-*&|!(),;:{}])
""", re.VERBOSE)

_REL = {"<", "<=", "=", "!=", ">=", ">"}
_KEYWORDS = {"true", "false"}


@dataclass(frozen=True)
class Token:
    kind: str   # "num", "ident", "op", "eof"
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(Token(kind, chunk, line, pos - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def parse_rational(text: str) -> Fraction:
    if "/" in text:
        num, den = text.split("/")
        return Fraction(num) / Fraction(den)
    return Fraction(text)


class Parser:
    """Token-stream parser; the model-file reader drives it directly."""

    def __init__(self, tokens: list[Token], declared: Iterable[str]):
        self.tokens = tokens
        self.pos = 0
        self.scope: list[set[str]] = [set(declared)]

    # -- token helpers -----------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def error(self, message: str, tok: Token | None = None, cls=FormulaSyntaxError):
        tok = tok or self.tok
        return cls(message, tok.line, tok.column)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "ident") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        tok = self.tok
        self.pos += 1
        return tok

    def expect_ident(self) -> str:
        if self.tok.kind != "ident":
            raise self.error(f"expected a name, found {self.tok.text or 'end of input'!r}")
        name = self.tok.text
        self.pos += 1
        return name

    def expect_eof(self) -> None:
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")

    def is_declared(self, name: str) -> bool:
        return any(name in s for s in self.scope)

    # -- formulas ----------------------------------------------------------
    def formula(self) -> Formula:
        parts = [self.conjunction()]
        while self.accept("|"):
            parts.append(self.conjunction())
        return disj(parts)

    def conjunction(self) -> Formula:
        parts = [self.unary()]
        while self.accept("&"):
            parts.append(self.unary())
        return conj(parts)

    def unary(self) -> Formula:
        if self.accept("!"):
            return neg(self.unary())
        if self.tok.kind == "ident" and self.tok.text in ("E", "A") and self.peek().kind == "ident":
            quant = Exists if self.tok.text == "E" else Forall
            self.pos += 1
            names = [self.expect_ident()]
            while self.accept(","):
                names.append(self.expect_ident())
            for n in names:
                if n.endswith("'"):
                    raise self.error(f"cannot quantify primed name {n!r}")
            self.scope.append(set(names))
            try:
                body = self.unary()
            finally:
                self.scope.pop()
            for n in reversed(names):
                body = quant(n, body)
            return body
        return self.primary()

    def primary(self) -> Formula:
        if self.tok.kind == "ident" and self.tok.text in _KEYWORDS:
            self.pos += 1
            return TRUE if self.tokens[self.pos - 1].text == "true" else FALSE
        if self.at("("):
            start = self.pos
            try:
                return self.comparison()
            except FormulaSyntaxError as first:
                self.pos = start
                self.expect("(")
                try:
                    inner = self.formula()
                    self.expect(")")
                except FormulaSyntaxError as second:
                    raise second if _later(second, first) else first
                return inner
        return self.comparison()

    def comparison(self) -> Formula:
        lhs = self.term()
        if not (self.tok.kind == "op" and self.tok.text in _REL):
            raise self.error(f"expected a comparison, found {self.tok.text or 'end of input'!r}")
        parts = []
        while self.tok.kind == "op" and self.tok.text in _REL:
            rel = self.tok.text
            self.pos += 1
            rhs = self.term()
            parts.append(_relate(lhs, rel, rhs))
            lhs = rhs
        return conj(parts)

    # -- terms -------------------------------------------------------------
    def term(self) -> Term:
        if self.accept("-"):
            acc = -self.product()
        else:
            self.accept("+")
            acc = self.product()
        while True:
            if self.accept("+"):
                acc = acc + self.product()
            elif self.accept("-"):
                acc = acc - self.product()
            else:
                return acc

    def product(self) -> Term:
        acc = self.factor()
        while self.at("*"):
            star = self.tok
            self.pos += 1
            rhs = self.factor()
            if not acc.is_constant() and not rhs.is_constant():
                raise self.error("product of two variables is not linear", star, NonLinear)
            acc = acc * rhs
        return acc

    def factor(self) -> Term:
        tok = self.tok
        if tok.kind == "num":
            self.pos += 1
            return Term.constant(parse_rational(tok.text))
        if tok.kind == "ident" and tok.text not in _KEYWORDS:
            if not self.is_declared(tok.text):
                raise self.error(f"undeclared variable {tok.text!r}", tok, UnknownVariable)
            self.pos += 1
            return Term.var(tok.text)
        if self.accept("-"):
            return -self.factor()
        if self.accept("("):
            inner = self.term()
            self.expect(")")
            return inner
        raise self.error(f"expected a term, found {tok.text or 'end of input'!r}")


def _later(a: FormulaSyntaxError, b: FormulaSyntaxError) -> bool:
    return (a.line or 0, a.column or 0) >= (b.line or 0, b.column or 0)


def _relate(lhs: Term, rel: str, rhs: Term) -> Formula:
    if rel == "<":
        return atom(lhs - rhs, "<")
    if rel == "<=":
        return atom(lhs - rhs, "<=")
    if rel == "=":
        return atom(lhs - rhs, "=")
    if rel == ">":
        return atom(rhs - lhs, "<")
    if rel == ">=":
        return atom(rhs - lhs, "<=")
    return neg(atom(lhs - rhs, "="))


def parse_formula(text: str, declared_vars: Iterable[str]) -> Formula:
    """Parse ``text``; every free variable must be among ``declared_vars``."""
    p = Parser(tokenize(text), declared_vars)
    f = p.formula()
    p.expect_eof()
    return f


def parse_term(text: str, declared_vars: Iterable[str]) -> Term:
    p = Parser(tokenize(text), declared_vars)
    t = p.term()
    p.expect_eof()
    return t
