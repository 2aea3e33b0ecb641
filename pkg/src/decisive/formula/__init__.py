"""Linear real arithmetic: terms, formulas, parsing and decision procedures."""

from decisive.formula.cells import CellDecomposition1D, decompose_1d
from decisive.formula.parser import parse_formula, parse_term
from decisive.formula.qe import (
    decide_sentence, eliminate_quantifiers, equivalent, interior_nonempty_formula,
    satisfiable, simplify, valid,
)
from decisive.formula.syntax import (
    FALSE, TRUE, And, Atom, Exists, Forall, Formula, Not, Or, atom, conj, disj, eq,
    evaluate, exists, forall, ge, gt, implies, le, lt, neg, substitute, to_text,
)
from decisive.formula.terms import Term

__all__ = [
    "And", "Atom", "CellDecomposition1D", "Exists", "FALSE", "Forall", "Formula", "Not",
    "Or", "TRUE", "Term", "atom", "conj", "decide_sentence", "decompose_1d", "disj", "eq",
    "eliminate_quantifiers", "equivalent", "evaluate", "exists", "forall", "ge", "gt",
    "implies", "interior_nonempty_formula", "le", "lt", "neg", "parse_formula",
    "parse_term", "satisfiable", "simplify", "substitute", "to_text", "valid",
]
