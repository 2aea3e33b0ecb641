from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from decisive.errors import (
    FormulaSyntaxError, FreeVariablePresent, MissingVariable, NonLinear, QuantifierPresent,
    ResourceExceeded, UnknownVariable, WrongArity,
)
from decisive.formula import (
    FALSE, TRUE, CellDecomposition1D, Term, decompose_1d, parse_formula, parse_term,
)
from decisive.formula.qe import (
    decide_sentence, eliminate_quantifiers, equivalent, interior_nonempty_formula, satisfiable,
    set_atom_cap, simplify,
)
from decisive.formula.syntax import And, Atom, Exists, conj, disj, neg, to_text

from oracles import PointCloud, disagreements, oracle_eval, random_formula, random_point, random_qf

XY = ["x", "y"]
F = Fraction


def p(text, names=("x", "y", "z", "t", "u", "c")):
    return parse_formula(text, names)


# -- parsing ---------------------------------------------------------------

def test_parse_simple_atom():
    f = parse_formula("x + 2*y <= 3", XY)
    assert isinstance(f, Atom) and f.rel == "<="
    assert f.term == Term({"x": 1, "y": 2}, -3)
    assert f.free_vars() == {"x", "y"}


def test_parse_exists():
    f = parse_formula("E t (t > 0 & x + t < 1)", ["x"])
    assert isinstance(f, Exists) and f.var == "t"
    assert isinstance(f.body, And)
    assert set(f.body.args) == {Atom(Term({"t": -1}), "<"), Atom(Term({"x": 1, "t": 1}, -1), "<")}
    assert f.free_vars() == {"x"}


def test_parse_nonlinear_rejected():
    with pytest.raises(NonLinear):
        parse_formula("x * y < 1", XY)


def test_parse_unknown_variable():
    with pytest.raises(UnknownVariable) as err:
        parse_formula("x + q < 1", XY)
    assert err.value.line == 1 and err.value.column is not None


def test_parse_syntax_error_position():
    with pytest.raises(FormulaSyntaxError) as err:
        parse_formula("x <\n  & y", XY)
    assert err.value.line == 2
    d = err.value.to_dict()
    assert d["type"] == "FormulaSyntaxError" and d["line"] == 2


def test_decimal_literals_are_exact():
    f = parse_formula("x < 0.8", ["x"])
    assert f.evaluate({"x": F(799, 1000)}) and not f.evaluate({"x": F(4, 5)})


def test_scalar_products_and_division():
    t = parse_term("2*(x - 3/4) + y*3 - -1", XY)
    assert t == Term({"x": 2, "y": 3}, F(-1, 2))


def test_connectives_and_relations():
    f = parse_formula("!(x >= 1) | (y = 2 & A u (u > x | u <= x))", ["x", "y"])
    g = eliminate_quantifiers(f)
    assert g.evaluate({"x": 0, "y": 5})
    assert not g.evaluate({"x": 3, "y": 5})
    assert g.evaluate({"x": 3, "y": 2})


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_printing_round_trips(seed):
    rng = random.Random(seed)
    f = random_formula(rng)
    g = parse_formula(to_text(f), ["x", "y", "z"])
    assert g == f


# -- evaluate and substitute -------------------------------------------------

def test_evaluate_examples():
    assert p("x <= 3").evaluate({"x": 3})
    assert not p("x < 3").evaluate({"x": 3})
    guard = parse_formula("y = 2", XY)
    assert not guard.evaluate({"x": F(3, 2), "y": F(17, 10)})


def test_evaluate_errors():
    with pytest.raises(MissingVariable):
        p("x + y < 1").evaluate({"x": 0})
    with pytest.raises(QuantifierPresent):
        p("E u (u < x)").evaluate({"x": 0})


def test_substitute_examples():
    y_tau = Term({"y": 1, "t": 1})
    assert p("y = 2").substitute({"y": y_tau}) == p("y + t = 2")
    assert p("y < 1").substitute({"y": y_tau}) == p("y + t < 1")
    assert p("x < 0").substitute({"x": Term.var("x")}) == p("x < 0")


def test_substitute_is_capture_avoiding():
    f = p("E u (u < x)")
    g = f.substitute({"x": Term.var("u", 1) + Term.constant(1)})
    # x := u + 1 must not be captured by the bound u
    assert "u" in g.free_vars()
    h = eliminate_quantifiers(g)
    assert h == TRUE or h.evaluate({"u": 0})


def test_substitute_simultaneous():
    f = p("x - y < 0")
    g = f.substitute({"x": Term.var("y"), "y": Term.var("x")})
    assert g == p("y - x < 0")


# -- quantifier elimination ------------------------------------------------------

def test_qe_examples():
    assert equivalent(eliminate_quantifiers(p("E x (y < x & x < z)")), p("y < z"))
    assert eliminate_quantifiers(p("E x (x > 0 & x < 1)")) == TRUE
    assert eliminate_quantifiers(p("E t (t >= 0 & 0.2 + t < 1)")) == TRUE


def test_qe_equality_substitution():
    f = eliminate_quantifiers(p("E u (u = 2*x + 1 & u < y & u > 0)"))
    assert f.is_quantifier_free()
    assert equivalent(f, p("2*x + 1 < y & 2*x + 1 > 0"))


def test_qe_strict_and_weak_mix():
    f = eliminate_quantifiers(p("E u (x <= u & u <= y)"))
    assert equivalent(f, p("x <= y"))
    g = eliminate_quantifiers(p("E u (x <= u & u < y)"))
    assert equivalent(g, p("x < y"))


def test_decide_sentence_examples():
    assert decide_sentence(p("A x (E y (y > x))"))
    assert not decide_sentence(p("E x (x < 0 & x > 0)"))
    with pytest.raises(FreeVariablePresent):
        decide_sentence(p("x < 1"))


def test_atom_cap_raises_structured_error():
    old = set_atom_cap(5)
    try:
        body = conj([p(f"{k}*x + u < {k}") for k in range(1, 5)] + [p(f"u - {k}*y > {k}") for k in range(1, 5)])
        with pytest.raises(ResourceExceeded) as err:
            eliminate_quantifiers(Exists("u", body))
        assert err.value.cap == 5 and err.value.atoms > 5
    finally:
        set_atom_cap(old)


def test_qe_small_differential():
    rng = random.Random(5)
    for _ in range(40):
        f = random_formula(rng)
        cloud = PointCloud([random_point(rng) for _ in range(200)])
        assert disagreements(f, eliminate_quantifiers(f), cloud) == []


def test_oracle_detects_a_wrong_answer():
    rng = random.Random(9)
    caught = 0
    for _ in range(30):
        f = random_formula(rng, n_quant=2)
        q = eliminate_quantifiers(f)
        wrong = neg(q)
        cloud = PointCloud([random_point(rng) for _ in range(100)])
        caught += bool(disagreements(f, wrong, cloud, direct=0))
    assert caught == 30


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_qe_soundness_property(seed):
    rng = random.Random(seed)
    f = random_formula(rng)
    q = eliminate_quantifiers(f)
    assert q.is_quantifier_free()
    assert q.free_vars() <= f.free_vars()
    for _ in range(20):
        v = random_point(rng)
        assert q.evaluate(v) == oracle_eval(f, v)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**9))
def test_qe_idempotent_on_quantifier_free(seed):
    rng = random.Random(seed)
    f = random_qf(rng, ["x", "y", "z"], rng.randint(1, 4))
    once = eliminate_quantifiers(f)
    assert eliminate_quantifiers(once) == once
    assert simplify(once) == once


# -- cell decomposition --------------------------------------------------------

def test_decompose_half_open():
    d = decompose_1d(p("t >= 0 & t < 0.8"), "t")
    assert d == CellDecomposition1D((F(0),), ((F(0), F(4, 5)),))
    assert str(d) == "{0} u (0, 4/5)"


def test_decompose_points_only():
    d = decompose_1d(p("t = 1 | t = 2"), "t")
    assert d.points == (1, 2) and d.intervals == ()
    assert d.is_finite() and not d.has_interior()


def test_decompose_punctured_interval():
    d = decompose_1d(p("t >= 0 & t < 1.8 & !(t = 0.8)"), "t")
    assert d.points == (0,)
    assert d.intervals == ((0, F(4, 5)), (F(4, 5), F(9, 5)))
    assert 0 in d and F(4, 5) not in d and F(9, 5) not in d
    assert d.length() == F(9, 5)


def test_decompose_unbounded_and_merge():
    d = decompose_1d(p("t > 1 | t >= 3 | t < -2"), "t")
    assert d.intervals == ((float("-inf"), -2), (1, float("inf")))
    assert not d.is_bounded()


def test_decompose_wrong_arity():
    with pytest.raises(WrongArity):
        decompose_1d(p("t < x"), "t")


def test_decompose_round_trip_formula():
    d = decompose_1d(p("(t > -1 & t <= 2) | t = 5"), "t")
    assert equivalent(d.to_formula("t"), p("(t > -1 & t <= 2) | t = 5"))


def _single_var_formula(rng):
    f = random_qf(rng, ["t"], rng.randint(1, 4))
    if rng.random() < 0.5:
        f = Exists("u", conj([f, random_qf(rng, ["t", "u"], 2)]))
    return f


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 10**9))
def test_decompose_and_negation_partition_the_line(seed):
    rng = random.Random(seed)
    f = _single_var_formula(rng)
    d, dn = decompose_1d(f, "t"), decompose_1d(neg(f), "t")
    # disjoint and covering: check every boundary point and every gap
    marks = sorted({q for q in d.points + dn.points}
                   | {e for iv in d.intervals + dn.intervals for e in iv if abs(e) != float("inf")})
    probes = list(marks) + [(a + b) / 2 for a, b in zip(marks, marks[1:])]
    probes += [marks[0] - 1, marks[-1] + 1] if marks else [F(0)]
    for q in probes:
        assert d.contains(q) != dn.contains(q)
        assert d.contains(q) == oracle_eval(f, {"t": q})


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 10**9))
def test_interior_agrees_with_decomposition(seed):
    rng = random.Random(seed)
    f = _single_var_formula(rng)
    if "t" not in f.free_vars():
        return
    g = interior_nonempty_formula(f, ["t"])
    assert g.free_vars() == frozenset()
    assert decide_sentence(g) == decompose_1d(f, "t").has_interior()


# -- interior transformer --------------------------------------------------------

def test_interior_examples():
    assert interior_nonempty_formula(p("0 < t & t < 1"), ["t"]) == TRUE
    assert not satisfiable(interior_nonempty_formula(p("t = c"), ["t"]))
    g = interior_nonempty_formula(p("0 <= t & t <= u"), ["t"])
    assert equivalent(g, p("u > 0"))
    for k in range(-10, 10):
        u = F(k, 7)
        sec = decompose_1d(p("0 <= t & t <= u").substitute({"u": Term.constant(u)}), "t")
        assert g.evaluate({"u": u}) == sec.has_interior()


def test_interior_two_dimensional():
    box_line = p("0 <= x & x <= 1 & y = 0")
    assert interior_nonempty_formula(box_line, ["x", "y"]) == FALSE
    assert interior_nonempty_formula(p("0 <= x & x <= 1 & 0 <= y & y <= x"), ["x", "y"]) == TRUE


def test_interior_unknown_variable():
    with pytest.raises(UnknownVariable):
        interior_nonempty_formula(p("t < 1"), ["s"])


def test_disj_and_conj_normalise():
    a, b = p("x < 1"), p("y < 2")
    assert conj([a, b]) == conj([b, a])
    assert disj([a, TRUE]) == TRUE and conj([a, FALSE]) == FALSE
