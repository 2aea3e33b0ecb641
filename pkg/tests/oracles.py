"""Independent oracles shared by the test suite.

Nothing here calls the quantifier-elimination engine: formulas are judged
by brute force over the threshold lattice of their atoms.
"""

from __future__ import annotations

import random
from fractions import Fraction
from math import lcm

import numpy as np

from decisive.formula.syntax import (
    FALSE, TRUE, And, Atom, Exists, Forall, Formula, Not, Or, _Const, atom, conj, disj, neg,
)
from decisive.formula.terms import Term

FREE = ("x", "y", "z")
BOUND = ("u", "v", "w")


# -- random formulas ---------------------------------------------------------

def random_term(rng: random.Random, names) -> Term:
    k = rng.randint(1, min(3, len(names)))
    chosen = rng.sample(list(names), k)
    coeffs = {n: rng.choice((-3, -2, -1, 1, 2, 3)) for n in chosen}
    return Term(coeffs, Fraction(rng.randint(-8, 8), rng.choice((1, 1, 2, 3))))


def random_atom(rng: random.Random, names) -> Formula:
    return atom(random_term(rng, names), rng.choice(("<", "<=", "<=", "=")))


def random_qf(rng: random.Random, names, n_atoms: int) -> Formula:
    if n_atoms <= 1:
        a = random_atom(rng, names)
        return neg(a) if rng.random() < 0.2 else a
    left = rng.randint(1, n_atoms - 1)
    parts = [random_qf(rng, names, left), random_qf(rng, names, n_atoms - left)]
    f = conj(parts) if rng.random() < 0.55 else disj(parts)
    return neg(f) if rng.random() < 0.1 else f


def random_formula(rng: random.Random, n_quant: int | None = None, n_free: int = 3) -> Formula:
    """At most three quantifiers (distinct names) and at most ``n_free`` free
    variables; quantifiers may be nested or sit in sibling subformulas."""
    if n_quant is None:
        n_quant = rng.randint(0, 3)
    pool = list(BOUND[:n_quant])
    free = FREE[:n_free]

    def build(scope, quants):
        if not quants:
            return random_qf(rng, scope, rng.randint(1, 3))
        if len(quants) == 1 or rng.random() < 0.7:
            v, rest = quants[0], quants[1:]
            inner = build(scope + [v], rest)
            extra = random_qf(rng, scope + [v], rng.randint(0, 2)) if rng.random() < 0.5 else None
            body = conj([inner, extra]) if extra is not None else inner
            Q = Exists if rng.random() < 0.6 else Forall
            return Q(v, body) if v in body.free_vars() else body
        cut = rng.randint(1, len(quants) - 1)
        parts = [build(scope, quants[:cut]), build(scope, quants[cut:])]
        return conj(parts) if rng.random() < 0.5 else disj(parts)

    return build(list(free), pool)


def random_point(rng: random.Random, names=FREE, den: int = 840) -> dict[str, Fraction]:
    """Random rationals in [-6, 6] with denominators dividing ``den``."""
    out = {}
    for n in names:
        d = rng.choice([q for q in range(1, 9) if den % q == 0])
        out[n] = Fraction(rng.randint(-6 * d, 6 * d), d)
    return out


# -- threshold-lattice evaluation ---------------------------------------------

def _key(t: Term) -> tuple:
    tn, _ = t.integer_normal()
    if tn.coeffs and tn.coeffs[0][1] < 0:
        tn = -tn
    return tn.coeffs, tn.const


def _terms(f: Formula) -> list[Term]:
    if isinstance(f, Atom):
        return [f.term]
    if isinstance(f, (And, Or)):
        return [t for a in f.args for t in _terms(a)]
    if isinstance(f, Not):
        return _terms(f.arg)
    if isinstance(f, (Exists, Forall)):
        return _terms(f.body)
    return []


def _bound(f: Formula) -> set[str]:
    if isinstance(f, (And, Or)):
        return set().union(*(_bound(a) for a in f.args))
    if isinstance(f, Not):
        return _bound(f.arg)
    if isinstance(f, (Exists, Forall)):
        return {f.var} | _bound(f.body)
    return set()


def projection_set(terms, eliminate) -> list[Term]:
    """Close ``terms`` under pairwise combination cancelling each variable of
    ``eliminate`` in turn, keeping only terms free of those variables. Every
    atom of any quantifier-free equivalent is (a multiple of) one of these."""
    current = {_key(t): t for t in terms if not t.is_constant()}
    for w in eliminate:
        with_w = [t for t in current.values() if t.coeff(w) != 0]
        nxt = {k: t for k, t in current.items() if t.coeff(w) == 0}
        for i, a in enumerate(with_w):
            for b in with_w[i + 1:]:
                c = a.scale(b.coeff(w)) - b.scale(a.coeff(w))
                if not c.is_constant():
                    nxt.setdefault(_key(c), c)
        current = nxt
    return list(current.values())


def _candidates(body: Formula, var: str, env: dict) -> list[Fraction]:
    inner = sorted(_bound(body) - {var})
    subst = {k: Term.constant(v) for k, v in env.items()}
    terms = [t.substitute(subst) for t in _terms(body)]
    roots = set()
    for t in projection_set(terms, inner):
        a = t.coeff(var)
        if a != 0 and t.variables == {var}:
            roots.add(-t.const / a)
    rs = sorted(roots)
    if not rs:
        return [Fraction(0)]
    pts = [rs[0] - 1] + rs + [rs[-1] + 1]
    pts += [(p + q) / 2 for p, q in zip(rs, rs[1:])]
    return pts


def oracle_eval(f: Formula, env: dict) -> bool:
    """Truth of ``f`` at ``env`` (covering its free variables) by exhaustive
    search over threshold-lattice witnesses."""
    if isinstance(f, _Const):
        return f.value
    if isinstance(f, Atom):
        v = f.term.evaluate(env)
        return v < 0 if f.rel == "<" else v <= 0 if f.rel == "<=" else v == 0
    if isinstance(f, And):
        return all(oracle_eval(a, env) for a in f.args)
    if isinstance(f, Or):
        return any(oracle_eval(a, env) for a in f.args)
    if isinstance(f, Not):
        return not oracle_eval(f.arg, env)
    if isinstance(f, (Exists, Forall)):
        env2 = {k: v for k, v in env.items() if k != f.var}
        cands = _candidates(f.body, f.var, env2)
        test = (oracle_eval(f.body, {**env2, f.var: c}) for c in cands)
        return any(test) if isinstance(f, Exists) else all(test)
    raise TypeError(f)


# -- vectorised exact evaluation over many points -------------------------------

class PointCloud:
    """Points with a common denominator, stored as int64 numerators."""

    def __init__(self, points: list[dict], names=FREE):
        self.names = tuple(names)
        self.points = points
        self.den = 1
        for p in points:
            for n in self.names:
                self.den = lcm(self.den, p[n].denominator)
        self.num = np.array([[int(p[n] * self.den) for n in self.names] for p in points], dtype=np.int64)

    def values(self, t: Term) -> np.ndarray:
        """``den * lcm * t`` at every point, exactly (sign-correct)."""
        scale = lcm(*(c.denominator for _, c in t.coeffs), t.const.denominator)
        out = np.full(len(self.points), int(t.const * scale) * self.den, dtype=np.int64)
        for name, c in t.coeffs:
            out += int(c * scale) * self.num[:, self.names.index(name)]
        return out

    def truth(self, f: Formula) -> np.ndarray:
        if f == TRUE:
            return np.ones(len(self.points), dtype=bool)
        if f == FALSE:
            return np.zeros(len(self.points), dtype=bool)
        if isinstance(f, Atom):
            v = self.values(f.term)
            return v < 0 if f.rel == "<" else v <= 0 if f.rel == "<=" else v == 0
        if isinstance(f, And):
            return np.logical_and.reduce([self.truth(a) for a in f.args])
        if isinstance(f, Or):
            return np.logical_or.reduce([self.truth(a) for a in f.args])
        if isinstance(f, Not):
            return ~self.truth(f.arg)
        raise TypeError(f"not quantifier-free: {f}")

    def sign_classes(self, terms) -> list[np.ndarray]:
        """Index groups of points sharing the sign of every term."""
        if not terms:
            return [np.arange(len(self.points))]
        signs = np.stack([np.sign(self.values(t)) for t in terms], axis=1).astype(np.int8)
        _, inverse = np.unique(signs, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        return [np.flatnonzero(inverse == k) for k in range(inverse.max() + 1)]


def disagreements(f: Formula, qf: Formula, cloud: PointCloud, direct: int = 10) -> list[dict]:
    """Points where the quantifier-free ``qf`` and the oracle on ``f`` differ.

    The truth value of ``f`` is constant on each sign class of its projection
    set, so the oracle runs once per class; the first ``direct`` points are
    additionally checked one by one.
    """
    got = cloud.truth(qf)
    bad = []
    bound = sorted(_bound(f))
    P = projection_set(_terms(f), bound)
    for idx in cloud.sign_classes(P):
        want = oracle_eval(f, cloud.points[idx[0]])
        for i in idx:
            if got[i] != want:
                bad.append(cloud.points[i])
    for i in range(min(direct, len(cloud.points))):
        if got[i] != oracle_eval(f, cloud.points[i]):
            bad.append(cloud.points[i])
    return bad



# -- finite chains --------------------------------------------------------------

def random_chain(rng: random.Random, n: int = 8, density: float = 0.3, absorbing: float = 0.15):
    """Sparse random chain with small-denominator rational rows."""
    from decisive.finite_sts import FiniteSts
    rows = []
    for i in range(n):
        if rng.random() < absorbing:
            rows.append(tuple(Fraction(int(j == i)) for j in range(n)))
            continue
        support = [j for j in range(n) if rng.random() < density] or [rng.randrange(n)]
        weights = [rng.randint(1, 6) for _ in support]
        total = sum(weights)
        row = [Fraction(0)] * n
        for j, w in zip(support, weights):
            row[j] = Fraction(w, total)
        rows.append(tuple(row))
    return FiniteSts(tuple(rows))


def random_subset(rng: random.Random, n: int, p: float = 0.3) -> frozenset[int]:
    return frozenset(i for i in range(n) if rng.random() < p)


def gamblers_ruin(N: int = 20, up: Fraction = Fraction(7, 10)):
    """Walk on 0..N absorbed at both ends."""
    from decisive.finite_sts import FiniteSts
    rows = []
    for i in range(N + 1):
        row = [Fraction(0)] * (N + 1)
        if i in (0, N):
            row[i] = Fraction(1)
        else:
            row[i + 1] = up
            row[i - 1] = 1 - up
        rows.append(tuple(row))
    return FiniteSts(tuple(rows))


def reflecting_walk(M: int, up: Fraction = Fraction(7, 10)):
    """Walk on 0..M absorbed at 0 and reflected at M.

    Nothing is a sure miss, as in the walk on all naturals, and from state 1
    the first ``M - 1`` steps coincide with that walk.
    """
    from decisive.finite_sts import FiniteSts
    rows = []
    for i in range(M + 1):
        row = [Fraction(0)] * (M + 1)
        if i == 0:
            row[0] = Fraction(1)
        else:
            row[min(i + 1, M)] += up
            row[i - 1] += 1 - up
        rows.append(tuple(row))
    return FiniteSts(tuple(rows))


def ruin_closed_form(i: int, N: int, up: Fraction) -> Fraction:
    """Probability of hitting 0 before N from ``i``."""
    r = (1 - up) / up
    return (r ** i - r ** N) / (1 - r ** N)


def value_iteration(T, B, tol: float = 1e-13, max_steps: int = 10**6) -> list[float]:
    """Float fixpoint iteration of ``x = 1_B + 1_{not B} K x`` from zero."""
    K = np.array([[float(v) for v in row] for row in T.kernel])
    b = np.zeros(T.n_states)
    inB = np.zeros(T.n_states, dtype=bool)
    for i in B:
        inB[i] = True
        b[i] = 1.0
    x = b.copy()
    for _ in range(max_steps):
        nx_ = np.where(inB, 1.0, K @ x)
        if np.max(np.abs(nx_ - x)) < tol:
            return list(nx_)
        x = nx_
    return list(x)
