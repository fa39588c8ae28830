"""Shared test utilities: term generators and brute-force oracles.

The oracles here are deliberately naive — they enumerate, they do not
reason — so they can act as independent ground truth for the clever code.
"""

import itertools
import random

from lctrs.terms import (AINT, BOOL, INT, App, FunctionSymbol, Subst, Var,
                         apply_substitution, free_vars)
from lctrs.theory import (AND, DIV, EvalError, GE, GT, LE, LT, MINUS, MOD,
                          NOT, OR, PLUS, SELECT, SIZE, TIMES, eq, evaluate,
                          mk, neq, value_term)

# a tiny uninterpreted signature for syntactic tests
F = FunctionSymbol("f", (INT, INT), INT, "term-symbol")
G = FunctionSymbol("g", (INT,), INT, "term-symbol")
H = FunctionSymbol("h", (INT,), INT, "term-symbol")
A_CONST = FunctionSymbol("a", (), INT, "term-symbol")
B_CONST = FunctionSymbol("b", (), INT, "term-symbol")

X = Var("x", INT)
Y = Var("y", INT)
Z = Var("z", INT)


def random_term(rng, depth=3, vars_=(X, Y, Z)):
    """A random first-order term over f/g/a/b and the given variables."""
    if depth == 0 or rng.random() < 0.3:
        pool = list(vars_) + [App(A_CONST), App(B_CONST)]
        return rng.choice(pool)
    f = rng.choice([F, G, H])
    return App(f, [random_term(rng, depth - 1, vars_) for _ in range(f.arity)])


def brute_force_unify(s, t, depth=2):
    """Enumerate substitutions over tiny ground terms; return True iff some
    binding makes s and t syntactically equal.  Ground-instances-only, so it
    witnesses unifiability (an mgu instance) but not most-generality."""
    vs = sorted(free_vars(s) | free_vars(t), key=lambda v: v.name)
    ground = [App(A_CONST), App(B_CONST), App(G, [App(A_CONST)]),
              App(F, [App(A_CONST), App(B_CONST)])]
    if depth >= 2:
        ground += [App(G, [g]) for g in list(ground)]
    for combo in itertools.product(ground, repeat=len(vs)):
        g = Subst(dict(zip(vs, combo)))
        if apply_substitution(s, g) == apply_substitution(t, g):
            return True
    return False


# --- constraint generation / brute-force model enumeration ------------------

INT_DOMAIN = [-2, -1, 0, 1, 2]
ARRAY_DOMAIN = [(), (0,), (1,), (-1,), (0, 1), (1, -1), (0, 1, -1)]


def random_int_expr(rng, vars_, depth=2):
    if depth == 0 or rng.random() < 0.4:
        if vars_ and rng.random() < 0.6:
            return rng.choice(vars_)
        return value_term(rng.randint(-3, 3))
    op = rng.choice([PLUS, MINUS, TIMES, DIV, MOD])
    return App(op, [random_int_expr(rng, vars_, depth - 1) for _ in range(2)])


def random_constraint(rng, vars_, depth=2):
    if depth == 0 or rng.random() < 0.3:
        op = rng.choice([LE, LT, GE, GT])
        l = random_int_expr(rng, vars_, 1)
        r = random_int_expr(rng, vars_, 1)
        if rng.random() < 0.3:
            return eq(l, r) if rng.random() < 0.5 else neq(l, r)
        return App(op, (l, r))
    c = rng.random()
    if c < 0.4:
        return App(AND, [random_constraint(rng, vars_, depth - 1) for _ in range(2)])
    if c < 0.8:
        return App(OR, [random_constraint(rng, vars_, depth - 1) for _ in range(2)])
    return App(NOT, (random_constraint(rng, vars_, depth - 1),))


def enumerate_models(phi, int_domain=INT_DOMAIN, array_domain=ARRAY_DOMAIN):
    """All satisfying assignments of phi with variables restricted to the
    given finite domains; the reference semantics for solver tests."""
    vs = sorted(free_vars(phi), key=lambda v: v.name)
    doms = []
    for v in vs:
        if v.sort == AINT:
            doms.append([value_term(a) for a in array_domain])
        elif v.sort == BOOL:
            doms.append([value_term(True), value_term(False)])
        else:
            doms.append([value_term(n) for n in int_domain])
    out = []
    for combo in itertools.product(*doms):
        g = Subst(dict(zip(vs, combo)))
        try:
            if evaluate(apply_substitution(phi, g)).payload:
                out.append(g)
        except EvalError:
            pass
    return out
