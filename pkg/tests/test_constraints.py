import random

from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import enumerate_models, random_constraint
from lctrs.constraints import (eliminate_store, introduce_range_quantifier,
                               push_negations, simplify_constraint)
from lctrs.terms import (AINT, App, Forall, INT, Subst, Var,
                         apply_substitution, free_vars)
from lctrs.theory import (GT, LE, LT, MINUS, PLUS, SELECT, SIZE, STORE,
                          conj, eq, eval_ground_bool, mk, neg, neq,
                          split_conj, value_term)

x = Var("x", INT)
y = Var("y", INT)
n = Var("n", INT)
arr = Var("a", AINT)


def models_projected(phi, keep):
    """Satisfying assignments restricted to the `keep` variable names."""
    out = set()
    for m in enumerate_models(phi):
        out.add(tuple(sorted((v.name, repr(m[v])) for v in m.domain()
                             if v.name in keep)))
    return out


class TestPushNegations:
    def test_negated_gt(self):
        assert push_negations(neg(mk(GT, x, y))) == mk(LE, x, y)

    def test_negated_eq(self):
        assert push_negations(neg(eq(x, y))) == neq(x, y)

    def test_double_negation(self):
        phi = mk(LE, x, 0)
        assert push_negations(neg(neg(phi))) == phi

    @given(st.integers(-3, 3), st.integers(-3, 3))
    def test_semantics_preserved(self, a, b):
        phi = neg(mk(GT, value_term(a), value_term(b)))
        assert eval_ground_bool(phi) == eval_ground_bool(push_negations(phi))


class TestSimplify:
    def test_redundant_bound_dropped(self):
        phi = conj(mk(LE, 0, n), mk(LT, n, mk(SIZE, arr)),
                   mk(LT, 0, mk(SIZE, arr)))
        out = split_conj(simplify_constraint(phi))
        assert mk(LT, 0, mk(SIZE, arr)) not in out
        assert len(out) == 2

    def test_duplicates_removed(self):
        c = mk(LE, x, y)
        assert split_conj(simplify_constraint(conj(c, c), protected={"x", "y"})) == [c]

    def test_fully_local_clause_vanishes(self):
        # with no protected context the whole clause is existential noise
        assert simplify_constraint(conj(mk(LE, x, y))) == value_term(True)

    def test_protected_definition_survives(self):
        v0 = Var("v0", INT)
        phi = conj(eq(v0, value_term(0)), mk(LE, v0, x))
        out = split_conj(simplify_constraint(phi, protected={"v0"}))
        assert eq(v0, value_term(0)) in out

    def test_dead_variable_clause_dropped(self):
        # y names a value used nowhere else; the clause is no constraint
        phi = conj(mk(LE, 0, x), eq(y, mk(PLUS, x, 1)))
        out = simplify_constraint(phi, protected={"x"})
        assert free_vars(out) == {x}

    def test_dead_variable_kept_when_protected(self):
        phi = conj(mk(LE, 0, x), eq(y, mk(PLUS, x, 1)))
        out = simplify_constraint(phi, protected={"x", "y"})
        assert y in free_vars(out)

    def test_equivalence_random(self):
        rng = random.Random(41)
        for _ in range(60):
            phi = random_constraint(rng, [x, y], depth=1)
            phi = conj(*[random_constraint(rng, [x, y], depth=1)
                         for _ in range(3)])
            out = simplify_constraint(phi, protected={"x"})
            assert models_projected(phi, {"x"}) == models_projected(out, {"x"})


class TestRangeQuantifier:
    def test_three_selects_grouped(self):
        phi = conj(*[neq(mk(SELECT, arr, k), 0) for k in range(3)])
        out = split_conj(introduce_range_quantifier(phi))
        assert len(out) == 1
        (q,) = out
        assert isinstance(q, Forall)
        assert (q.lo, q.hi) == (value_term(0), value_term(2))
        assert q.body == neq(mk(SELECT, arr, q.var), 0)

    def test_two_is_too_few(self):
        phi = conj(*[neq(mk(SELECT, arr, k), 0) for k in range(2)])
        assert introduce_range_quantifier(phi) == phi

    def test_symbolic_chain_via_definitions(self):
        v0, i1, i2 = Var("v0", INT), Var("i1", INT), Var("i2", INT)
        phi = conj(neq(mk(SELECT, arr, v0), 0), neq(mk(SELECT, arr, i1), 0),
                   neq(mk(SELECT, arr, i2), 0),
                   eq(i1, mk(PLUS, v0, 1)), eq(i2, mk(PLUS, i1, 1)),
                   eq(v0, value_term(0)))
        out = introduce_range_quantifier(phi, init_defs={v0: value_term(0)})
        quants = [c for c in split_conj(out) if isinstance(c, Forall)]
        assert len(quants) == 1
        q = quants[0]
        assert q.lo == value_term(0)  # init variable replaced by its value
        assert q.hi == i2
        # definition clauses survive
        assert eq(v0, value_term(0)) in split_conj(out)

    def test_absorb_adjacent_clause(self):
        j = Var("j", INT)
        k = Var("k", INT)
        q = Forall(j, value_term(0), k, neq(mk(SELECT, arr, j), 0))
        phi = conj(q, neq(mk(SELECT, arr, mk(PLUS, k, 1)), 0))
        out = split_conj(introduce_range_quantifier(phi))
        assert len(out) == 1
        assert out[0].hi == mk(PLUS, k, 1)

    def test_merge_abutting_quantifiers(self):
        j = Var("j", INT)
        body = neq(mk(SELECT, arr, j), 0)
        q1 = Forall(j, value_term(0), value_term(2), body)
        q2 = Forall(j, value_term(3), value_term(5), body)
        out = split_conj(introduce_range_quantifier(conj(q1, q2)))
        assert len(out) == 1
        assert (out[0].lo, out[0].hi) == (value_term(0), value_term(5))

    def test_equivalence_of_grouping(self):
        # the grouped form accepts exactly the same arrays
        phi = conj(*[neq(mk(SELECT, arr, k), 0) for k in range(3)])
        out = introduce_range_quantifier(phi)
        doms = [(1, 1, 1), (1, 0, 1), (1, 1, 1, 0), (2, -1, 1), ()]
        assert models_projected(phi, {"a"}) == models_projected(out, {"a"})


class TestStoreElimination:
    def test_basic(self):
        z = Var("z", AINT)
        yv = Var("yv", AINT)
        phi = conj(eq(z, mk(STORE, yv, 0, 1)), eq(mk(SIZE, z), 2))
        out, witness = eliminate_store(phi)
        assert witness is not None
        wy, wterm = witness
        assert wy == yv
        assert eq(mk(SELECT, z, value_term(0)), value_term(1)) in split_conj(out)
        assert yv not in free_vars(out)
        # same z-models before and after (y existentially chosen)
        assert models_projected(phi, {"z"}) == models_projected(out, {"z"})

    def test_live_array_not_touched(self):
        z = Var("z", AINT)
        yv = Var("yv", AINT)
        phi = conj(eq(z, mk(STORE, yv, 0, 1)), eq(mk(SIZE, yv), 2))
        out, witness = eliminate_store(phi)
        assert witness is None and out == phi

    def test_unknown_bounds_not_touched(self):
        z = Var("z", AINT)
        yv = Var("yv", AINT)
        phi = eq(z, mk(STORE, yv, x, 1))  # x unbounded: store may be oob
        out, witness = eliminate_store(phi)
        assert witness is None and out == phi
