import random

import pytest

from helpers import enumerate_models, random_constraint
from lctrs.terms import AINT, App, Forall, INT, Subst, Var, apply_substitution
from lctrs.theory import (Bool, DIV, EXP, EvalError, Int, IntArray, MINUS,
                          MOD, PLUS, SELECT, SIZE, STORE, TheoryValue, conj,
                          disj, eq, eval_ground_bool, evaluate, mk, neg, neq,
                          split_conj, value_of, value_symbol, value_term)


class TestValues:
    def test_bijection(self):
        # equal values share the symbol object, distinct values never do
        assert value_symbol(Int(3)) is value_symbol(Int(3))
        assert value_symbol(Int(3)) != value_symbol(Int(4))
        assert value_symbol(Int(1)) != value_symbol(Bool(True))
        assert value_of(value_term(IntArray((1, 2)))) == IntArray([1, 2])

    def test_reprs(self):
        assert repr(Int(-4)) == "-4"
        assert repr(Bool(True)) == "true"
        assert repr(IntArray((1, 2, 3))) == "<1,2,3>"


class TestEvaluate:
    def test_subtraction(self):
        assert evaluate(mk(MINUS, 3, 1)) == Int(2)

    def test_division_total(self):
        assert evaluate(mk(DIV, 5, 0)) == Int(0)
        assert evaluate(mk(MOD, 5, 0)) == Int(0)

    def test_division_truncates_toward_zero(self):
        assert evaluate(mk(DIV, -7, 2)) == Int(-3)
        assert evaluate(mk(MOD, -7, 2)) == Int(-1)
        assert evaluate(mk(DIV, 7, -2)) == Int(-3)

    def test_exp(self):
        assert evaluate(mk(EXP, 2, 10)) == Int(1024)
        assert evaluate(mk(EXP, 2, -1)) == Int(0)

    def test_select_out_of_bounds(self):
        assert evaluate(mk(SELECT, [-4, 9], 5)) == Int(0)
        assert evaluate(mk(SELECT, [-4, 9], -1)) == Int(0)
        assert evaluate(mk(SELECT, [-4, 9], 1)) == Int(9)

    def test_store(self):
        assert evaluate(mk(STORE, [1, 2], 0, 9)) == IntArray([9, 2])
        assert evaluate(mk(STORE, [1, 2], 7, 9)) == IntArray([1, 2])

    def test_size(self):
        assert evaluate(mk(SIZE, [5, 6, 7])) == Int(3)
        assert evaluate(mk(SIZE, [])) == Int(0)

    def test_non_ground_rejected(self):
        with pytest.raises(EvalError):
            evaluate(mk(PLUS, Var("x", INT), 1))

    def test_forall_range(self):
        i = Var("i", INT)
        body = neq(mk(SELECT, value_term(IntArray((1, 2, 3))), i), 0)
        assert eval_ground_bool(Forall(i, value_term(0), value_term(2), body))
        # element 3 would be out of range -> select gives 0
        assert not eval_ground_bool(Forall(i, value_term(0), value_term(3), body))

    def test_empty_range_is_true(self):
        i = Var("i", INT)
        assert eval_ground_bool(Forall(i, value_term(1), value_term(0), eq(i, 99)))

    def test_division_agrees_with_c_semantics(self):
        # oracle: Python's int() truncation on the float quotient
        rng = random.Random(1)
        for _ in range(500):
            a = rng.randint(-50, 50)
            b = rng.randint(-10, 10)
            if b == 0:
                continue
            q = evaluate(mk(DIV, a, b)).payload
            r = evaluate(mk(MOD, a, b)).payload
            assert q == int(a / b)
            assert q * b + r == a
            assert abs(r) < abs(b)


class TestConnectives:
    def test_conj_drops_true(self):
        a = eq(Var("x", INT), 1)
        assert conj(a) == a
        assert conj() == value_term(True)
        assert split_conj(conj(a, a)) == [a, a]

    def test_split_conj_flattens(self):
        a = eq(Var("x", INT), 1)
        b = eq(Var("y", INT), 2)
        c = eq(Var("z", INT), 3)
        assert split_conj(conj(conj(a, b), c)) == [a, b, c]

    def test_eval_connectives(self):
        assert eval_ground_bool(disj(value_term(False), value_term(True)))
        assert not eval_ground_bool(neg(value_term(True)))


class TestAgainstBruteForce:
    def test_random_ground_constraints(self):
        # evaluate() vs. an assignment-free enumerate_models run
        rng = random.Random(17)
        for _ in range(300):
            phi = random_constraint(rng, [], depth=2)
            models = enumerate_models(phi)
            assert bool(models) == eval_ground_bool(phi)
