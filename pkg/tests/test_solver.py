import os
import random
import stat

import pytest

from helpers import enumerate_models, random_constraint
from lctrs.terms import (AINT, App, Forall, INT, Subst, Var,
                         apply_substitution, free_vars)
from lctrs.theory import (DIV, GE, GT, IMP, IntArray, Int, LE, LT, MINUS,
                          PLUS, SELECT, SIZE, STORE, TIMES, conj, disj, eq,
                          eval_ground_bool, evaluate, mk, neg, neq,
                          value_term)
from lctrs.solver import (Backend, find_small_coefficients, is_satisfiable,
                          is_valid, parse_model, search_model, to_smtlib)

x = Var("x", INT)
y = Var("y", INT)
z = Var("z", INT)
i = Var("i", INT)
n = Var("n", INT)
k = Var("k", INT)
a = Var("a", AINT)


def check_model(phi, verdict):
    """A claimed model must make the formula (or its negation) true."""
    g = verdict.model
    assert g is not None
    target = phi if verdict.kind == "SATISFIABLE" else neg(phi)
    assert eval_ground_bool(apply_substitution(target, g))


class TestValidity:
    def test_excluded_middle(self):
        assert is_valid(disj(mk(LE, x, 0), neg(mk(LE, x, 0)))).kind == "VALID"

    def test_bounds_conflict_invalid(self):
        phi = conj(mk(LT, i, n), mk(LE, n, mk(SIZE, a)), mk(GE, i, mk(SIZE, a)))
        v = is_valid(phi)
        assert v.kind == "INVALID"
        check_model(phi, v)
        # ... and the conjunction itself has no satisfying assignment
        assert is_satisfiable(phi).kind == "UNSATISFIABLE"

    def test_successor_invalid(self):
        v = is_valid(eq(x, mk(PLUS, x, 1)))
        assert v.kind == "INVALID"


class TestSatisfiability:
    def test_false(self):
        assert is_satisfiable(value_term(False)).kind == "UNSATISFIABLE"

    def test_guarded_oob_unsat(self):
        # i<0 or i>=size(a), under 0<=i', i'=i-1, i<k, k<=size(a)
        ip = Var("ip", INT)
        phi = conj(disj(mk(LT, i, 0), mk(GE, i, mk(SIZE, a))),
                   mk(LE, 0, ip), eq(ip, mk(MINUS, i, 1)),
                   mk(LT, i, k), mk(LE, k, mk(SIZE, a)))
        assert is_satisfiable(phi).kind == "UNSATISFIABLE"

    def test_accumulator_mismatch_sat(self):
        kp, x1, x2, r0, i0 = (Var(s, INT) for s in ("kp", "x1", "x2", "r0", "i0"))
        phi = conj(eq(kp, mk(MINUS, k, 1)), mk(LE, 0, kp),
                   mk(LT, kp, mk(SIZE, a)), eq(n, mk(SELECT, a, kp)),
                   eq(r0, mk(PLUS, x1, mk(SELECT, a, x2))),
                   eq(i0, mk(PLUS, x2, 1)), neq(r0, mk(PLUS, n, x1)))
        v = is_satisfiable(phi)
        assert v.kind == "SATISFIABLE"
        check_model(phi, v)

    def test_model_round_trip_random(self):
        rng = random.Random(23)
        for _ in range(150):
            phi = random_constraint(rng, [x, y], depth=2)
            v = is_satisfiable(phi)
            if v.kind == "SATISFIABLE":
                check_model(phi, v)
            elif v.kind == "UNSATISFIABLE":
                assert not enumerate_models(phi)

    def test_ground_agreement(self):
        # 1000 random ground constraints: solver verdict == direct evaluation
        rng = random.Random(29)
        for _ in range(1000):
            phi = random_constraint(rng, [], depth=2)
            v = is_satisfiable(phi)
            if eval_ground_bool(phi):
                assert v.kind == "SATISFIABLE"
            else:
                assert v.kind == "UNSATISFIABLE"


class TestNonlinear:
    def test_polynomial_identity_step(self):
        # 2z = i(i-1) and z' = z+i entail 2z' = i(i+1)
        zp = Var("zp", INT)
        prem = conj(eq(mk(TIMES, 2, z), mk(TIMES, i, mk(MINUS, i, 1))),
                    eq(zp, mk(PLUS, z, i)))
        concl = eq(mk(TIMES, 2, zp), mk(TIMES, i, mk(PLUS, i, 1)))
        assert is_valid(mk(IMP, prem, concl)).kind == "VALID"

    def test_halving_a_known_even_product(self):
        p = mk(TIMES, n, mk(PLUS, n, 1))
        prem = conj(eq(mk(TIMES, 2, z), p), eq(y, mk(DIV, p, 2)))
        assert is_valid(mk(IMP, prem, eq(z, y))).kind == "VALID"

    def test_nonlinear_disequality_sat(self):
        v = is_satisfiable(neq(mk(TIMES, x, x), mk(TIMES, 2, x)))
        assert v.kind == "SATISFIABLE"
        check_model(neq(mk(TIMES, x, x), mk(TIMES, 2, x)), v)


class TestArrays:
    def test_select_store_hit(self):
        phi = mk(IMP, conj(mk(LE, 0, i), mk(LT, i, mk(SIZE, a))),
                 eq(mk(SELECT, mk(STORE, a, i, 7), i), 7))
        assert is_valid(phi).kind == "VALID"

    def test_select_store_miss(self):
        phi = mk(IMP, neq(i, k),
                 eq(mk(SELECT, mk(STORE, a, i, 7), k), mk(SELECT, a, k)))
        assert is_valid(phi).kind == "VALID"

    def test_oob_select_default(self):
        phi = mk(IMP, mk(GE, i, mk(SIZE, a)), eq(mk(SELECT, a, i), 0))
        assert is_valid(phi).kind == "VALID"

    def test_store_preserves_size(self):
        phi = eq(mk(SIZE, mk(STORE, a, i, 9)), mk(SIZE, a))
        assert is_valid(phi).kind == "VALID"


class TestQuantifiers:
    def test_instantiation(self):
        b = Var("b", AINT)
        j = Var("j", INT)
        fa = Forall(j, value_term(0), n, eq(mk(SELECT, a, j), mk(SELECT, b, j)))
        phi = mk(IMP, conj(fa, mk(LE, 0, k), mk(LE, k, n)),
                 eq(mk(SELECT, a, k), mk(SELECT, b, k)))
        assert is_valid(phi).kind == "VALID"

    def test_range_extension(self):
        j = Var("j", INT)
        upto = Forall(j, value_term(0), mk(MINUS, n, 1), neq(mk(SELECT, a, j), 0))
        goal = Forall(j, value_term(0), n, neq(mk(SELECT, a, j), 0))
        phi = mk(IMP, conj(upto, neq(mk(SELECT, a, n), 0)), goal)
        assert is_valid(phi).kind == "VALID"

    def test_negated_forall_witness(self):
        j = Var("j", INT)
        fa = Forall(j, value_term(0), value_term(1), eq(mk(SELECT, a, j), 5))
        v = is_satisfiable(neg(fa))
        assert v.kind == "SATISFIABLE"
        check_model(neg(fa), v)


class TestCoefficientSearch:
    def test_zero_parameters(self):
        out = find_small_coefficients(mk(LE, 0, mk(TIMES, x, x)), [])
        assert out is not None and out == {}

    def test_out_of_range(self):
        c = Var("c", INT)
        assert find_small_coefficients(eq(c, value_term(3)), [c]) is None

    def test_measure_decrease(self):
        # a linear measure x - i + c for the loop body of a factorial count-up:
        # bounded below while the guard i <= x holds
        c = Var("c", INT)
        body = mk(IMP, mk(LE, i, x), mk(GE, mk(PLUS, mk(MINUS, x, i), c), 0))
        out = find_small_coefficients(body, [c])
        assert out is not None
        inst = apply_substitution(body, Subst({c: value_term(out[c])}))
        assert is_valid(inst).kind == "VALID"


class TestSmtlib:
    def test_deterministic(self):
        phi1 = conj(mk(LE, 0, i), mk(LT, i, mk(SIZE, a)))
        phi2 = conj(mk(LE, 0, i), mk(LT, i, mk(SIZE, a)))
        assert to_smtlib(phi1) == to_smtlib(phi2)

    def test_array_encoding(self):
        text = to_smtlib(neg(mk(GE, mk(SIZE, a), 0)))
        assert "(declare-const a_data (Array Int Int))" in text
        assert "(declare-const a_size Int)" in text
        assert "(assert (>= a_size 0))" in text
        assert "(check-sat)" in text

    def test_guarded_select(self):
        text = to_smtlib(eq(mk(SELECT, a, i), 0))
        assert "(ite (and (<= 0 i) (< i a_size)) (select a_data i) 0)" in text

    def test_quantifier(self):
        j = Var("j", INT)
        fa = Forall(j, value_term(0), mk(MINUS, n, 1), neq(mk(SELECT, a, j), 0))
        text = to_smtlib(fa)
        assert "(forall ((j Int))" in text
        assert "QF_" not in text

    def test_logic_strings(self):
        assert "(set-logic QF_LIA)" in to_smtlib(mk(LE, x, 0))
        assert "(set-logic QF_NIA)" in to_smtlib(mk(LE, mk(TIMES, x, x), 0))
        assert "ALIA" in to_smtlib(mk(LE, mk(SIZE, a), 0))


def _stub(tmp_path, body):
    p = tmp_path / "stubsolver"
    p.write_text("#!/bin/sh\n" + body + "\n")
    p.chmod(p.stat().st_mode | stat.S_IEXEC)
    return str(p)


# a formula the internal procedure cannot settle either way: satisfiable,
# but the witness x=10 lies outside the bounded search grid
HARD_SAT = conj(eq(mk(TIMES, x, x), value_term(100)), mk(GE, x, 4))


class TestExternalDriver:
    def test_unsat_answer(self, tmp_path):
        b = Backend(solver_cmd=_stub(tmp_path, "echo unsat"))
        assert b.is_satisfiable(HARD_SAT).kind == "UNSATISFIABLE"

    def test_sat_with_model(self, tmp_path):
        body = 'echo sat; echo "(model (define-fun x () Int 10))"'
        b = Backend(solver_cmd=_stub(tmp_path, body))
        v = b.is_satisfiable(HARD_SAT)
        assert v.kind == "SATISFIABLE"
        assert v.model[x] == value_term(10)

    def test_bogus_model_rejected(self, tmp_path):
        body = 'echo sat; echo "(model (define-fun x () Int 7))"'
        b = Backend(solver_cmd=_stub(tmp_path, body))
        assert b.is_satisfiable(HARD_SAT).kind == "UNKNOWN"

    def test_garbage_output(self, tmp_path):
        b = Backend(solver_cmd=_stub(tmp_path, "echo flurble"))
        assert b.is_satisfiable(HARD_SAT).kind == "UNKNOWN"

    def test_unknown_without_solver(self):
        assert Backend().is_satisfiable(HARD_SAT).kind == "UNKNOWN"

    def test_timeout_env(self, monkeypatch):
        monkeypatch.setenv("LCTRS_SMT_TIMEOUT_MS", "1234")
        assert Backend().timeout_ms == 1234

    def test_model_parsing_arrays(self):
        text = ("(model (define-fun a_size () Int 2)"
                " (define-fun a_data () (Array Int Int)"
                "  (store (store ((as const (Array Int Int)) 0) 0 5) 1 6)))")
        phi = mk(GE, mk(SIZE, a), 0)
        m = parse_model(text, phi)
        assert m[a] == value_term(IntArray((5, 6)))
