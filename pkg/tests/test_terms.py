import random

import pytest

from helpers import (A_CONST, F, G, X, Y, Z, brute_force_unify, random_term)
from lctrs.terms import (AINT, BOOL, INT, App, Forall, FunctionSymbol, Namer,
                         Subst, TermError, Var, apply_substitution, free_vars,
                         is_logical, match, pos_str, rename_apart, replace_at,
                         sort_check, subterm_at, unify)
from lctrs.theory import (MINUS, PLUS, SELECT, THEORY_SYMBOLS, eq, mk,
                          value_term)

FACT = FunctionSymbol("fact", (INT,), INT, "term-symbol")
U = FunctionSymbol("u", (AINT, INT, INT, INT), INT, "term-symbol")
SUM4 = FunctionSymbol("sum4", (AINT, INT), INT, "term-symbol")
W = FunctionSymbol("w", (INT, INT), INT, "term-symbol")
ERROR = FunctionSymbol("error", (), INT, "term-symbol")

SIG = set(THEORY_SYMBOLS) | {FACT, U, SUM4, W, ERROR}


def fact(t):
    return App(FACT, (t,))


class TestSortCheck:
    def test_application(self):
        assert sort_check(fact(value_term(3)), SIG | {value_term(3).fn}) == INT

    def test_bare_variable(self):
        assert sort_check(X, SIG) == INT

    def test_sort_mismatch_reports_position(self):
        bad = App(FACT, (value_term(True),))
        with pytest.raises(TermError) as exc:
            sort_check(bad, SIG | {value_term(True).fn})
        assert exc.value.position == (1,)


class TestPositions:
    def test_direct_argument(self):
        t = fact(mk(MINUS, 3, 1))
        assert subterm_at(t, (1,)) == mk(MINUS, 3, 1)

    def test_root(self):
        t = fact(value_term(3))
        assert subterm_at(t, ()) == t

    def test_out_of_range(self):
        with pytest.raises(TermError):
            subterm_at(fact(value_term(3)), (1, 1))

    def test_replace(self):
        t = fact(mk(MINUS, 3, 1))
        assert replace_at(t, (1,), value_term(2)) == fact(value_term(2))

    def test_replace_root(self):
        assert replace_at(X, (), Y) == Y

    def test_replace_sort_mismatch(self):
        with pytest.raises(TermError):
            replace_at(fact(value_term(3)), (1,), value_term(True))

    def test_round_trip_random(self):
        rng = random.Random(7)
        for _ in range(200):
            t = random_term(rng)
            for p, s in t.subterms():
                assert replace_at(t, p, s) == t

    def test_pos_str(self):
        assert pos_str(()) == "e"
        assert pos_str((1, 2)) == "1.2"


class TestSubstitution:
    def test_example_2_3(self):
        body = App(F, (X, fact(mk(MINUS, X, 1))))
        out = apply_substitution(body, Subst({X: value_term(3)}))
        assert out == App(F, (value_term(3), fact(mk(MINUS, value_term(3), 1))))

    def test_identity(self):
        t = fact(X)
        assert apply_substitution(t, Subst({})) == t

    def test_sequential_composition(self):
        out = apply_substitution(apply_substitution(X, Subst({X: Y})), Subst({Y: Z}))
        assert out == Z

    def test_identity_bindings_dropped(self):
        assert Subst({X: X}).domain() == set()

    def test_sort_preserved(self):
        rng = random.Random(11)
        for _ in range(100):
            t = random_term(rng)
            g = Subst({X: random_term(rng, 1), Y: random_term(rng, 1)})
            assert apply_substitution(t, g).sort == t.sort


class TestMatch:
    def test_single_binding(self):
        g = match(fact(X), fact(value_term(3)))
        assert g == Subst({X: value_term(3)})

    def test_no_matching_modulo_theory(self):
        # 0+(x+y) does not match y+x: matching is syntactic
        pat = mk(PLUS, 0, mk(PLUS, X, Y))
        assert match(pat, mk(PLUS, Y, X)) is None

    def test_flat_tuple(self):
        a = Var("a", AINT)
        n, ret, i = Var("n", INT), Var("ret", INT), Var("i", INT)
        A = Var("A", AINT)
        subj = App(U, (A, value_term(2), value_term(0), value_term(0)))
        g = match(App(U, (a, n, ret, i)), subj)
        assert g == Subst({a: A, n: value_term(2), ret: value_term(0), i: value_term(0)})

    def test_soundness_random(self):
        rng = random.Random(3)
        for _ in range(300):
            pat = random_term(rng)
            g = Subst({v: random_term(rng, 1) for v in free_vars(pat)})
            subj = apply_substitution(pat, g)
            found = match(pat, subj)
            assert found is not None
            assert apply_substitution(pat, found) == subj


class TestUnify:
    def test_mgu_renaming(self):
        a, k = Var("a", AINT), Var("k", INT)
        a2, k2 = Var("a2", AINT), Var("k2", INT)
        g = unify(App(SUM4, (a, k)), App(SUM4, (a2, k2)))
        assert g is not None
        assert apply_substitution(App(SUM4, (a, k)), g) == apply_substitution(
            App(SUM4, (a2, k2)), g)

    def test_occurs_check(self):
        assert unify(X, App(G, (X,))) is None

    def test_nested(self):
        a, k, n, z = Var("a", AINT), Var("k", INT), Var("n", INT), Var("z", INT)
        s = App(W, (n, App(ERROR)))
        t = App(W, (App(SELECT, (a, mk(MINUS, k, 1))), z))
        g = unify(s, t)
        assert g is not None
        assert apply_substitution(s, g) == apply_substitution(t, g)
        assert g[n] == App(SELECT, (a, mk(MINUS, k, 1)))
        assert g[z] == App(ERROR)

    def test_soundness_random(self):
        rng = random.Random(5)
        for _ in range(300):
            s, t = random_term(rng), random_term(rng)
            g = unify(s, t)
            if g is not None:
                assert apply_substitution(s, g) == apply_substitution(t, g)

    def test_completeness_against_oracle(self):
        # on small pairs, unify must succeed whenever a ground unifier exists
        rng = random.Random(9)
        checked = 0
        for _ in range(400):
            s, t = random_term(rng, 2), random_term(rng, 2)
            if len(free_vars(s) | free_vars(t)) > 2:
                continue
            checked += 1
            if brute_force_unify(s, t):
                assert unify(s, t) is not None
        assert checked > 50

    def test_idempotent(self):
        rng = random.Random(13)
        for _ in range(200):
            s, t = random_term(rng, 2), random_term(rng, 2)
            g = unify(s, t)
            if g is not None:
                for _, bound in g.items():
                    assert apply_substitution(bound, g) == bound


class TestRenameApart:
    def test_clash(self):
        t = App(F, (X, Y))
        renamed, g = rename_apart(t, {"x"}, Namer())
        assert "x" not in {v.name for v in free_vars(renamed)}
        assert apply_substitution(t, g) == renamed

    def test_empty_forbidden_identity(self):
        t = App(F, (X, Y))
        renamed, g = rename_apart(t, set(), Namer())
        assert renamed == t

    def test_init_vars_keep_prefix(self):
        v1 = Var("v1", INT)
        t = App(G, (v1,))
        renamed, g = rename_apart(t, {"v1"}, Namer(), init_vars={"v1"})
        (new,) = free_vars(renamed)
        assert new.name.startswith("v") and new.name != "v1"


class TestForall:
    def test_binds_body_only(self):
        i = Var("i", INT)
        a = Var("a", AINT)
        q = Forall(i, value_term(0), i, eq(App(SELECT, (a, i)), value_term(0)))
        assert i in free_vars(q)  # via the hi bound
        q2 = Forall(i, value_term(0), X, eq(App(SELECT, (a, i)), value_term(0)))
        assert free_vars(q2) == {X, a}

    def test_substitution_capture_avoiding(self):
        i = Var("i", INT)
        a = Var("a", AINT)
        q = Forall(i, value_term(0), X, eq(App(SELECT, (a, i)), value_term(0)))
        out = apply_substitution(q, Subst({X: i}))
        # the bound variable must not capture the substituted i
        assert isinstance(out, Forall)
        assert out.hi == i
        assert out.var != i or out.body == q.body  # renamed, or i untouched

    def test_is_logical(self):
        assert is_logical(mk(PLUS, X, 1))
        assert not is_logical(fact(X))
