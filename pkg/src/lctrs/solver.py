"""Constraint validity/satisfiability over ints, bools and int arrays.

Two backends share one verdict type:

* an internal decision procedure (DNF + case-splitting on array/div
  operations, congruence of selects, Fourier-Motzkin style linear
  reasoning with integer tightening, Groebner reduction via sympy for
  polynomial equalities, bounded quantifier instantiation, and a model
  search for witnesses);
* an external SMT-LIB v2 solver spoken to over stdin/stdout.

The internal procedure is deliberately one-sided where completeness is
expensive: an UNSAT claim is always justified, a failure to close falls
back to model search, and everything else is UNKNOWN.  UNKNOWN never
produces YES/NO upstream.
"""

from __future__ import annotations

import itertools
import os
import subprocess
import time
from dataclasses import dataclass
from fractions import Fraction

import sympy

from .terms import (AINT, BOOL, INT, App, Forall, Subst, Var,
                    apply_substitution, free_vars)
from .theory import (AND, DIV, EXP, EvalError, FALSE_TERM, IFF, IMP, MOD, NOT,
                     OR, SELECT, SIZE, STORE, TRUE_TERM, conj, eq, evaluate,
                     evaluate_env, mk, neg, split_conj, value_term, Int, Bool,
                     IntArray, LE, LT, GE, GT, PLUS, MINUS, TIMES)

BRANCH_CAP = 3000
FM_CAP = 600


@dataclass
class SmtVerdict:
    kind: str  # VALID | INVALID | SATISFIABLE | UNSATISFIABLE | UNKNOWN
    model: object = None  # Subst to value terms
    reason: str = ""

    def __bool__(self):
        return self.kind in ("VALID", "SATISFIABLE")

    def __repr__(self):
        return self.kind if self.model is None else "%s%r" % (self.kind, self.model)


VALID = SmtVerdict("VALID")
UNSATISFIABLE = SmtVerdict("UNSATISFIABLE")


def _unknown(reason):
    return SmtVerdict("UNKNOWN", reason=reason)


class _TooBig(Exception):
    pass


_COMPARES = {"<=", "<", ">=", ">"}
_INT_OPS = {"+", "-", "*"}


class _Skolem:
    def __init__(self):
        self.n = 0

    def fresh(self, sort):
        self.n += 1
        return Var("sk%d" % self.n, sort)


def _is_true(t):
    return t == TRUE_TERM


def _is_false(t):
    return t == FALSE_TERM


def _dnf(t, pol, sk, cap=BRANCH_CAP):
    """Disjunctive normal form: list of branches, each a list of (atom, polarity)."""
    if isinstance(t, App):
        f = t.fn
        if f.is_value:
            tv = bool(f.payload) == pol
            return [[]] if tv else []
        name = f.name
        if f == NOT:
            return _dnf(t.args[0], not pol, sk, cap)
        if f == AND and pol or f == OR and not pol:
            left = _dnf(t.args[0], pol, sk, cap)
            right = _dnf(t.args[1], pol, sk, cap)
            if len(left) * len(right) > cap:
                raise _TooBig()
            return [a + b for a in left for b in right]
        if f == AND or f == OR:
            return _dnf(t.args[0], pol, sk, cap) + _dnf(t.args[1], pol, sk, cap)
        if f == IMP:
            return _dnf(App(OR, (App(NOT, (t.args[0],)), t.args[1])), pol, sk, cap)
        if f == IFF or (name in ("=", "!=") and t.args[0].sort == BOOL):
            a, b = t.args
            want = pol if name != "!=" else not pol
            both = App(AND, (a, b))
            neither = App(AND, (App(NOT, (a,)), App(NOT, (b,))))
            return _dnf(App(OR, (both, neither)), want, sk, cap)
    if isinstance(t, Forall):
        if pol:
            return [[(t, True)]]
        c = sk.fresh(INT)
        body = apply_substitution(t.body, Subst({t.var: c}))
        guard = conj(mk(LE, t.lo, c), mk(LE, c, t.hi))
        return _dnf(conj(guard, neg(body)), True, sk, cap)
    if isinstance(t, Var) and t.sort == BOOL:
        return [[(t, pol)]]
    return [[(t, pol)]]


# --- constant folding -------------------------------------------------------

def fold(t):
    """Evaluate ground theory subterms in place."""
    if isinstance(t, App):
        if t.fn.is_value or not t.args:
            return t
        args = [fold(a) for a in t.args]
        if t.fn.is_theory and all(isinstance(a, App) and a.fn.is_value for a in args):
            try:
                return value_term(evaluate(App(t.fn, args)))
            except EvalError:
                pass
        return App(t.fn, args)
    if isinstance(t, Forall):
        return Forall(t.var, fold(t.lo), fold(t.hi), fold(t.body))
    return t


# --- branch purification ----------------------------------------------------

def _select_cases(arr, idx):
    """Case analysis for select(arr, idx) with a non-variable array.

    Returns list of (extra_literals, value_term); cases jointly cover all
    models (overlap allowed).
    """
    if isinstance(arr, App) and arr.fn == STORE:
        base, i, e = arr.args
        szb = App(SIZE, (base,))
        inb_hit = [(mk(LE, value_term(Int(0)), i), True), (mk(LT, i, szb), True),
                   (eq(i, idx), True)]
        return [(inb_hit, e),
                ([(eq(i, idx), False)], App(SELECT, (base, idx))),
                ([(mk(LT, i, value_term(Int(0))), True)], App(SELECT, (base, idx))),
                ([(mk(GE, i, szb), True)], App(SELECT, (base, idx)))]
    if isinstance(arr, App) and arr.fn.is_value:
        elems = arr.fn.payload
        cases = [([(eq(idx, value_term(Int(k))), True)], value_term(Int(elems[k])))
                 for k in range(len(elems))]
        cases.append(([(mk(LT, idx, value_term(Int(0))), True)], value_term(Int(0))))
        cases.append(([(mk(GE, idx, value_term(Int(len(elems)))), True)], value_term(Int(0))))
        return cases
    return None


def _find_rewrite(t):
    """Locate the first subterm needing expansion.

    Returns (kind, subterm) where kind in {size, select, divmod} or None.
    """
    if isinstance(t, App):
        for a in t.args:
            r = _find_rewrite(a)
            if r:
                return r
        if t.fn == SIZE and not isinstance(t.args[0], Var):
            return ("size", t)
        if t.fn == SELECT and not isinstance(t.args[0], Var):
            return ("select", t)
        if t.fn in (DIV, MOD):
            d = t.args[1]
            if isinstance(d, App) and d.fn.is_value and d.fn.payload != 0:
                return ("divmod", t)
        if t.fn == EXP:
            e = t.args[1]
            if isinstance(e, App) and e.fn.is_value and 0 <= e.fn.payload <= 4:
                return ("exp", t)
    elif isinstance(t, Forall):
        # bounds only; the body is handled at instantiation time
        for a in (t.lo, t.hi):
            r = _find_rewrite(a)
            if r:
                return r
    return None


def _replace_term(t, old, new):
    if t == old:
        return new
    if isinstance(t, App) and t.args:
        return App(t.fn, [_replace_term(a, old, new) for a in t.args])
    if isinstance(t, Forall):
        return Forall(t.var, _replace_term(t.lo, old, new),
                      _replace_term(t.hi, old, new), _replace_term(t.body, old, new))
    return t


def _purify(branch, sk, cap=BRANCH_CAP):
    """Expand array/div/exp operations; returns a list of flat branches."""
    done = []
    work = [branch]
    steps = 0
    while work:
        steps += 1
        if steps > cap:
            raise _TooBig()
        lits = work.pop()
        lits = [(fold(a), p) for a, p in lits]
        # array-variable substitution from equalities x = A
        sub = None
        for a, p in lits:
            if (p and isinstance(a, App) and a.fn.name == "="
                    and a.args[0].sort == AINT):
                l, r = a.args
                if isinstance(l, Var) and l not in free_vars(r):
                    sub = (l, r, (a, p))
                    break
                if isinstance(r, Var) and r not in free_vars(l):
                    sub = (r, l, (a, p))
                    break
        if sub:
            v, repl, lit = sub
            g = Subst({v: repl})
            lits = [(apply_substitution(a, g), p) for a, p in lits if (a, p) != lit]
            work.append(lits)
            continue
        hit = None
        for k, (a, p) in enumerate(lits):
            r = _find_rewrite(a)
            if r:
                hit = (k, r)
                break
        if hit is None:
            done.append(lits)
            continue
        k, (kind, sub_t) = hit
        if kind == "size":
            arr = sub_t.args[0]
            if isinstance(arr, App) and arr.fn == STORE:
                new = App(SIZE, (arr.args[0],))
            else:  # value
                new = value_term(Int(len(arr.fn.payload)))
            work.append([(_replace_term(a, sub_t, new), p) for a, p in lits])
        elif kind == "select":
            cases = _select_cases(sub_t.args[0], sub_t.args[1])
            for extra, val in cases:
                nl = [(_replace_term(a, sub_t, val), p) for a, p in lits]
                work.append(nl + extra)
        elif kind == "divmod":
            a_t, b_t = sub_t.args
            bval = b_t.fn.payload
            q = sk.fresh(INT)
            r = sk.fresh(INT)
            div_t = App(DIV, (a_t, b_t))
            mod_t = App(MOD, (a_t, b_t))

            def sub_all(lits2):
                out = []
                for a, p in lits2:
                    a = _replace_term(a, div_t, q)
                    a = _replace_term(a, mod_t, r)
                    out.append((a, p))
                return out

            defn = [(eq(a_t, App(PLUS, (App(TIMES, (q, b_t)), r))), True)]
            bd = abs(bval) - 1
            pos = defn + [(mk(GE, a_t, value_term(Int(0))), True),
                          (mk(GE, r, value_term(Int(0))), True),
                          (mk(LE, r, value_term(Int(bd))), True)]
            neg_ = defn + [(mk(LT, a_t, value_term(Int(0))), True),
                           (mk(LE, r, value_term(Int(0))), True),
                           (mk(GE, r, value_term(Int(-bd))), True)]
            work.append(sub_all(lits) + pos)
            work.append(sub_all(lits) + neg_)
        elif kind == "exp":
            base, e_t = sub_t.args
            n = e_t.fn.payload
            prod = value_term(Int(1))
            for _ in range(n):
                prod = App(TIMES, (prod, base))
            work.append([(_replace_term(a, sub_t, fold(prod)), p) for a, p in lits])
    return done


# --- quantifier instantiation ----------------------------------------------

def _collect_indices(term, acc):
    if isinstance(term, App):
        if term.fn == SELECT:
            acc.append(term.args[1])
        for a in term.args:
            _collect_indices(a, acc)


def _instantiate_foralls(lits, sk, cap=BRANCH_CAP):
    """Add ground-instance clauses of positive ranged foralls; returns branches."""
    foralls = [a for a, p in lits if isinstance(a, Forall) and p]
    if not foralls:
        return [lits]
    cand = []
    for a, p in lits:
        if not isinstance(a, Forall):
            _collect_indices(a, cand)
    for f in foralls:
        cand.extend([f.lo, f.hi])
    seen, candidates = set(), []
    for c in cand:
        c = fold(c)
        if c not in seen:
            seen.add(c)
            candidates.append(c)
    branches = [list(lits)]
    for f in foralls:
        for c in candidates[:8]:
            body = fold(apply_substitution(f.body, Subst({f.var: c})))
            # clause: c < lo  \/  c > hi  \/  body
            try:
                disjuncts = (_dnf(mk(LT, c, f.lo), True, sk)
                             + _dnf(mk(GT, c, f.hi), True, sk)
                             + _dnf(body, True, sk))
            except _TooBig:
                continue
            if len(branches) * len(disjuncts) > cap:
                break
            branches = [br + d for br in branches for d in disjuncts]
    return branches


# --- linear + polynomial core ----------------------------------------------

class _Atoms:
    """Map opaque int terms (vars, selects, sizes, leftovers) to sympy symbols."""

    def __init__(self):
        self.sym_of = {}
        self.term_of = {}

    def get(self, t):
        s = self.sym_of.get(t)
        if s is None:
            s = sympy.Symbol("at%d" % len(self.sym_of))
            self.sym_of[t] = s
            self.term_of[s] = t
        return s

    def selects(self):
        return [(t, s) for t, s in self.sym_of.items()
                if isinstance(t, App) and t.fn == SELECT]

    def arrays(self):
        out = set()
        for t in self.sym_of:
            if isinstance(t, App) and t.fn in (SELECT, SIZE):
                out.add(t.args[0])
        return out


def _poly(t, atoms):
    if isinstance(t, App):
        if t.fn.is_value:
            return sympy.Integer(t.fn.payload)
        if t.fn.name in _INT_OPS:
            a = _poly(t.args[0], atoms)
            b = _poly(t.args[1], atoms)
            return {"+": a + b, "-": a - b, "*": a * b}[t.fn.name]
    return atoms.get(t)


def _lit_to_poly(a, p, atoms):
    """Literal -> ('le'|'eq'|'diseq', poly) with le meaning poly <= 0, or None."""
    if not isinstance(a, App):
        return None
    name = a.fn.name
    if name in _COMPARES:
        l, r = (_poly(a.args[0], atoms), _poly(a.args[1], atoms))
        # normalize to "expr <= 0" (strict forms tightened by +1: integers)
        if name == "<=":
            expr = (l - r) if p else (r - l + 1)
        elif name == "<":
            expr = (l - r + 1) if p else (r - l)
        elif name == ">=":
            expr = (r - l) if p else (l - r + 1)
        else:  # >
            expr = (r - l + 1) if p else (l - r)
        return ("le", sympy.expand(expr))
    if name in ("=", "!=") and a.args[0].sort == INT:
        expr = sympy.expand(_poly(a.args[0], atoms) - _poly(a.args[1], atoms))
        iseq = (name == "=") == p
        return ("eq" if iseq else "diseq", expr)
    return None


def _lin_dict(expr):
    """sympy Expr -> (dict sym->Fraction, const) if linear else None."""
    poly = sympy.Poly(expr, *sorted(expr.free_symbols, key=str)) if expr.free_symbols else None
    if poly is None:
        return {}, Fraction(str(sympy.nsimplify(expr)))
    if poly.total_degree() > 1:
        return None
    d = {}
    const = Fraction(0)
    for monom, coeff in poly.terms():
        c = Fraction(str(coeff))
        if sum(monom) == 0:
            const = c
        else:
            idx = monom.index(1)
            d[poly.gens[idx]] = c
    return d, const


def _fm_infeasible(les):
    """True if the conjunction of linear 'p <= 0' constraints has no rational
    solution (with light integer tightening).  False = unknown/feasible."""
    cons = []
    for d, c in les:
        # integer tightening: scale to integers, divide by gcd, floor constant
        denoms = [x.denominator for x in d.values()] + [c.denominator]
        m = 1
        for dn in denoms:
            m = m * dn // _gcd(m, dn)
        di = {s: int(x * m) for s, x in d.items()}
        ci = int(c * m)
        if di:
            g = 0
            for x in di.values():
                g = _gcd(g, abs(x))
            if g > 1:
                # sum di*x + ci <= 0  ->  sum (di/g)*x + ceil(ci/g) <= 0
                di = {s: x // g for s, x in di.items()}
                ci = -((-ci) // g)
        cons.append(({s: Fraction(x) for s, x in di.items()}, Fraction(ci)))
        if not di and ci > 0:
            return True
    # eliminate variables
    while True:
        syms = set()
        for d, c in cons:
            syms |= set(d)
        if not syms:
            return any(c > 0 for d, c in cons)
        # pick the symbol with the fewest pos*neg combinations
        best, best_cost = None, None
        for s in syms:
            pos = sum(1 for d, c in cons if d.get(s, 0) > 0)
            neg_ = sum(1 for d, c in cons if d.get(s, 0) < 0)
            cost = pos * neg_ - (pos + neg_)
            if best_cost is None or cost < best_cost:
                best, best_cost = s, cost
        s = best
        pos = [(d, c) for d, c in cons if d.get(s, 0) > 0]
        neg_ = [(d, c) for d, c in cons if d.get(s, 0) < 0]
        rest = [(d, c) for d, c in cons if not d.get(s, 0)]
        new = []
        for dp, cp in pos:
            for dn, cn in neg_:
                a, b = dp[s], -dn[s]
                d = {}
                for k in set(dp) | set(dn):
                    v = dp.get(k, Fraction(0)) * b + dn.get(k, Fraction(0)) * a
                    if v:
                        d[k] = v
                d.pop(s, None)
                c = cp * b + cn * a
                if not d and c > 0:
                    return True
                new.append((d, c))
        cons = rest + new
        if len(cons) > FM_CAP:
            return False
        if not pos or not neg_:
            cons = rest  # s unbounded on one side; drop its constraints


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


def _gauss_eliminate(eqs, les, diseqs):
    """Use linear equalities to substitute symbols; returns updated (les, diseqs)
    or 'unsat' if an equality is constantly false."""
    eqs = list(eqs)
    while eqs:
        expr = eqs.pop()
        lin = _lin_dict(expr)
        if lin is None:
            continue  # nonlinear equality left to the GB layer
        d, c = lin
        if not d:
            if c != 0:
                return "unsat"
            continue
        # solve for some symbol
        s = min(d, key=lambda k: (abs(d[k]) != 1, str(k)))
        coeff = d[s]
        repl = -sum((v / coeff) * k for k, v in d.items() if k != s) - c / coeff
        eqs = [sympy.expand(e.subs(s, repl)) for e in eqs]
        les = [sympy.expand(e.subs(s, repl)) for e in les]
        diseqs = [sympy.expand(e.subs(s, repl)) for e in diseqs]
    return les, diseqs


def _closure(lits):
    """True iff the flat conjunction of literals is definitely unsatisfiable."""
    atoms = _Atoms()
    les, eqs, diseqs = [], [], []
    bools = {}
    for a, p in lits:
        if _is_true(a):
            if not p:
                return True
            continue
        if _is_false(a):
            if p:
                return True
            continue
        if isinstance(a, Forall):
            continue  # already instantiated; inert here
        if isinstance(a, Var) or (isinstance(a, App) and a.sort == BOOL
                                  and a.fn.name not in _COMPARES
                                  and a.fn.name not in ("=", "!=")):
            key = a
            if key in bools and bools[key] != p:
                return True
            bools[key] = p
            continue
        if isinstance(a, App) and a.fn.name in ("=", "!=") and a.args[0].sort == AINT:
            continue  # post-purification leftovers; inert (sound to ignore)
        r = _lit_to_poly(a, p, atoms)
        if r is None:
            continue
        kind, expr = r
        {"le": les, "eq": eqs, "diseq": diseqs}[kind].append(expr)

    # size(a) >= 0 for every array mentioned
    for t, s in list(atoms.sym_of.items()):
        if isinstance(t, App) and t.fn == SIZE:
            les.append(-s + 0)

    # congruence: merge selects with provably-equal indices (two rounds)
    for _ in range(2):
        sel = atoms.selects()
        merged = False
        for i in range(len(sel)):
            for j in range(i + 1, len(sel)):
                (t1, s1), (t2, s2) = sel[i], sel[j]
                if t1.args[0] != t2.args[0]:
                    continue
                d1 = sympy.expand(_poly(t1.args[1], atoms) - _poly(t2.args[1], atoms))
                if d1 == 0:
                    e = s1 - s2
                elif _implied_zero(d1, eqs, les):
                    e = s1 - s2
                else:
                    continue
                if e not in eqs:
                    eqs.append(e)
                    merged = True
        if not merged:
            break

    # polynomial layer
    eqs = [e for e in eqs if e != 0]
    nonlinear = [e for e in eqs if _lin_dict(e) is None]
    if nonlinear:
        allsyms = sorted(set().union(*[e.free_symbols for e in eqs]) | set().union(
            *([e.free_symbols for e in les + diseqs] or [set()])), key=str)
        try:
            gb = sympy.groebner(eqs, *allsyms, order="grevlex")
            if list(gb.exprs) == [sympy.Integer(1)]:
                return True
            eqs = list(gb.exprs)
            les = [sympy.expand(gb.reduce(e)[1]) for e in les]
            diseqs = [sympy.expand(gb.reduce(e)[1]) for e in diseqs]
        except Exception:
            pass

    out = _gauss_eliminate(eqs, les, diseqs)
    if out == "unsat":
        return True
    les, diseqs = out
    lin_les = []
    for e in les:
        lin = _lin_dict(e)
        if lin is not None:
            lin_les.append(lin)
        elif _always_positive(e):
            return True  # p <= 0 with p provably > 0
        # other nonlinear inequalities dropped (sound for UNSAT)

    def feasible(extra, remaining_diseqs):
        if len(extra) + len(lin_les) > FM_CAP:
            return True
        for e in remaining_diseqs:
            lin = _lin_dict(e)
            if lin is None:
                continue
            d, c = lin
            if not d:
                if c == 0:
                    return False  # 0 != 0
                continue
            rest = [x for x in remaining_diseqs if x is not e]
            # e <= -1  or  e >= 1
            lo = (dict(d), c + 1)
            hi = ({k: -v for k, v in d.items()}, -c + 1)
            return feasible(extra + [lo], rest) or feasible(extra + [hi], rest)
        return not _fm_infeasible(lin_les + extra)

    return not feasible([], diseqs)


def _always_positive(expr):
    """Sufficient check that a polynomial is > 0 everywhere: every monomial
    has even exponents and a nonnegative coefficient, constant term > 0."""
    try:
        poly = sympy.Poly(expr, *sorted(expr.free_symbols, key=str))
    except sympy.PolynomialError:
        return False
    const = Fraction(0)
    for monom, coeff in poly.terms():
        if sum(monom) == 0:
            const = coeff
            continue
        if coeff < 0 or any(e % 2 for e in monom):
            return False
    return const > 0


def _implied_zero(expr, eqs, les):
    lin = _lin_dict(expr)
    if lin is None:
        return False
    d, c = lin
    if not d:
        return c == 0
    lin_eqs = []
    for e in eqs:
        l = _lin_dict(e)
        if l is not None:
            lin_eqs.append(l)
    lin_les = [l for l in (_lin_dict(e) for e in les) if l is not None]
    base = lin_les + [x for l in lin_eqs for x in (l, ({k: -v for k, v in l[0].items()}, -l[1]))]
    lo = (dict(d), c + 1)
    hi = ({k: -v for k, v in d.items()}, -c + 1)
    return _fm_infeasible(base + [lo]) and _fm_infeasible(base + [hi])


def _oob_split(lits):
    """Case-split each select on a variable array into in-bounds /
    below / above, fixing the out-of-bounds value to 0."""
    sels = []
    for a, p in lits:
        for _, t in a.subterms():
            if (isinstance(t, App) and t.fn == SELECT and isinstance(t.args[0], Var)
                    and t not in sels):
                sels.append(t)
    branches = [list(lits)]
    for t in sels[:6]:
        arr, idx = t.args
        sz = App(SIZE, (arr,))
        zero = (eq(t, value_term(Int(0))), True)
        cases = [[(mk(LE, value_term(Int(0)), idx), True), (mk(LT, idx, sz), True)],
                 [(mk(LT, idx, value_term(Int(0))), True), zero],
                 [(mk(GE, idx, sz), True), zero]]
        branches = [br + c for br in branches for c in cases]
        if len(branches) > BRANCH_CAP:
            return [lits]
    return branches


def _prove_unsat(phi):
    """True iff phi is definitely unsatisfiable."""
    sk = _Skolem()
    try:
        branches = _dnf(fold(phi), True, sk)
    except _TooBig:
        return False
    try:
        for br in branches:
            for flat in _purify(br, sk):
                for inst in _instantiate_foralls(flat, sk):
                    if not _closure(inst):
                        # second chance with out-of-bounds select axioms
                        if not all(_closure(b) for b in _oob_split(inst)):
                            return False
    except _TooBig:
        return False
    return True


# --- model search -----------------------------------------------------------

def _int_consts(phi, acc):
    if isinstance(phi, App):
        if phi.fn.is_value and phi.fn.output_sort == INT:
            acc.add(phi.fn.payload)
        for a in phi.args:
            _int_consts(a, acc)
    elif isinstance(phi, Forall):
        for a in (phi.lo, phi.hi, phi.body):
            _int_consts(a, acc)


def _propagate(clauses, asn):
    """Fix variables forced by equational clauses under partial assignment asn."""
    changed = True
    while changed:
        changed = False
        for cl in clauses:
            if not (isinstance(cl, App) and cl.fn.name == "="):
                continue
            l, r = cl.args
            for a, b in ((l, r), (r, l)):
                if isinstance(a, Var) and a not in asn:
                    g = apply_substitution(b, Subst(asn))
                    if not free_vars(g):
                        try:
                            asn[a] = value_term(evaluate(g))
                            changed = True
                        except EvalError:
                            pass
    return asn


_NEG_CMP = {}


def _init_neg_cmp():
    from .theory import eq_symbol, neq_symbol
    _NEG_CMP.update({LE: GT, LT: GE, GE: LT, GT: LE})
    for srt in (INT, BOOL, AINT):
        _NEG_CMP[eq_symbol(srt)] = neq_symbol(srt)
        _NEG_CMP[neq_symbol(srt)] = eq_symbol(srt)


_init_neg_cmp()


def _nnf(t, negated=False):
    """Push negations to the atoms; negated comparisons flip.

    Keeps search_model's clause splitting and propagation effective on
    queries like not(premise => conclusion).
    """
    if isinstance(t, App):
        f = t.fn
        if f == NOT:
            return _nnf(t.args[0], not negated)
        if f == AND or f == OR:
            g = f if not negated else (OR if f == AND else AND)
            return App(g, (_nnf(t.args[0], negated), _nnf(t.args[1], negated)))
        if f == IMP:
            if negated:
                return App(AND, (_nnf(t.args[0]), _nnf(t.args[1], True)))
            return App(OR, (_nnf(t.args[0], True), _nnf(t.args[1])))
        if negated and f in _NEG_CMP:
            return App(_NEG_CMP[f], tuple(t.args))
    return App(NOT, (t,)) if negated else t


# hard wall-clock cap per model search; enumeration over array values can
# otherwise stall a single query for minutes
_SEARCH_BUDGET = float(os.environ.get("LCTRS_SEARCH_BUDGET", "0.8"))


def search_model(phi, limit=20000, budget=None):
    """Bounded search for a satisfying assignment; returns Subst or None."""
    deadline = time.monotonic() + (_SEARCH_BUDGET if budget is None else budget)
    phi = fold(phi)
    fv = sorted(free_vars(phi), key=lambda v: v.name)
    if not fv:
        try:
            return Subst({}) if bool(evaluate(phi).payload) else None
        except EvalError:
            return None
    consts = set()
    _int_consts(phi, consts)
    near = set()
    for c in consts:
        if abs(c) <= 10:
            near |= {c - 1, c, c + 1}
    ints = sorted(set(range(-3, 4)) | near, key=lambda n: (abs(n), n < 0))
    elems = [n for n in ints if abs(n) <= 3][:6]
    arrays = [()]
    for ln in (1, 2, 3):
        arrays += [tpl for tpl in itertools.product(elems, repeat=ln)]
    arrays.sort(key=lambda a: (len(a), sum(abs(x) for x in a)))
    clauses = split_conj(phi)

    # pick a minimal set of "choice" variables; the rest are forced by
    # equational clauses once the choices are fixed (mirrors _propagate)
    base = _propagate(clauses, {})
    determined = set(base)
    undet = [v for v in fv if v not in determined]
    # vars sitting alone on one side of an equation are best left to
    # propagation; pick the others as search choices first
    defined = set()
    for cl in clauses:
        if isinstance(cl, App) and cl.fn.name == "=":
            for s, o in ((cl.args[0], cl.args[1]), (cl.args[1], cl.args[0])):
                if isinstance(s, Var) and s not in free_vars(o):
                    defined.add(s)
    undet.sort(key=lambda v: (v in defined, v.sort != AINT, v.name))
    choice_vars = []
    plan = []  # (var, defining expression) in evaluation order
    while undet:
        progress = True
        while progress:
            progress = False
            for cl in clauses:
                if not (isinstance(cl, App) and cl.fn.name == "="):
                    continue
                for a, b in ((cl.args[0], cl.args[1]), (cl.args[1], cl.args[0])):
                    if (isinstance(a, Var) and a not in determined
                            and free_vars(b) <= determined):
                        determined.add(a)
                        plan.append((a, b))
                        progress = True
            undet = [v for v in undet if v not in determined]
        if undet:
            v = undet.pop(0)
            choice_vars.append(v)
            determined.add(v)

    def cands(v):
        if v.sort == AINT:
            return [value_term(IntArray(a)) for a in arrays[:80]]
        if v.sort == BOOL:
            return [TRUE_TERM, FALSE_TERM]
        return [value_term(Int(n)) for n in ints]

    base_env = {v: t.fn.payload for v, t in base.items()}
    tried = 0
    for combo in itertools.product(*(cands(v) for v in choice_vars)):
        tried += 1
        if tried > limit:
            return None
        if tried % 256 == 0 and time.monotonic() > deadline:
            return None
        env = dict(base_env)
        for v, t in zip(choice_vars, combo):
            env[v] = t.fn.payload
        try:
            for v, e in plan:
                env[v] = evaluate_env(e, env)
            if all(evaluate_env(cl, env) for cl in clauses):
                return Subst({v: value_term(env[v]) for v in fv})
        except EvalError:
            continue
    return None


# --- public backend ---------------------------------------------------------

def _canon(phi):
    """Alpha-rename variables by first occurrence.

    Queries that differ only in variable names (the common case across
    proof-search restarts) share one cache entry; the returned map lets a
    cached model be translated back.
    """
    ren = {}

    def walk(t):
        if isinstance(t, Var):
            cv = ren.get(t)
            if cv is None:
                cv = ren[t] = Var("`%d" % len(ren), t.sort)
            return cv
        if isinstance(t, Forall):
            return Forall(walk(t.var), walk(t.lo), walk(t.hi), walk(t.body))
        if isinstance(t, App) and t.args:
            return App(t.fn, tuple(walk(a) for a in t.args))
        return t

    return walk(phi), ren


class Backend:
    """Verdict cache + optional external solver fallback."""

    def __init__(self, solver_cmd=None, timeout_ms=None):
        self.solver_cmd = solver_cmd
        self.timeout_ms = timeout_ms or int(os.environ.get("LCTRS_SMT_TIMEOUT_MS", "2000"))
        self._sat_cache = {}

    def is_satisfiable(self, phi, want_model=True, limit=20000):
        phi = fold(phi)
        cphi, ren = _canon(phi)
        v = self._sat_cache.get(cphi)
        if v is None:
            v = self._decide_sat(cphi, limit)
            self._sat_cache[cphi] = v
        if v.kind == "UNKNOWN" and self.solver_cmd:
            # the external script names the original variables, so run it
            # on the un-renamed formula and skip the cache
            ext = self._external(phi, expect_model=True)
            if ext is not None and ext.kind != "UNKNOWN":
                return ext
        if v.kind == "SATISFIABLE" and v.model is not None and ren:
            model = {v2: t for v2, t in v.model.items()}
            back = Subst({ov: model[cv] for ov, cv in ren.items()
                          if cv in model})
            return SmtVerdict("SATISFIABLE", model=back)
        return v

    def _decide_sat(self, phi, limit):
        if _is_false(phi):
            return UNSATISFIABLE
        phi = _nnf(phi)
        if _is_false(phi):
            return UNSATISFIABLE
        m = search_model(phi, limit=300)
        if m is not None:
            return SmtVerdict("SATISFIABLE", model=m)
        if _prove_unsat(phi):
            return UNSATISFIABLE
        m = search_model(phi, limit=limit)
        if m is not None:
            return SmtVerdict("SATISFIABLE", model=m)
        return _unknown("internal reasoner gave up")

    def is_valid(self, phi):
        v = self.is_satisfiable(neg(phi))
        if v.kind == "UNSATISFIABLE":
            return VALID
        if v.kind == "SATISFIABLE":
            return SmtVerdict("INVALID", model=v.model)
        return v

    def _external(self, phi, expect_model):
        try:
            script = to_smtlib(phi, mode="sat")
            out = _run_solver(self.solver_cmd, script, self.timeout_ms)
        except Exception as exc:  # noqa: BLE001 - any failure is just UNKNOWN
            return _unknown("solver failure: %s" % exc)
        if out is None:
            return _unknown("solver timeout")
        lines = out.strip().splitlines()
        if not lines:
            return _unknown("empty solver output")
        head = lines[0].strip()
        if head == "unsat":
            return UNSATISFIABLE
        if head == "sat":
            model = parse_model("\n".join(lines[1:]), phi)
            try:
                ok = bool(evaluate(apply_substitution(phi, model)).payload)
            except EvalError:
                ok = False
            if not ok:
                return _unknown("solver model failed verification")
            return SmtVerdict("SATISFIABLE", model=model)
        return _unknown("solver said: %s" % head)


_default_backend = Backend()


def get_backend():
    return _default_backend


def set_backend(b):
    global _default_backend
    _default_backend = b
    return b


def is_valid(phi):
    return _default_backend.is_valid(phi)


def is_satisfiable(phi, limit=20000):
    return _default_backend.is_satisfiable(phi, limit=limit)


def find_small_coefficients(template, params):
    """Search n_i in {-2..2} (lexicographic) making the template valid.

    params: ordered list of parameter Vars.  Returns dict or None.
    """
    for combo in itertools.product(range(-2, 3), repeat=len(params)):
        g = Subst({p: value_term(Int(n)) for p, n in zip(params, combo)})
        inst = apply_substitution(template, g)
        if is_valid(inst).kind == "VALID":
            return dict(zip(params, combo))
    return None


def _witness_candidates(v, clauses, remaining):
    """Candidate witness terms for an existential variable v."""
    occ = [c for c in clauses if v in free_vars(c)]
    if not occ:
        default = (Int(0) if v.sort == INT
                   else Bool(True) if v.sort == BOOL else IntArray(()))
        return [value_term(default)]
    eqs, bounds = [], []
    one = value_term(Int(1))
    for c in occ:
        if not (isinstance(c, App) and len(c.args) == 2):
            continue
        for s, o in ((c.args[0], c.args[1]), (c.args[1], c.args[0])):
            if s != v or v in free_vars(o):
                continue
            if any(u in free_vars(o) for u in remaining if u != v):
                continue
            name = c.fn.name
            if name == "=":
                eqs.append(o)
            elif o.sort == INT:
                if name in ("<=", ">="):
                    bounds.append(o)
                elif (name == ">") == (s is c.args[0]) and name in (">", "<"):
                    bounds.append(fold(App(PLUS, (o, one))))
                elif name in (">", "<"):
                    bounds.append(fold(App(MINUS, (o, one))))
    out = []
    for t in eqs + bounds:
        if t not in out:
            out.append(t)
    return out


def solve_existential(premise, clauses, locals_):
    """Decide is_valid(premise => exists locals_ . /\\ clauses) by witness
    construction.

    Witness candidates come from definitional clauses (v = t) and
    comparison bounds (v > t gives t+1, ...); a small backtracking search
    over at most a few candidates per variable instantiates all locals and
    the resulting implication goes through is_valid.  Returns ("valid",
    witness), ("invalid", {}) when no locals obscure the answer, or
    ("unknown", partial).
    """
    clauses = [fold(c) for c in clauses]
    locals_ = list(locals_)
    if not locals_:
        body = conj(*clauses) if clauses else TRUE_TERM
        v = is_valid(mk(IMP, premise, body))
        return ({"VALID": "valid", "INVALID": "invalid"}.get(v.kind, "unknown"),
                {})
    budget = [12]  # validity checks allowed

    def dfs(clauses, remaining, witness):
        if not remaining:
            if budget[0] <= 0:
                return None
            budget[0] -= 1
            body = conj(*clauses) if clauses else TRUE_TERM
            if is_valid(mk(IMP, premise, body)).kind == "VALID":
                return witness
            return None
        v, rest = remaining[0], remaining[1:]
        for cand in _witness_candidates(v, clauses, remaining)[:4]:
            g = Subst({v: cand})
            ext = dict(witness)
            ext[v] = cand
            got = dfs([fold(apply_substitution(c, g)) for c in clauses],
                      rest, ext)
            if got is not None:
                return got
        return None

    got = dfs(clauses, locals_, {})
    if got is not None:
        return "valid", got
    return "unknown", {}


# --- SMT-LIB serialization and the external driver --------------------------

def _smt_name(name):
    out = []
    for ch in name:
        out.append(ch if ch.isalnum() or ch == "_" else "_")
    return "".join(out) or "_"


def to_smtlib(phi, mode="sat"):
    """Deterministic SMT-LIB v2 script checking satisfiability of phi.

    Arrays become a `<v>_data` function-array plus an integer `<v>_size >= 0`;
    select/store are ite-guarded with the out-of-bounds conventions baked in.
    """
    phi = fold(phi)
    fv = sorted(free_vars(phi), key=lambda v: v.name)
    has_arrays = any(v.sort == AINT for v in fv) or any(
        isinstance(t, App) and t.fn in (SELECT, STORE, SIZE)
        for _, t in phi.subterms())
    has_quant = any(isinstance(t, Forall) for _, t in phi.subterms())
    has_mul = any(isinstance(t, App) and t.fn.name in ("*", "div", "mod", "exp")
                  for _, t in phi.subterms())
    logic = ("A" if has_arrays else "") + ("N" if has_mul else "L") + "IA"
    logic = (("" if has_quant else "QF_") + logic)

    decls = []
    for v in fv:
        n = _smt_name(v.name)
        if v.sort == AINT:
            decls.append("(declare-const %s_data (Array Int Int))" % n)
            decls.append("(declare-const %s_size Int)" % n)
            decls.append("(assert (>= %s_size 0))" % n)
        elif v.sort == BOOL:
            decls.append("(declare-const %s Bool)" % n)
        else:
            decls.append("(declare-const %s Int)" % n)

    def arr(t):
        """array expr -> (data sexpr, size sexpr)"""
        if isinstance(t, Var):
            n = _smt_name(t.name)
            return ("%s_data" % n, "%s_size" % n)
        if t.fn.is_value:
            data = "((as const (Array Int Int)) 0)"
            for i, e in enumerate(t.fn.payload):
                data = "(store %s %d %d)" % (data, i, e)
            return (data, str(len(t.fn.payload)))
        if t.fn == STORE:
            d, s = arr(t.args[0])
            i = go(t.args[1])
            e = go(t.args[2])
            inb = "(and (<= 0 %s) (< %s %s))" % (i, i, s)
            return ("(ite %s (store %s %s %s) %s)" % (inb, d, i, e, d), s)
        raise ValueError("unsupported array term %r" % t)

    def go(t):
        if isinstance(t, Var):
            return _smt_name(t.name)
        if isinstance(t, Forall):
            v = _smt_name(t.var.name)
            return ("(forall ((%s Int)) (=> (and (<= %s %s) (<= %s %s)) %s))"
                    % (v, go(t.lo), v, v, go(t.hi), go(t.body)))
        f = t.fn
        if f.is_value:
            if f.output_sort == BOOL:
                return "true" if f.payload else "false"
            if f.output_sort == INT:
                return str(f.payload) if f.payload >= 0 else "(- %d)" % -f.payload
            raise ValueError("array value outside array context")
        if f == SELECT:
            d, s = arr(t.args[0])
            i = go(t.args[1])
            return "(ite (and (<= 0 %s) (< %s %s)) (select %s %s) 0)" % (i, i, s, d, i)
        if f == SIZE:
            return arr(t.args[0])[1]
        if f.name in ("=", "!=") and t.args[0].sort == AINT:
            d1, s1 = arr(t.args[0])
            d2, s2 = arr(t.args[1])
            same = ("(and (= %s %s) (forall ((k Int)) (=> (and (<= 0 k) (< k %s))"
                    " (= (select %s k) (select %s k)))))" % (s1, s2, s1, d1, d2))
            return same if f.name == "=" else "(not %s)" % same
        ops = {"+": "+", "-": "-", "*": "*", "div": "div", "mod": "mod",
               "<=": "<=", "<": "<", ">=": ">=", ">": ">", "=": "=",
               "!=": "distinct", "and": "and", "or": "or", "not": "not",
               "=>": "=>", "<=>": "=", "exp": None}
        if f == EXP:
            # only constant exponents are serializable
            e = t.args[1]
            if isinstance(e, App) and e.fn.is_value and e.fn.payload >= 0:
                b = go(t.args[0])
                return "(* %s)" % " ".join([b] * e.fn.payload) if e.fn.payload else "1"
            raise ValueError("symbolic exponent not supported in SMT-LIB output")
        op = ops.get(f.name)
        if op is None:
            raise ValueError("unsupported symbol %s" % f.name)
        return "(%s %s)" % (op, " ".join(go(a) for a in t.args))

    body = go(phi if mode == "sat" else neg(phi))
    lines = ["(set-logic %s)" % logic] + decls + [
        "(assert %s)" % body, "(check-sat)", "(get-model)"]
    return "\n".join(lines) + "\n"


def _run_solver(cmd, script, timeout_ms):
    if isinstance(cmd, str):
        cmd = cmd.split()
    try:
        proc = subprocess.run(cmd, input=script.encode(), stdout=subprocess.PIPE,
                              stderr=subprocess.STDOUT, timeout=timeout_ms / 1000.0)
    except subprocess.TimeoutExpired:
        return None
    return proc.stdout.decode("utf-8", "replace")


def _sexprs(text):
    """Tolerant s-expression reader."""
    toks = text.replace("(", " ( ").replace(")", " ) ").split()
    out, stack = [], []
    for tok in toks:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if not stack:
                continue
            done = stack.pop()
            (stack[-1] if stack else out).append(done)
        else:
            (stack[-1] if stack else out).append(tok)
    return out


def parse_model(text, phi):
    """Parse (get-model) output into a Subst over phi's free variables."""
    fv = {v.name: v for v in free_vars(phi)}
    raw = {}
    for sx in _sexprs(text):
        items = sx
        if items and items[0] == "model":
            items = items[1:]
        for entry in items:
            if not isinstance(entry, list):
                continue
            if entry and entry[0] == "define-fun" and len(entry) >= 5:
                name, _args, _sort, val = entry[1], entry[2], entry[3], entry[4]
                raw[name] = val
            elif len(entry) == 2 and isinstance(entry[0], str):
                raw[entry[0]] = entry[1]

    def as_int(v):
        if isinstance(v, list):
            if v and v[0] == "-" and len(v) == 2:
                return -as_int(v[1])
            raise ValueError(v)
        return int(v)

    bindings = {}
    for name, var in fv.items():
        n = _smt_name(name)
        if var.sort == INT and n in raw:
            bindings[var] = value_term(Int(as_int(raw[n])))
        elif var.sort == BOOL and n in raw:
            bindings[var] = value_term(Bool(raw[n] == "true"))
        elif var.sort == AINT and ("%s_size" % n) in raw:
            size = max(0, as_int(raw["%s_size" % n]))
            elems = [0] * min(size, 64)

            def walk(v):
                # ((as const ...) d) or nested (store base i e)
                if isinstance(v, list) and v and v[0] == "store" and len(v) == 4:
                    walk(v[1])
                    i, e = as_int(v[2]), as_int(v[3])
                    if 0 <= i < len(elems):
                        elems[i] = e
                elif isinstance(v, list) and len(v) == 2 and isinstance(v[0], list):
                    d = as_int(v[1]) if not isinstance(v[1], list) else 0
                    for k in range(len(elems)):
                        elems[k] = d
            if ("%s_data" % n) in raw:
                try:
                    walk(raw["%s_data" % n])
                except (ValueError, TypeError):
                    pass
            bindings[var] = value_term(IntArray(elems))
    return Subst(bindings)
