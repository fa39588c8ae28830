"""Concrete theories: core booleans, integers, finite integer arrays.

Holds the value <-> symbol bijection and the (total) interpretation J of
every theory symbol.  Totality conventions: div/mod by zero and exp with a
negative exponent give 0; select out of bounds gives 0; store out of bounds
leaves the array unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .terms import AINT, BOOL, INT, App, Forall, FunctionSymbol, Term, Var, is_logical


@dataclass(frozen=True)
class TheoryValue:
    sort: object
    payload: object  # bool | int | tuple[int, ...]

    def __repr__(self):
        if self.sort == AINT:
            return "<%s>" % ",".join(str(n) for n in self.payload)
        if self.sort == BOOL:
            return "true" if self.payload else "false"
        return str(self.payload)


def Int(n):
    return TheoryValue(INT, int(n))


def Bool(b):
    return TheoryValue(BOOL, bool(b))


def IntArray(elems):
    return TheoryValue(AINT, tuple(int(n) for n in elems))


TRUE = Bool(True)
FALSE = Bool(False)


@lru_cache(maxsize=None)
def value_symbol(tv: TheoryValue) -> FunctionSymbol:
    return FunctionSymbol(repr(tv), (), tv.sort, "value", tv.payload)


def value_term(x) -> Term:
    """Build the value term for a TheoryValue (or raw int/bool/tuple)."""
    if not isinstance(x, TheoryValue):
        if isinstance(x, bool):
            x = Bool(x)
        elif isinstance(x, int):
            x = Int(x)
        else:
            x = IntArray(x)
    return App(value_symbol(x))


def value_of(t: Term) -> TheoryValue:
    if isinstance(t, App) and t.fn.is_value:
        return TheoryValue(t.fn.output_sort, t.fn.payload)
    raise ValueError("not a value term: %r" % t)


# --- theory symbol table ----------------------------------------------------

def _sym(name, ins, out):
    return FunctionSymbol(name, tuple(ins), out, "theory-symbol")


PLUS = _sym("+", [INT, INT], INT)
MINUS = _sym("-", [INT, INT], INT)
TIMES = _sym("*", [INT, INT], INT)
DIV = _sym("div", [INT, INT], INT)
MOD = _sym("mod", [INT, INT], INT)
EXP = _sym("exp", [INT, INT], INT)
LE = _sym("<=", [INT, INT], BOOL)
LT = _sym("<", [INT, INT], BOOL)
GE = _sym(">=", [INT, INT], BOOL)
GT = _sym(">", [INT, INT], BOOL)
AND = _sym("and", [BOOL, BOOL], BOOL)
OR = _sym("or", [BOOL, BOOL], BOOL)
NOT = _sym("not", [BOOL], BOOL)
IMP = _sym("=>", [BOOL, BOOL], BOOL)
IFF = _sym("<=>", [BOOL, BOOL], BOOL)
SELECT = _sym("select", [AINT, INT], INT)
STORE = _sym("store", [AINT, INT, INT], AINT)
SIZE = _sym("size", [AINT], INT)


@lru_cache(maxsize=None)
def eq_symbol(sort):
    return _sym("=", (sort, sort), BOOL)


@lru_cache(maxsize=None)
def neq_symbol(sort):
    return _sym("!=", (sort, sort), BOOL)


THEORY_SYMBOLS = [PLUS, MINUS, TIMES, DIV, MOD, EXP, LE, LT, GE, GT,
                  AND, OR, NOT, IMP, IFF, SELECT, STORE, SIZE,
                  eq_symbol(INT), neq_symbol(INT), eq_symbol(BOOL), neq_symbol(BOOL),
                  eq_symbol(AINT), neq_symbol(AINT)]


# convenient constructors
def T(x):
    """Lift ints/bools/lists/TheoryValues to value terms; pass terms through."""
    return x if isinstance(x, Term) else value_term(x)


def mk(fn, *args):
    return App(fn, [T(a) for a in args])


def eq(a, b):
    a, b = T(a), T(b)
    return App(eq_symbol(a.sort), (a, b))


def neq(a, b):
    a, b = T(a), T(b)
    return App(neq_symbol(a.sort), (a, b))


def conj(*phis):
    phis = [p for p in phis if p != TRUE_TERM]
    if not phis:
        return TRUE_TERM
    out = phis[0]
    for p in phis[1:]:
        out = App(AND, (out, p))
    return out


def disj(*phis):
    if not phis:
        return FALSE_TERM
    out = phis[0]
    for p in phis[1:]:
        out = App(OR, (out, p))
    return out


def neg(phi):
    return App(NOT, (phi,))


TRUE_TERM = value_term(TRUE)
FALSE_TERM = value_term(FALSE)


def split_conj(phi):
    """Flatten top-level conjunction into a clause list (true -> [])."""
    if phi == TRUE_TERM:
        return []
    if isinstance(phi, App) and phi.fn == AND:
        return split_conj(phi.args[0]) + split_conj(phi.args[1])
    return [phi]


# --- interpretation J -------------------------------------------------------

def _jdiv(a, b):
    if b == 0:
        return 0
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _jmod(a, b):
    if b == 0:
        return 0
    return a - _jdiv(a, b) * b


def _jexp(a, b):
    return a ** b if b >= 0 else 0


def _jselect(arr, k):
    return arr[k] if 0 <= k < len(arr) else 0


def _jstore(arr, k, v):
    if 0 <= k < len(arr):
        return arr[:k] + (v,) + arr[k + 1:]
    return arr


INTERPRETATION = {
    PLUS: lambda a, b: a + b,
    MINUS: lambda a, b: a - b,
    TIMES: lambda a, b: a * b,
    DIV: _jdiv,
    MOD: _jmod,
    EXP: _jexp,
    LE: lambda a, b: a <= b,
    LT: lambda a, b: a < b,
    GE: lambda a, b: a >= b,
    GT: lambda a, b: a > b,
    AND: lambda a, b: a and b,
    OR: lambda a, b: a or b,
    NOT: lambda a: not a,
    IMP: lambda a, b: (not a) or b,
    IFF: lambda a, b: a == b,
    SELECT: _jselect,
    STORE: _jstore,
    SIZE: lambda a: len(a),
}


class EvalError(Exception):
    pass


def evaluate(t: Term) -> TheoryValue:
    """Evaluate a ground logical term to its unique value."""
    if isinstance(t, Var):
        raise EvalError("non-ground term: %r" % t)
    if isinstance(t, Forall):
        lo = evaluate(t.lo).payload
        hi = evaluate(t.hi).payload
        from .terms import apply_substitution, Subst
        for i in range(lo, hi + 1):
            inst = apply_substitution(t.body, Subst({t.var: value_term(Int(i))}))
            if not evaluate(inst).payload:
                return FALSE
        return TRUE
    f = t.fn
    if f.is_value:
        return TheoryValue(f.output_sort, f.payload)
    if not f.is_theory:
        raise EvalError("non-logical symbol %s" % f.name)
    args = [evaluate(a).payload for a in t.args]
    if f.name == "=":
        return Bool(args[0] == args[1])
    if f.name == "!=":
        return Bool(args[0] != args[1])
    fn = INTERPRETATION.get(f)
    if fn is None:
        raise EvalError("no interpretation for %s" % f.name)
    res = fn(*args)
    if f.output_sort == BOOL:
        return Bool(res)
    if f.output_sort == AINT:
        return IntArray(res)
    return Int(res)


def eval_ground_bool(phi: Term) -> bool:
    return bool(evaluate(phi).payload)


def evaluate_env(t: Term, env) -> object:
    """Evaluate under an environment mapping Var -> raw payload.

    Returns the raw python payload (bool / int / tuple) instead of a
    TheoryValue, avoids building substituted terms, and short-circuits the
    boolean connectives — the fast path for model enumeration.
    """
    if isinstance(t, Var):
        try:
            return env[t]
        except KeyError:
            raise EvalError("unbound variable %r" % t) from None
    if isinstance(t, Forall):
        lo = evaluate_env(t.lo, env)
        hi = evaluate_env(t.hi, env)
        inner = dict(env)
        for i in range(lo, hi + 1):
            inner[t.var] = i
            if not evaluate_env(t.body, inner):
                return False
        return True
    f = t.fn
    if f.is_value:
        return f.payload
    if f is AND:
        return evaluate_env(t.args[0], env) and evaluate_env(t.args[1], env)
    if f is OR:
        return evaluate_env(t.args[0], env) or evaluate_env(t.args[1], env)
    if f is IMP:
        return (not evaluate_env(t.args[0], env)) \
            or evaluate_env(t.args[1], env)
    if not f.is_theory:
        raise EvalError("non-logical symbol %s" % f.name)
    args = [evaluate_env(a, env) for a in t.args]
    if f.name == "=":
        return args[0] == args[1]
    if f.name == "!=":
        return args[0] != args[1]
    fn = INTERPRETATION.get(f)
    if fn is None:
        raise EvalError("no interpretation for %s" % f.name)
    return fn(*args)
