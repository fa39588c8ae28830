"""Constrained rewrite rules and the rewrite relations they generate.

A rule is lhs -> rhs [constraint]; calculation steps (evaluating a theory
symbol applied to values) are generated lazily rather than stored.  Plain
rewriting works on ground-ish terms; constrained reduction works on
[term | constraint] pairs and threads fresh-variable definitions through
the constraint, following the tractable patterns only.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import solver
from .constraints import simplify_constraint
from .terms import (BOOL, INT, App, Subst, Term, Var, apply_substitution,
                    default_namer, free_vars, is_logical, match, replace_at,
                    subterm_at)
from .theory import (EvalError, IMP, TRUE_TERM, conj, eq, evaluate, mk,
                     split_conj, value_term)


@dataclass(frozen=True)
class Rule:
    lhs: Term
    rhs: Term
    constraint: Term = TRUE_TERM
    origin: str = "user"  # user | calc | induction | translated
    name: str = ""
    init_var_names: frozenset = frozenset()  # Vinit members among our vars

    def __post_init__(self):
        assert self.lhs.sort == self.rhs.sort, "rule sides must share a sort"
        assert not is_logical(self.lhs), "lhs must not be a logical term"

    def lvar(self):
        return free_vars(self.constraint) | (free_vars(self.rhs) - free_vars(self.lhs))

    @property
    def is_irregular(self):
        return not self.lvar() <= free_vars(self.lhs)

    def variables(self):
        return free_vars(self.lhs) | free_vars(self.rhs) | free_vars(self.constraint)

    def substituted(self, gamma):
        init = set()
        for v, t in gamma.items():
            if v.name in self.init_var_names and isinstance(t, Var):
                init.add(t.name)
        for name in self.init_var_names:
            if not any(v.name == name for v in gamma.domain()):
                init.add(name)
        return replace(self,
                       lhs=apply_substitution(self.lhs, gamma),
                       rhs=apply_substitution(self.rhs, gamma),
                       constraint=apply_substitution(self.constraint, gamma),
                       init_var_names=frozenset(init))

    def __repr__(self):
        tag = " [%r]" % self.constraint if self.constraint != TRUE_TERM else ""
        return "%r -> %r%s" % (self.lhs, self.rhs, tag)


@dataclass(frozen=True)
class CalcRule:
    """f(x1..xn) -> y [y = f(x1..xn)] for a non-value theory symbol f."""
    symbol: object

    @property
    def name(self):
        return "calc:%s" % self.symbol.name

    origin = "calc"


@dataclass(frozen=True)
class ConstrainedTerm:
    term: Term
    constraint: Term = TRUE_TERM

    def variables(self):
        return free_vars(self.term) | free_vars(self.constraint)

    def substituted(self, gamma):
        return ConstrainedTerm(apply_substitution(self.term, gamma),
                               apply_substitution(self.constraint, gamma))

    def __repr__(self):
        return "[%r | %r]" % (self.term, self.constraint)


@dataclass(frozen=True)
class SymbolClassification:
    defined: frozenset
    constructors: frozenset


@dataclass(frozen=True)
class LCTRS:
    """A rule set together with the term signature it lives in."""
    rules: tuple
    signature: frozenset

    def classification(self):
        return classify_symbols(self.rules, self.signature)


def classify_symbols(rules, signature):
    defined = set()
    for r in rules:
        if isinstance(r.lhs, App):
            defined.add(r.lhs.fn)
    cons = {f for f in signature
            if f.kind in ("term-symbol", "value", "both-value") and f not in defined}
    return SymbolClassification(frozenset(defined), frozenset(cons))


# --- plain rewriting --------------------------------------------------------

@dataclass(frozen=True)
class RewriteStep:
    reduct: Term
    rule: object  # Rule | CalcRule
    position: tuple
    gamma: Subst
    irregular: bool = False


def _calc_step(t, p, s):
    if (isinstance(s, App) and s.fn.is_theory and not s.fn.is_value and s.args
            and all(isinstance(a, App) and a.fn.is_value for a in s.args)):
        try:
            v = value_term(evaluate(s))
        except EvalError:
            return None
        return RewriteStep(replace_at(t, p, v), CalcRule(s.fn), p, Subst({}))
    return None


def rewrite_step(t, rules):
    """All one-step reducts of t under rules + calculation steps."""
    out = []
    for p, s in t.subterms():
        c = _calc_step(t, p, s)
        if c:
            out.append(c)
        for r in rules:
            for step in _rule_steps_at(t, p, s, r):
                out.append(step)
    return out


def _rule_steps_at(t, p, s, r):
    g = match(r.lhs, s)
    if g is None:
        return
    lvar = r.lvar()
    fresh = sorted((v for v in lvar if v not in g.domain()
                    and v not in free_vars(r.lhs)), key=lambda v: v.name)
    irregular = False
    if fresh:
        # a fresh variable models input/randomness: take a solver witness
        phi = apply_substitution(r.constraint, g)
        sat = solver.is_satisfiable(phi)
        if sat.kind != "SATISFIABLE":
            return
        for v in fresh:
            img = sat.model.get(v)
            if img is None:
                img = value_term({INT: 0, BOOL: False}.get(v.sort, ()))
            g = g.extended(v, img)
        irregular = True
    for v in lvar:
        img = g[v]
        if not (isinstance(img, App) and img.fn.is_value):
            return
    phi = apply_substitution(r.constraint, g)
    try:
        if not evaluate(phi).payload:
            return
    except EvalError:
        return
    yield RewriteStep(replace_at(t, p, apply_substitution(r.rhs, g)),
                      r, p, g, irregular)


class FuelExhausted(Exception):
    def __init__(self, term, steps):
        super().__init__("no normal form within %d steps" % steps)
        self.term = term
        self.steps = steps


def _innermost_positions(t):
    """Positions with children before parents, left to right."""
    out = []

    def walk(p, s):
        if isinstance(s, App):
            for i, a in enumerate(s.args):
                walk(p + (i + 1,), a)
        out.append((p, s))

    walk((), t)
    return out


def normalize(t, rules, fuel=10000, choose_random_values=False):
    """Reduce to normal form with the leftmost-innermost strategy.

    Returns (normal_form, step_count); calculation steps count like rule
    steps.  Irregular (value-inventing) steps are refused unless
    choose_random_values is set.
    """
    steps = 0
    while True:
        if steps >= fuel:
            raise FuelExhausted(t, steps)
        chosen = None
        for p, s in _innermost_positions(t):
            chosen = _calc_step(t, p, s)
            if chosen:
                break
            for r in rules:
                for step in _rule_steps_at(t, p, s, r):
                    if step.irregular and not choose_random_values:
                        continue
                    chosen = step
                    break
                if chosen:
                    break
            if chosen:
                break
        if chosen is None:
            return t, steps
        t = chosen.reduct
        steps += 1


# --- constrained reduction --------------------------------------------------

def constrained_reduce(ct, rule, p, hint=None, protected=frozenset(),
                       namer=None, simplify=True):
    """One constrained-rewrite step at position p, or None.

    Implements the tractable slice of ~ . ->base . ~ : fresh variables are
    introduced through definition clauses, matchers must send logical-side
    variables to values or constraint variables, and the rule's guard must
    follow from the constraint (extended with the fresh definitions, whose
    existence is witness-checked).
    """
    namer = namer or default_namer
    s = subterm_at(ct.term, p)
    phi = ct.constraint
    keep = {v.name for v in ct.variables()} | set(protected)

    if isinstance(rule, CalcRule):
        if not (isinstance(s, App) and s.fn == rule.symbol and is_logical(s)):
            return None
        if all(isinstance(a, App) and a.fn.is_value for a in s.args):
            new_t = replace_at(ct.term, p, value_term(evaluate(s)))
            return ConstrainedTerm(new_t, phi)
        # reuse an existing definition clause v = s
        for c in split_conj(phi):
            if isinstance(c, App) and c.fn.name == "=":
                for l, rr in ((c.args[0], c.args[1]), (c.args[1], c.args[0])):
                    if rr == s and isinstance(l, Var):
                        return ConstrainedTerm(replace_at(ct.term, p, l), phi)
        if hint is not None and isinstance(hint, Var):
            z = hint
        else:
            z = Var(namer.fresh(), s.sort)
        return ConstrainedTerm(replace_at(ct.term, p, z), conj(phi, eq(z, s)))

    g = match(rule.lhs, s, hint)
    if g is None:
        return None
    ct_vars = ct.variables()
    lvar = rule.lvar()
    for v in lvar & g.domain():
        img = g[v]
        ok = (isinstance(img, App) and img.fn.is_value) or \
            (isinstance(img, Var) and img in free_vars(phi) | ct_vars)
        if not ok:
            return None
    psi = apply_substitution(rule.constraint, g)
    rhs = apply_substitution(rule.rhs, g)
    fresh = sorted((free_vars(psi) | free_vars(rhs)) - ct_vars,
                   key=lambda v: v.name)
    if fresh:
        # [s|phi] ~ [s|phi /\ psi] needs phi => exists fresh. psi
        verdict, _ = solver.solve_existential(phi, split_conj(psi), fresh)
        if verdict != "valid":
            return None
        new_phi = conj(phi, psi)
    else:
        if solver.is_valid(mk(IMP, phi, psi)).kind != "VALID":
            return None
        new_phi = phi
    new_t = replace_at(ct.term, p, rhs)
    out = ConstrainedTerm(new_t, new_phi)
    if simplify:
        prot = {v.name for v in free_vars(new_t)} | keep | \
            set(rule.init_var_names)
        out = ConstrainedTerm(new_t, simplify_constraint(new_phi, prot))
    return out


def _parallel_equations(s, t):
    """Positions where s and t differ, as var = term equations, or None."""
    eqs = []
    stack = [(s, t)]
    while stack:
        a, b = stack.pop()
        if a == b:
            continue
        if isinstance(a, App) and isinstance(b, App) and a.fn == b.fn:
            stack.extend(zip(a.args, b.args))
            continue
        if (isinstance(a, Var) or isinstance(b, Var)) and \
                is_logical(a) and is_logical(b) and a.sort == b.sort:
            eqs.append(eq(a, b))
            continue
        return None
    return eqs


def equivalent_constrained(a, b):
    """Do two constrained terms denote the same set of ground instances?

    Returns True / False / "unknown".  Terms may differ at positions where
    at least one side is a theory-sorted variable; those positions become
    equations joining the two constraints.
    """
    if a == b:
        return True
    eqs = _parallel_equations(a.term, b.term)
    if eqs is None:
        return False
    a_vars = a.variables()
    b_vars = b.variables()

    def direction(phi, psi_clauses, own_vars, other_vars):
        locals_ = sorted((set().union(*[free_vars(c) for c in psi_clauses])
                          if psi_clauses else set()) - own_vars,
                         key=lambda v: v.name)
        verdict, _ = solver.solve_existential(phi, psi_clauses, locals_)
        return verdict

    d1 = direction(a.constraint, split_conj(b.constraint) + eqs, a_vars, b_vars)
    d2 = direction(b.constraint, split_conj(a.constraint) + eqs, b_vars, a_vars)
    if d1 == "valid" and d2 == "valid":
        return True
    if d1 == "invalid" or d2 == "invalid":
        return False
    return "unknown"
