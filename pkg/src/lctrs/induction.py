"""Rewriting induction over constrained equations.

A proof state is a set of equations, a set of induction hypotheses
(oriented equations used as extra rewrite rules), a completeness flag and
a stack of ancestor snapshots.  Each inference transforms one state into
the next; a state with no equations left proves every initial equation,
and the Disprove inference refutes one by producing a witness.

Equations s ~ t [phi] are processed through a packing trick: both sides
are wrapped under a fresh pairing constructor so that a simplification or
expansion step on one side is literally a constrained rewrite step on a
single constrained term.  This keeps the constraint handling (fresh
variables, guard entailment) in one place — rules.constrained_reduce —
and is also what makes simplification sound when the redex shares
variables with the untouched side.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from functools import lru_cache

from . import solver
from .analysis import check_termination
from .constraints import simplify_constraint
from .rules import CalcRule, ConstrainedTerm, Rule, constrained_reduce
from .terms import (App, FunctionSymbol, Sort, Subst, Term, Var,
                    apply_substitution, default_namer, free_vars, is_logical,
                    TermError, pos_str, rename_apart, replace_at, subterm_at,
                    unify)
from .theory import (IMP, THEORY_SYMBOLS, TRUE_TERM, conj, eq, mk, neg, neq)


class ProofError(Exception):
    """An inference was attempted whose side conditions do not hold."""


@dataclass(frozen=True)
class Equation:
    """s ~ t [constraint]; ~ is symmetric but we keep a fixed layout.

    init_var_names records which variables stand for initial program
    inputs; they are protected from constraint simplification so that
    later generalization steps can still see their defining clauses.
    """

    lhs: Term
    rhs: Term
    constraint: Term = TRUE_TERM
    init_var_names: frozenset = frozenset()

    def __post_init__(self):
        assert self.lhs.sort == self.rhs.sort, "equation sides must share a sort"

    def variables(self):
        return free_vars(self.lhs) | free_vars(self.rhs) | \
            free_vars(self.constraint)

    def substituted(self, gamma):
        return replace(self,
                       lhs=apply_substitution(self.lhs, gamma),
                       rhs=apply_substitution(self.rhs, gamma),
                       constraint=apply_substitution(self.constraint, gamma))

    def swapped(self):
        return replace(self, lhs=self.rhs, rhs=self.lhs)

    def side(self, which):
        if which == "L":
            return self.lhs
        if which == "R":
            return self.rhs
        raise ProofError("side must be 'L' or 'R', not %r" % (which,))

    def __repr__(self):
        tag = " [%r]" % self.constraint if self.constraint != TRUE_TERM else ""
        return "%r ~ %r%s" % (self.lhs, self.rhs, tag)


@dataclass(frozen=True)
class ProofState:
    equations: tuple
    hypotheses: tuple = ()
    flag: str = "complete"  # complete | incomplete
    # snapshots (equations, hypotheses, reason) taken before each
    # completeness-losing step; used for Completeness and for backtracking
    ancestors: tuple = ()
    confluence_ok: bool = True

    def replace_equation(self, i, new_eqs):
        eqs = self.equations
        if not (0 <= i < len(eqs)):
            raise ProofError("no equation at index %d" % i)
        return replace(self, equations=eqs[:i] + tuple(new_eqs) + eqs[i + 1:])

    def __repr__(self):
        return "(%d eqs, %d hyps, %s, %d open)" % (
            len(self.equations), len(self.hypotheses), self.flag,
            len(self.ancestors))


@dataclass(frozen=True)
class Bot:
    """The refutation state: some initial equation is not a theorem."""

    equation: Equation
    case: str  # logical-diseq | constructor-clash | free-variable
    witness: dict


def initial_state(equations, confluence_ok=True):
    return ProofState(tuple(equations), (), "complete", (), confluence_ok)


# --- packing both sides under one constructor --------------------------------

@lru_cache(maxsize=None)
def _pair_symbol(sl, sr):
    return FunctionSymbol("~pair", (sl, sr), Sort("pair(%s,%s)" % (sl, sr)))


def _pack(eqn):
    root = App(_pair_symbol(eqn.lhs.sort, eqn.rhs.sort), (eqn.lhs, eqn.rhs))
    return ConstrainedTerm(root, eqn.constraint)


def _unpack(ct, init_var_names):
    l, r = ct.term.args
    return Equation(l, r, ct.constraint, init_var_names)


def _tidied(eqn):
    """Project constraint variables that no longer occur in either side."""
    prot = {v.name for v in free_vars(eqn.lhs) | free_vars(eqn.rhs)}
    prot |= set(eqn.init_var_names)
    return replace(eqn, constraint=simplify_constraint(eqn.constraint, prot))


def _position_in(side, p):
    return ((1,) if side == "L" else (2,)) + tuple(p)


# --- Expd: case analysis by one rewrite step ---------------------------------

def _is_basic(sub, defined):
    """f(l1..ln) with f defined and every li built from constructors."""

    def constructor_term(t):
        if isinstance(t, Var):
            return True
        if isinstance(t, App):
            if t.fn in defined:
                return False
            if t.fn.is_theory and not t.fn.is_value:
                return False
            return all(constructor_term(a) for a in t.args)
        return False

    return (isinstance(sub, App) and sub.fn in defined
            and all(constructor_term(a) for a in sub.args))


def expd(eqn, side, p, lctrs, namer=None):
    """All ways to rewrite eqn's `side` at p, one per applicable rule.

    Returns a list of (rule_index, equation) pairs; the rewritten side
    becomes the new equation's left-hand side.  Rules whose guard is
    jointly unsatisfiable with the constraint are dropped; an UNKNOWN
    verdict keeps the case (conservative).
    """
    namer = namer or default_namer
    s = eqn.side(side)
    t = eqn.side("R" if side == "L" else "L")
    defined = lctrs.classification().defined
    sub = subterm_at(s, p)
    if not _is_basic(sub, defined):
        raise ProofError("expansion position is not basic: %r" % (sub,))
    taken = {v.name for v in eqn.variables()}
    out = []
    for idx, rule in enumerate(lctrs.rules):
        rr, _ = rename_apart(rule, taken, namer,
                             init_vars=rule.init_var_names)
        gamma = unify(rr.lhs, sub)
        if gamma is None:
            continue
        phi_g = apply_substitution(eqn.constraint, gamma)
        psi_g = apply_substitution(rr.constraint, gamma)
        combined = conj(phi_g, psi_g)
        if solver.is_satisfiable(combined).kind == "UNSATISFIABLE":
            continue
        packed = App(_pair_symbol(s.sort, t.sort), (s, t))
        subject = ConstrainedTerm(apply_substitution(packed, gamma), combined)
        red = constrained_reduce(subject, rr, (1,) + tuple(p), hint=gamma,
                                 protected=eqn.init_var_names, namer=namer)
        if red is None:
            raise ProofError(
                "cannot perform the expansion step with rule %d on %r" %
                (idx, eqn))
        init = eqn.init_var_names | rr.init_var_names
        out.append((idx, _tidied(_unpack(red, init))))
    return out


# --- the inferences ----------------------------------------------------------

def apply_simplification(st, i, side, p, rule, hint=None, namer=None):
    """Rewrite one side of equation i with a rule from R, R_calc or H."""
    eqn = st.equations[i]
    red = constrained_reduce(_pack(eqn), rule, _position_in(side, p),
                             hint=hint, protected=eqn.init_var_names,
                             namer=namer)
    if red is None:
        raise ProofError("rule %s does not apply to equation %d at %s.%s" %
                         (getattr(rule, "name", rule), i, side, pos_str(p)))
    init = eqn.init_var_names | getattr(rule, "init_var_names", frozenset())
    return st.replace_equation(i, (_tidied(_unpack(red, init)),))


def apply_deletion(st, i):
    """Drop equation i: sides equal, or constraint unsatisfiable."""
    eqn = st.equations[i]
    if eqn.lhs != eqn.rhs and \
            solver.is_satisfiable(eqn.constraint).kind != "UNSATISFIABLE":
        raise ProofError("equation %d is neither trivial nor vacuous" % i)
    return st.replace_equation(i, ())


def apply_expansion(st, i, side, p, lctrs, add_rule=True, namer=None):
    """Case analysis on equation i at a basic position of one side.

    With add_rule the oriented equation joins the hypotheses, which is
    only sound while R together with all hypotheses terminates; we refuse
    unless that can be certified.
    """
    eqn = st.equations[i]
    expanded = eqn.side(side)
    other = eqn.side("R" if side == "L" else "L")
    new_eqs = [e for _, e in expd(eqn, side, p, lctrs, namer)]
    hyps = st.hypotheses
    if add_rule:
        if is_logical(expanded):
            raise ProofError("cannot orient equation %d: expanded side is "
                             "a logical term" % i)
        cand = Rule(expanded, other, eqn.constraint, origin="induction",
                    name="H%d" % len(hyps),
                    init_var_names=eqn.init_var_names)
        status, _ = check_termination(tuple(lctrs.rules) + hyps + (cand,))
        if status != "terminating":
            raise ProofError("cannot add hypothesis for equation %d: "
                             "termination not established" % i)
        hyps = hyps + (cand,)
    return replace(st.replace_equation(i, new_eqs), hypotheses=hyps)


def apply_eq_deletion(st, i, positions):
    """Move equal-modulo-theory subterm pairs into the constraint.

    positions locate pairwise-disjoint logical subterms si / ti over the
    constraint's variables, with equal surrounding contexts; the equation's
    constraint gains ¬(s1 = t1 ∧ ... ∧ sn = tn).
    """
    eqn = st.equations[i]
    positions = [tuple(p) for p in positions]
    if not positions:
        raise ProofError("eq-deletion needs at least one position")
    for a in positions:
        for b in positions:
            if a != b and a == b[:len(a)]:
                raise ProofError("eq-deletion positions must be disjoint")
    phi_vars = free_vars(eqn.constraint)
    pairs = []
    hl, hr = eqn.lhs, eqn.rhs
    for idx, p in enumerate(sorted(positions, key=len, reverse=True)):
        try:
            si = subterm_at(eqn.lhs, p)
            ti = subterm_at(eqn.rhs, p)
        except TermError as err:
            raise ProofError("position %s misses one side: %s" %
                             (pos_str(p), err)) from err
        if not (is_logical(si) and is_logical(ti) and si.sort == ti.sort):
            raise ProofError("subterms at %s are not logical" % pos_str(p))
        if not (free_vars(si) | free_vars(ti)) <= phi_vars:
            raise ProofError("subterms at %s use variables outside the "
                             "constraint" % pos_str(p))
        hole = Var("•eq%d" % idx, si.sort)
        hl = replace_at(hl, p, hole)
        hr = replace_at(hr, p, hole)
        pairs.append(eq(si, ti))
    if hl != hr:
        raise ProofError("contexts around the chosen positions differ")
    new_phi = conj(eqn.constraint, neg(conj(*pairs)))
    return st.replace_equation(i, (_tidied(replace(eqn, constraint=new_phi)),))


def _constructor_count(sort, constructors):
    if sort.is_theory_sort:
        return 2  # any theory sort has at least two values
    return len([c for c in constructors if c.output_sort == sort])


def apply_disprove(st, i, lctrs, ignore_flag=False):
    """Refute equation i, producing Bot, or refuse.

    Only allowed in complete states (unless probing with ignore_flag, as
    the search does when deciding whether to backtrack).
    """
    if st.flag != "complete" and not ignore_flag:
        raise ProofError("disprove needs a complete proof state")
    eqn = st.equations[i]
    cons = lctrs.classification().constructors
    for s, t in ((eqn.lhs, eqn.rhs), (eqn.rhs, eqn.lhs)):
        if is_logical(s) and is_logical(t) and s.sort.is_theory_sort \
                and not (isinstance(s, Var) and isinstance(t, Var)
                         and s not in free_vars(eqn.constraint)
                         and t not in free_vars(eqn.constraint)):
            sat = solver.is_satisfiable(conj(eqn.constraint, neq(s, t)))
            if sat.kind == "SATISFIABLE":
                return Bot(eqn, "logical-diseq", dict(sat.model.items() if sat.model else {}))
        if isinstance(s, App) and isinstance(t, App) \
                and s.fn in cons and t.fn in cons and s.fn != t.fn:
            sat = solver.is_satisfiable(eqn.constraint)
            if sat.kind == "SATISFIABLE":
                return Bot(eqn, "constructor-clash", dict(sat.model.items() if sat.model else {}))
        if isinstance(s, Var) and s not in free_vars(eqn.constraint) \
                and _constructor_count(s.sort, cons) >= 2:
            apart = (isinstance(t, Var) and t != s) or \
                (isinstance(t, App) and t.fn in cons)
            if apart:
                sat = solver.is_satisfiable(eqn.constraint)
                if sat.kind == "SATISFIABLE":
                    return Bot(eqn, "free-variable", dict(sat.model.items() if sat.model else {}))
    raise ProofError("no disproof case applies to equation %d" % i)


def apply_constructor(st, i, lctrs):
    """Split c(s1..sn) ~ c(t1..tn) into argument equations."""
    eqn = st.equations[i]
    cons = lctrs.classification().constructors
    if not (isinstance(eqn.lhs, App) and isinstance(eqn.rhs, App)
            and eqn.lhs.fn == eqn.rhs.fn and eqn.lhs.fn in cons):
        raise ProofError("equation %d has no shared constructor root" % i)
    parts = [replace(eqn, lhs=a, rhs=b)
             for a, b in zip(eqn.lhs.args, eqn.rhs.args)]
    return st.replace_equation(i, [_tidied(e) for e in parts])


def apply_generalization(st, i, new_eq, delta0):
    """Replace equation i by a more general one; costs completeness.

    delta0 witnesses that the old equation is an instance of the new: it
    must map new_eq's sides onto the old sides, and the old constraint
    must entail the instantiated new constraint.
    """
    eqn = st.equations[i]
    if isinstance(delta0, dict):
        delta0 = Subst(delta0)
    if apply_substitution(new_eq.lhs, delta0) != eqn.lhs or \
            apply_substitution(new_eq.rhs, delta0) != eqn.rhs:
        raise ProofError("generalization witness does not map onto "
                         "equation %d" % i)
    inst = apply_substitution(new_eq.constraint, delta0)
    if solver.is_valid(mk(IMP, eqn.constraint, inst)).kind != "VALID":
        raise ProofError("old constraint does not entail the instantiated "
                         "general constraint")
    snap = (st.equations, st.hypotheses, "generalization")
    return replace(st.replace_equation(i, (new_eq,)),
                   flag="incomplete", ancestors=st.ancestors + (snap,))


def apply_postulate(st, new_eqs):
    """Add unproven equations to work with; costs completeness."""
    new_eqs = tuple(new_eqs)
    if not new_eqs:
        raise ProofError("postulate needs at least one equation")
    snap = (st.equations, st.hypotheses, "postulate")
    return replace(st, equations=st.equations + new_eqs,
                   flag="incomplete", ancestors=st.ancestors + (snap,))


def apply_completeness(st):
    """Close the most recent open snapshot once its equations are covered.

    Applicable when every current equation already occurs in the snapshot;
    popping the last snapshot restores the complete flag, provided the
    rewrite system was known confluent when the proof started.
    """
    if not st.ancestors:
        raise ProofError("no open snapshot to close")
    snap_eqs, _, _ = st.ancestors[-1]
    if not set(st.equations) <= set(snap_eqs):
        raise ProofError("current equations are not covered by the most "
                         "recent snapshot")
    rest = st.ancestors[:-1]
    flag = "complete" if (not rest and st.confluence_ok) else st.flag
    return replace(st, ancestors=rest, flag=flag)


# --- replayable step records -------------------------------------------------

@dataclass(frozen=True)
class InferenceStep:
    kind: str
    target: int = -1
    side: str = ""
    position: tuple = ()
    rule_id: str = ""
    payload: object = None


def rule_id_of(rule, lctrs, st):
    if isinstance(rule, CalcRule):
        return "calc:%s" % rule.symbol.name
    for j, r in enumerate(lctrs.rules):
        if r is rule or r == rule:
            return "R%d" % j
    for j, r in enumerate(st.hypotheses):
        if r is rule or r == rule:
            return "H%d" % j
    raise ProofError("rule %r is not part of this proof" % (rule,))


def resolve_rule(rule_id, lctrs, st):
    if rule_id.startswith("calc:"):
        name = rule_id[len("calc:"):]
        for f in THEORY_SYMBOLS:
            if f.name == name and not f.is_value:
                return CalcRule(f)
        raise ProofError("unknown theory symbol %r" % name)
    try:
        if rule_id.startswith("R"):
            return lctrs.rules[int(rule_id[1:])]
        if rule_id.startswith("H"):
            return st.hypotheses[int(rule_id[1:])]
    except (ValueError, IndexError):
        pass
    raise ProofError("cannot resolve rule id %r" % rule_id)


def apply_step(st, step, lctrs, namer=None):
    """Dispatch one recorded inference; returns the next state or Bot."""
    k = step.kind
    if k == "simplification":
        rule = resolve_rule(step.rule_id, lctrs, st)
        return apply_simplification(st, step.target, step.side,
                                    step.position, rule, hint=step.payload,
                                    namer=namer)
    if k == "deletion":
        return apply_deletion(st, step.target)
    if k == "expansion":
        add_rule = True if step.payload is None else bool(step.payload)
        return apply_expansion(st, step.target, step.side, step.position,
                               lctrs, add_rule=add_rule, namer=namer)
    if k == "eq-deletion":
        return apply_eq_deletion(st, step.target, step.payload)
    if k == "disprove":
        return apply_disprove(st, step.target, lctrs)
    if k == "constructor":
        return apply_constructor(st, step.target, lctrs)
    if k == "generalization":
        new_eq, delta0 = step.payload
        return apply_generalization(st, step.target, new_eq, delta0)
    if k == "postulate":
        return apply_postulate(st, step.payload)
    if k == "completeness":
        return apply_completeness(st)
    raise ProofError("unknown inference kind %r" % k)


def trace_line(step):
    line = "STEP %s eq=%d side=%s pos=%s rule=%s" % (
        step.kind, step.target, step.side or "-", pos_str(step.position),
        step.rule_id or "-")
    if step.payload is not None:
        line += " payload=%r" % (step.payload,)
    return line


def state_digest(st):
    if isinstance(st, Bot):
        blob = "BOT %r %s" % (st.equation, st.case)
    else:
        blob = repr((st.equations, st.hypotheses, st.flag, st.ancestors))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def run_steps(st, steps, lctrs, namer=None):
    """Replay a step list; returns (final state or Bot, trace lines)."""
    lines = []
    for step in steps:
        st = apply_step(st, step, lctrs, namer=namer)
        lines.append("%s -> %s" % (trace_line(step), state_digest(st)))
        if isinstance(st, Bot):
            break
    return st, lines
