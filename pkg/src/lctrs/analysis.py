"""Static preconditions for rewriting induction.

Three sufficient checks over a rule set: quasi-reductivity (every ground
non-constructor term reduces), termination (linear polynomial measures with
coefficients in {-2..2}), and confluence (constrained orthogonality).  All
are best-effort: a weak solver can only push an answer towards
false/unknown, never towards a wrong "yes".

Quasi-reductivity is decided through the pattern-cover recursion OK(x, A, b)
over a symbol's left-hand side patterns: columns of theory sort are absorbed
into universally quantified variables, columns of constructor sort are split
per constructor, and the leaf obligation is validity of the disjunction of
the surviving rule constraints.
"""

from __future__ import annotations

import itertools
import os
import time
from dataclasses import dataclass, replace

from . import solver
from .rules import classify_symbols, Rule
from .terms import (App, Forall, Subst, Term, Var, apply_substitution,
                    free_vars, rename_apart, replace_at, unify)
from .theory import (AINT, EvalError, GE, IMP, INT, PLUS, SIZE, TIMES,
                     TRUE_TERM, conj, disj, eq, evaluate_env, mk, neq,
                     split_conj, value_term)


# --- pattern cover ----------------------------------------------------------

@dataclass(frozen=True)
class OKProblem:
    """A cover problem: do the pattern rows in `pairs` reach every input?

    bound_vars are already-abstracted theory variables x1..xn; each pair is
    (pattern tuple, constraint), linear across the whole row including the
    bound variables; col_sorts gives the sort of each pattern column.
    """
    bound_vars: tuple
    col_sorts: tuple
    pairs: frozenset  # of (tuple of Term, Term)
    flag: str = "either"  # term | value | either


def _validate_problem(problem, constructors):
    heads_ok = {f for f in constructors if not f.is_value}
    for patterns, _phi in problem.pairs:
        if len(patterns) != len(problem.col_sorts):
            raise ValueError("pattern row length does not match col_sorts")
        seen = {v.name for v in problem.bound_vars}
        for t in patterns:
            for _p, s in t.subterms():
                if isinstance(s, Var):
                    if s.name in seen:
                        raise ValueError("non-linear pattern row: %r" % s)
                    seen.add(s.name)
                elif isinstance(s, App):
                    if s.fn.is_value:
                        raise ValueError("value in pattern: %r" % s)
                    if s.fn not in heads_ok:
                        raise ValueError(
                            "non-constructor symbol in pattern: %r" % s.fn)


def _elim_locals(phi, keep):
    """Existentially project definable variables: drop v=t, substitute t."""
    changed = True
    while changed:
        changed = False
        clauses = split_conj(phi)
        for c in clauses:
            if not (isinstance(c, App) and c.fn.name == "="):
                continue
            for a, b in ((c.args[0], c.args[1]), (c.args[1], c.args[0])):
                if (isinstance(a, Var) and a not in keep
                        and a not in free_vars(b)):
                    rest = [d for d in clauses if d is not c]
                    phi = apply_substitution(conj(*rest), Subst({a: b}))
                    changed = True
                    break
            if changed:
                break
    return phi


def _cover_base(xs, pairs):
    if not pairs:
        return False
    xset = set(xs)
    disjuncts = [_elim_locals(phi, xset) for _, phi in pairs]
    if all(free_vars(d) <= xset for d in disjuncts):
        return solver.is_valid(disj(*disjuncts)).kind == "VALID"
    # leftover existentials: sufficient to witness a single disjunct
    for d in disjuncts:
        locs = sorted(free_vars(d) - xset, key=lambda v: v.name)
        if not locs:
            if solver.is_valid(d).kind == "VALID":
                return True
        else:
            verdict, _ = solver.solve_existential(
                TRUE_TERM, split_conj(d), locs)
            if verdict == "valid":
                return True
    return False


def _fresh_namer(pairs, bound_vars):
    used = {v.name for v in bound_vars}
    for patterns, phi in pairs:
        for t in patterns + (phi,):
            used.update(v.name for v in free_vars(t))
    counter = [0]

    def fresh(sort):
        while True:
            counter[0] += 1
            name = "x%d" % counter[0]
            if name not in used:
                used.add(name)
                return Var(name, sort)

    return fresh


def ok(problem, constructors=frozenset()):
    """Does every ground instantiation of the columns match some row?

    constructors: the non-value constructor inventory (value constructors
    of theory sorts are implicit).  Raises ValueError on malformed input.
    """
    _validate_problem(problem, constructors)
    nonval = {}
    for f in constructors:
        if not f.is_value:
            nonval.setdefault(f.output_sort, []).append(f)
    for srt in nonval:
        nonval[srt].sort(key=lambda f: f.name)
    fresh = _fresh_namer(problem.pairs, problem.bound_vars)
    return _ok(tuple(problem.bound_vars), tuple(problem.col_sorts),
               frozenset(problem.pairs), problem.flag, nonval, fresh)


def _ok(xs, sorts, pairs, flag, nonval, fresh):
    if not sorts:
        return _cover_base(xs, pairs)
    k1 = sorts[0]

    if flag == "either":
        if not k1.is_theory_sort:
            return _ok(xs, sorts, pairs, "term", nonval, fresh)
        if not nonval.get(k1):
            return _ok(xs, sorts, pairs, "value", nonval, fresh)
        v_part = frozenset(p for p in pairs if isinstance(p[0][0], Var))
        t_part = frozenset(
            p for p in pairs
            if not (isinstance(p[0][0], Var) and p[0][0] in free_vars(p[1])))
        return (_ok(xs, sorts, v_part, "value", nonval, fresh)
                and _ok(xs, sorts, t_part, "term", nonval, fresh))

    if flag == "value":
        if any(not isinstance(row[0], Var) for row, _ in pairs):
            return False
        xn = fresh(k1)
        shifted = frozenset(
            (row[1:], apply_substitution(phi, Subst({row[0]: xn})))
            for row, phi in pairs)
        return _ok(xs + (xn,), sorts[1:], shifted, "either", nonval, fresh)

    # flag == "term"
    if all(isinstance(row[0], Var) for row, _ in pairs):
        if any(row[0] in free_vars(phi) for row, phi in pairs):
            return False  # a constrained variable cannot cover non-values
        return _ok(xs, sorts[1:],
                   frozenset((row[1:], phi) for row, phi in pairs),
                   "either", nonval, fresh)
    for f in nonval.get(k1, ()):
        branch = []
        for row, phi in pairs:
            head = row[0]
            if isinstance(head, Var):
                ys = tuple(fresh(m) for m in f.input_sorts)
                branch.append(
                    (ys + row[1:],
                     apply_substitution(phi, Subst({head: App(f, ys)}))))
            elif isinstance(head, App) and head.fn == f:
                branch.append((tuple(head.args) + row[1:], phi))
        if not _ok(xs, tuple(f.input_sorts) + sorts[1:],
                   frozenset(branch), "either", nonval, fresh):
            return False
    return True


# --- quasi-reductivity ------------------------------------------------------

@dataclass(frozen=True)
class QuasiReductivityReport:
    ok: bool
    failing_symbols: tuple = ()
    violations: tuple = ()

    def __bool__(self):
        return self.ok


def _hoist_lhs_values(rule):
    """Replace values in the lhs by fresh constrained variables."""
    lhs = rule.lhs
    used = {v.name for v in rule.variables()}
    extra = []
    k = 0
    for p, s in list(lhs.subterms()):
        if p and isinstance(s, App) and s.fn.is_value:
            while True:
                k += 1
                name = "hv%d" % k
                if name not in used:
                    used.add(name)
                    break
            v = Var(name, s.sort)
            lhs = replace_at(lhs, p, v)
            extra.append(eq(v, s))
    if not extra:
        return rule
    return replace(rule, lhs=lhs, constraint=conj(rule.constraint, *extra))


def _inhabited(sort, constructors):
    """Is there a ground constructor term of this sort?"""
    if sort.is_theory_sort:
        return True
    known = set()
    changed = True
    while changed:
        changed = False
        for f in constructors:
            if f.is_value or f.output_sort in known:
                continue
            if all(s.is_theory_sort or s in known for s in f.input_sorts):
                known.add(f.output_sort)
                changed = True
    return sort in known


def check_quasi_reductivity(lctrs):
    """Sufficient check: all ground non-constructor terms must reduce.

    Requires a left-linear constructor system (values in left-hand sides
    are hoisted into the constraint first); per defined symbol the lhs
    patterns must cover every ground constructor instantiation.
    """
    cls = classify_symbols(lctrs.rules, lctrs.signature)
    hoisted = [_hoist_lhs_values(r) for r in lctrs.rules]
    violations = []
    for r in hoisted:
        if not isinstance(r.lhs, App):
            violations.append("rule lhs is a variable: %r" % r)
            continue
        seen = set()
        linear = True
        for arg in r.lhs.args:
            for _p, s in arg.subterms():
                if isinstance(s, Var):
                    if s.name in seen:
                        linear = False
                    seen.add(s.name)
                elif isinstance(s, App) and s.fn not in cls.constructors:
                    violations.append(
                        "non-constructor pattern %r in %r" % (s, r))
        if not linear:
            violations.append("not left-linear: %r" % r)
    for f in sorted(cls.defined, key=lambda f: f.name):
        for srt in f.input_sorts:
            if not _inhabited(srt, cls.constructors):
                violations.append(
                    "uninhabited input sort %r of %s" % (srt, f.name))
    if violations:
        return QuasiReductivityReport(False, (), tuple(violations))

    nonval = frozenset(f for f in cls.constructors if not f.is_value)
    failing = []
    for f in sorted(cls.defined, key=lambda f: f.name):
        pairs = frozenset(
            (tuple(r.lhs.args), r.constraint)
            for r in hoisted if r.lhs.fn == f)
        problem = OKProblem((), tuple(f.input_sorts), pairs, "either")
        if not ok(problem, nonval):
            failing.append(f)
    return QuasiReductivityReport(not failing, tuple(failing), ())


# --- termination ------------------------------------------------------------

_COEFF_CAP = 6  # coefficient slots per strongly connected component


def _measurable(sort):
    return sort in (INT, AINT)


def _measure_arg(term):
    return term if term.sort == INT else App(SIZE, (term,))


def _measure_term(c0, coeffs, args):
    parts = []
    if c0:
        parts.append(value_term(c0))
    for c, a in zip(coeffs, args):
        if c is None or c == 0:
            continue
        m = _measure_arg(a)
        parts.append(m if c == 1 else mk(TIMES, c, m))
    if not parts:
        return value_term(0)
    out = parts[0]
    for p in parts[1:]:
        out = mk(PLUS, out, p)
    return out


def _call_graph(rules):
    defined = []
    for r in rules:
        if isinstance(r.lhs, App) and r.lhs.fn not in defined:
            defined.append(r.lhs.fn)
    dset = set(defined)
    direct = {f: set() for f in defined}
    for r in rules:
        for _p, s in r.rhs.subterms():
            if isinstance(s, App) and s.fn in dset:
                direct[r.lhs.fn].add(s.fn)
    reach = {}
    for f in defined:
        seen = set()
        stack = list(direct[f])
        while stack:
            g = stack.pop()
            if g in seen:
                continue
            seen.add(g)
            stack.extend(direct.get(g, ()))
        reach[f] = seen
    return defined, direct, reach


def _sccs(defined, reach):
    out = []
    assigned = set()
    for f in defined:
        if f in assigned:
            continue
        comp = [f] + [g for g in defined
                      if g != f and g in reach[f] and f in reach[g]]
        assigned.update(comp)
        out.append(comp)
    return out


def check_termination(rules):
    """("terminating", certificate) or ("unknown", None).

    Searches, per recursive call-graph component, a linear measure with
    coefficients in {-2..2}: int arguments count as themselves, arrays by
    their size, other sorts are ignored.  Every rule with a recursive call
    must keep its lhs measure nonnegative and strictly above the measure
    of each recursive call, both checked as constraint validity.
    """
    key = tuple(rules)
    hit = _termination_cache.get(key)
    if hit is not None:
        return hit
    res = _check_termination(key)
    _termination_cache[key] = res
    return res


_termination_cache = {}

# sparse, nonnegative measures first: they are the common certificates and
# fail fast when they do not work
_COEFF_ORDER = (0, 1, -1, 2, -2)


def _check_termination(rules):
    rules = list(rules)
    defined, _direct, reach = _call_graph(rules)
    certificate = {}
    for comp in _sccs(defined, reach):
        cset = set(comp)
        recursive = any(g in reach[g] for g in comp)
        slots = {f: [_measurable(s) for s in f.input_sorts] for f in comp}
        if not recursive:
            for f in comp:
                certificate[f] = (0, tuple(0 if m else None
                                           for m in slots[f]))
            continue
        obligations = []  # (constraint, lhs symbol+args, call symbol+args)
        for r in rules:
            if r.lhs.fn not in cset:
                continue
            calls = [s for _p, s in r.rhs.subterms()
                     if isinstance(s, App) and s.fn in cset]
            if calls:
                obligations.append((r.constraint, r.lhs, calls))
        layout = [(f, i) for f in comp
                  for i in range(1 + sum(slots[f]))]
        if len(layout) > _COEFF_CAP:
            return "unknown", None
        samples = _obligation_samples(obligations)
        deadline = time.monotonic() + _TERMINATION_BUDGET
        found = None
        for combo in itertools.product(_COEFF_ORDER, repeat=len(layout)):
            if time.monotonic() > deadline:
                return "unknown", None
            coeffs = {}
            pos = 0
            for f in comp:
                n = sum(slots[f])
                row = list(combo[pos:pos + 1 + n])
                pos += 1 + n
                c0, rest = row[0], row[1:]
                full = []
                it = iter(rest)
                for m in slots[f]:
                    full.append(next(it) if m else None)
                coeffs[f] = (c0, tuple(full))
            if _combo_plausible(coeffs, samples) \
                    and _combo_works(coeffs, obligations):
                found = coeffs
                break
        if found is None:
            return "unknown", None
        certificate.update(found)
    return "terminating", certificate


# combos are first screened numerically against sample models of each
# obligation's constraint; only survivors go to the solver
_TERMINATION_BUDGET = float(os.environ.get("LCTRS_TERMINATION_BUDGET", "10.0"))


def _obligation_samples(obligations, per=4):
    out = []
    for phi, lhs, calls in obligations:
        envs = []
        avoid = phi
        for _ in range(per):
            m = solver.search_model(avoid, limit=4000, budget=0.2)
            if m is None:
                break
            env = {v: t.fn.payload for v, t in m.items()}
            envs.append(env)
            picks = [neq(v, t) for v, t in m.items() if v.sort == INT]
            if not picks:
                break
            avoid = conj(avoid, picks[len(envs) % len(picks)])
        out.append((envs, lhs, calls))
    return out


def _measure_value(c0, coeffs, args, env):
    total = c0
    for c, a in zip(coeffs, args):
        if c is None or c == 0:
            continue
        val = evaluate_env(a, env)
        total += c * (len(val) if isinstance(val, tuple) else val)
    return total


def _combo_plausible(coeffs, samples):
    try:
        for envs, lhs, calls in samples:
            c0, cs = coeffs[lhs.fn]
            for env in envs:
                lhs_m = _measure_value(c0, cs, lhs.args, env)
                if lhs_m < 0:
                    return False
                for call in calls:
                    d0, ds = coeffs[call.fn]
                    if lhs_m < _measure_value(d0, ds, call.args, env) + 1:
                        return False
    except EvalError:
        return True
    return True


def _combo_works(coeffs, obligations):
    for phi, lhs, calls in obligations:
        c0, cs = coeffs[lhs.fn]
        lhs_m = _measure_term(c0, cs, lhs.args)
        if solver.is_valid(
                mk(IMP, phi, mk(GE, lhs_m, 0))).kind != "VALID":
            return False
        for call in calls:
            d0, ds = coeffs[call.fn]
            call_m = _measure_term(d0, ds, call.args)
            goal = mk(GE, lhs_m, mk(PLUS, call_m, 1))
            if solver.is_valid(mk(IMP, phi, goal)).kind != "VALID":
                return False
    return True


# --- confluence -------------------------------------------------------------

def check_confluence(lctrs):
    """("confluent", None) or ("unknown", reason).

    Accepts exactly the orthogonal-modulo-constraints systems: left-linear,
    no fresh right-hand variables (those make a rule nondeterministic), no
    theory symbols inside lhs patterns, and every overlap between renamed-
    apart rules has an unsatisfiable combined constraint.
    """
    rules = list(lctrs.rules)
    for r in rules:
        if not isinstance(r.lhs, App):
            return "unknown", "variable lhs: %r" % r
        names = [v.name for _p, v in r.lhs.subterms() if isinstance(v, Var)]
        if len(names) != len(set(names)):
            return "unknown", "not left-linear: %r" % r
        if free_vars(r.rhs) - free_vars(r.lhs):
            return "unknown", "irregular rule with fresh rhs variable: %r" % r
        for arg in r.lhs.args:
            for _p, s in arg.subterms():
                if isinstance(s, App) and s.fn.is_theory and not s.fn.is_value:
                    return "unknown", "theory symbol in lhs pattern: %r" % r
    for i, r1 in enumerate(rules):
        forbidden = {v.name for v in r1.variables()}
        for j, r2 in enumerate(rules):
            r2r, _g = rename_apart(r2, forbidden)
            for p, s in r1.lhs.subterms():
                if p == () and i == j:
                    continue  # a rule trivially overlaps itself at the root
                if not isinstance(s, App) or s.fn.is_value:
                    continue
                mgu = unify(s, r2r.lhs)
                if mgu is None:
                    continue
                both = conj(apply_substitution(r1.constraint, mgu),
                            apply_substitution(r2r.constraint, mgu))
                if solver.is_satisfiable(both).kind != "UNSATISFIABLE":
                    return "unknown", "overlap of rules %d and %d at %r" % (
                        i, j, p)
    return "confluent", None


# --- recursion analysis -----------------------------------------------------

class DependencyOrder:
    """Call-graph preorder on symbols.

    f leads to g when g occurs in the rhs of an f-rule; geq is the
    reflexive-transitive closure (through defined symbols), gt its strict
    part.
    """

    def __init__(self, leadsto, reach):
        self.leadsto = {f: frozenset(v) for f, v in leadsto.items()}
        self._reach = {f: frozenset(v) for f, v in reach.items()}

    def geq(self, f, g):
        return f == g or g in self._reach.get(f, frozenset())

    def gt(self, f, g):
        return self.geq(f, g) and not self.geq(g, f)

    def reachable(self, f):
        return self._reach.get(f, frozenset())


def dependency_order(rules):
    defined = {r.lhs.fn for r in rules if isinstance(r.lhs, App)}
    leadsto = {f: set() for f in defined}
    for r in rules:
        for _p, s in r.rhs.subterms():
            if isinstance(s, App):
                leadsto[r.lhs.fn].add(s.fn)
    reach = {}
    for f in defined:
        seen = set()
        stack = list(leadsto[f])
        while stack:
            g = stack.pop()
            if g in seen:
                continue
            seen.add(g)
            stack.extend(leadsto.get(g, ()))
        reach[f] = seen
    return DependencyOrder(leadsto, reach)


def _tail_shaped(f, rules, order):
    for r in rules:
        if r.lhs.fn != f:
            continue
        if isinstance(r.rhs, Var):
            continue
        if not isinstance(r.rhs, App):
            return False
        if not order.geq(f, r.rhs.fn):
            return False
        for arg in r.rhs.args:
            for _p, s in arg.subterms():
                if isinstance(s, App) and not order.gt(f, s.fn):
                    return False
    return True


def categorize_recursion(lctrs):
    """Classify every signature symbol; returns (categories, order).

    Defined symbols split into non-recursive, tail-recursive (every rule
    either returns a variable or calls strictly smaller symbols around a
    root the symbol may recurse through) and general-recursive; the rest
    are constructors or calculation symbols.
    """
    rules = [r for r in lctrs.rules if isinstance(r.lhs, App)]
    cls = classify_symbols(rules, lctrs.signature)
    order = dependency_order(rules)
    cats = {}
    for f in lctrs.signature:
        if f in cls.defined:
            if f not in order.reachable(f):
                cats[f] = "non-recursive"
            elif _tail_shaped(f, rules, order):
                cats[f] = "tail-recursive"
            else:
                cats[f] = "general-recursive"
        elif f.is_theory and not f.is_value:
            cats[f] = "calculation"
        else:
            cats[f] = "constructor"
    return cats, order
