"""Automatic proof search for constrained-equation equivalence.

The prover wraps the induction inferences into a depth-first search with a
fixed priority: close equations (deletion, eq-deletion, disprove,
constructor), then simplify to normal form, then expand at positions a
recursion analysis approves of, then generalize away initialization
variables, and only then expand anywhere.  Choice points (expansions and
generalizations) are backtrackable; a disproof found below a
generalization step discards that generalization instead of the goal, and
an expansion budget that doubles between attempts keeps diverging
branches short.

Before the search starts, the rewrite system is made initialization-free:
constant arguments in calls to defined symbols are hoisted into fresh
`v = c` constraint clauses.  Those variables mark where a loop's
accumulators begin, and dropping their defining clauses is exactly the
lemma generalization the search performs when a proof attempt starts
repeating itself.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field, replace

from .analysis import (categorize_recursion, check_confluence,
                       check_quasi_reductivity, check_termination)
from .constraints import introduce_range_quantifier, simplify_constraint
from .induction import (Bot, Equation, InferenceStep, ProofError, ProofState,
                        _is_basic, apply_completeness, apply_constructor,
                        apply_deletion, apply_disprove, apply_eq_deletion,
                        apply_expansion, apply_generalization,
                        apply_simplification, initial_state, state_digest,
                        trace_line)
from .rules import CalcRule, LCTRS, _innermost_positions
from .terms import (App, Namer, Subst, Var, apply_substitution, free_vars,
                    is_logical, match, pos_str, rename_apart, replace_at,
                    subterm_at)
from .theory import TRUE_TERM, conj, eq, split_conj


@dataclass
class StrategyConfig:
    expansion_limit_start: int = 2
    expansion_limit_max: int = 8
    per_proof_timeout: float = 60.0
    # simplifications per saturation round before the branch counts as
    # diverging (the induction rules can otherwise unfold forever)
    max_simplifications: int = 150
    choose_random_values: bool = False


@dataclass
class ProveResult:
    verdict: str  # YES | NO | MAYBE
    trace: list
    witness: dict = None
    state: object = None
    generalizations: tuple = ()
    reason: str = ""


# --- initialization variables ------------------------------------------------

@dataclass(frozen=True)
class InitVarRegistry:
    """Names introduced by make_initialization_free and their values."""

    defs: tuple  # ((name, value term), ...)

    @property
    def names(self):
        return frozenset(n for n, _ in self.defs)

    def value_of(self, name):
        for n, v in self.defs:
            if n == name:
                return v
        return None


def _init_def(clause, init_names):
    """Recognize v = c (or c = v) with v an init variable, c a value."""
    if not (isinstance(clause, App) and clause.fn.name == "="):
        return None
    for a, b in ((clause.args[0], clause.args[1]),
                 (clause.args[1], clause.args[0])):
        if isinstance(a, Var) and a.name in init_names \
                and isinstance(b, App) and b.fn.is_value:
            return a, b
    return None


def make_initialization_free(rules):
    """Hoist constant arguments of defined-symbol calls into the constraint.

    Every value occurring as a direct argument of a defined symbol in some
    right-hand side is replaced by a fresh variable v with a clause v = c;
    repeated until none remain.  Returns the rewritten rules and a registry
    of the introduced variables.  The rewrite relation is unchanged, but
    the new variables give later generalization steps a handle on which
    constants are loop initializations.
    """
    rules = tuple(rules)
    defined = {r.lhs.fn for r in rules if isinstance(r.lhs, App)}
    used = set()
    for r in rules:
        used |= {v.name for v in r.variables()}
    defs = []
    counter = itertools.count(1)

    def fresh():
        for k in counter:
            name = "v%d" % k
            if name not in used:
                used.add(name)
                return name

    out = []
    for rule in rules:
        rhs = rule.rhs
        clauses = []
        init = set(rule.init_var_names)
        changed = True
        while changed:
            changed = False
            for p, s in rhs.subterms():
                if not (isinstance(s, App) and s.fn in defined):
                    continue
                for j, a in enumerate(s.args):
                    if isinstance(a, App) and a.fn.is_value:
                        v = Var(fresh(), a.sort)
                        rhs = replace_at(rhs, p + (j + 1,), v)
                        clauses.append(eq(v, a))
                        init.add(v.name)
                        defs.append((v.name, a))
                        changed = True
                        break
                if changed:
                    break
        if clauses:
            rule = replace(rule, rhs=rhs,
                           constraint=conj(rule.constraint, *clauses),
                           init_var_names=frozenset(init))
        out.append(rule)
    return tuple(out), InitVarRegistry(tuple(defs))


def init_definitions(eqn):
    """The v -> value map for the equation's init variables."""
    names = set(eqn.init_var_names)
    out = {}
    for c in split_conj(eqn.constraint):
        hit = _init_def(c, names)
        if hit is not None:
            out[hit[0]] = hit[1]
    return out


def generalize_init_vars(eqn, registry=None, namer=None):
    """Forget where the initialization variables came from.

    Drops every top-level `v = value` clause for an init variable, renames
    the surviving init variables to plain ones and prunes clauses that only
    constrained now-dead variables.  Returns (general, delta0) where delta0
    maps the general equation back onto the given one, as required by the
    Generalization inference.
    """
    namer = namer or Namer()
    init = set(eqn.init_var_names)
    if not init:
        return eqn, Subst({})
    keep = [c for c in split_conj(eqn.constraint)
            if _init_def(c, init) is None]
    phi = conj(*keep) if keep else TRUE_TERM
    occurring = sorted(
        {v for v in free_vars(eqn.lhs) | free_vars(eqn.rhs) | free_vars(phi)
         if v.name in init},
        key=lambda v: v.name)
    rho = {}
    delta = {}
    for v in occurring:
        nv = Var(namer.fresh(), v.sort)
        rho[v] = nv
        delta[nv] = v
    rho = Subst(rho)
    lhs = apply_substitution(eqn.lhs, rho)
    rhs = apply_substitution(eqn.rhs, rho)
    phi = apply_substitution(phi, rho)
    prot = {v.name for v in free_vars(lhs) | free_vars(rhs)}
    gen = Equation(lhs, rhs, simplify_constraint(phi, prot), frozenset())
    return gen, Subst(delta)


# --- irregular-rule instantiation -------------------------------------------

def instantiate_irregular(rule, eqn, gamma0):
    """Bind a rule's constraint-only variables by mining the constraint.

    Starting from the matcher of the left-hand side, each rule clause that
    mentions both bound and unbound variables is matched against the
    equation's clauses to pick up bindings for the unbound ones; clauses
    `v = value` defining an unmatched init variable may instead reuse an
    equation init variable with the same value.  Iterated to fixpoint; any
    still-unbound variable is left for the fresh-variable machinery.
    """
    gamma = gamma0
    eq_atoms = split_conj(eqn.constraint)
    atoms = split_conj(rule.constraint)
    init = set(rule.init_var_names)
    eq_init = set(eqn.init_var_names)
    changed = True
    while changed:
        changed = False
        for psi in atoms:
            vs = free_vars(psi)
            unbound = {v for v in vs if v not in gamma.domain()}
            if not unbound:
                continue
            if vs - unbound:
                for phi_j in eq_atoms:
                    g2 = match(psi, phi_j, gamma)
                    if g2 is not None:
                        gamma = g2
                        changed = True
                        break
                continue
            hit = _init_def(psi, init)
            if hit is not None and hit[0] in unbound:
                taken = {t for _v, t in gamma.items()}
                for phi_j in eq_atoms:
                    other = _init_def(phi_j, eq_init)
                    if other is not None and other[1] == hit[1] \
                            and other[0] not in taken:
                        gamma = gamma.extended(hit[0], other[0])
                        changed = True
                        break
    return gamma


# --- expansion policy --------------------------------------------------------

def expansion_policy(eqn, side, p, lctrs, cats=None):
    """("restricted" | "full", add_rule) for one candidate position.

    Restricted expansions are the ones tried before generalizing: calls to
    general-recursive symbols (with an induction rule), to non-recursive
    defined symbols (without), and — once no init variables remain — to
    tail-recursive symbols (with).  Everything else waits for the
    unrestricted phase, which never adds a rule.
    """
    if cats is None:
        cats, _ = categorize_recursion(lctrs)
    sub = subterm_at(eqn.side(side), p)
    if not _is_basic(sub, lctrs.classification().defined):
        raise ProofError("expansion position is not basic: %r" % (sub,))
    cat = cats.get(sub.fn, "non-recursive")
    if cat == "general-recursive":
        return "restricted", True
    if cat == "non-recursive":
        return "restricted", False
    has_init = any(v.name in eqn.init_var_names for v in eqn.variables())
    if has_init:
        return "full", False
    return "restricted", True


def order_new_equations(eqs, parent, lctrs, order=None):
    """Sort expansion results so shallow-call-graph cases come first.

    Symbols fresh w.r.t. the parent equation are ranked by their height in
    the call-graph order; equations whose fresh symbols are all minimal
    (base cases) sort before those introducing deeper defined symbols.
    The sort is stable, so equal ranks keep rule order.
    """
    if order is None:
        _, order = categorize_recursion(lctrs)
    defined = lctrs.classification().defined
    memo = {}

    def height(f):
        if f not in defined:
            return 0
        if f in memo:
            return memo[f]
        memo[f] = 0  # cycle guard
        below = [height(g) for g in order.reachable(f)
                 if g in defined and order.gt(f, g)]
        memo[f] = 1 + max(below, default=0)
        return memo[f]

    def symbols(*terms):
        out = set()
        for t in terms:
            for _p, s in t.subterms():
                if isinstance(s, App):
                    out.add(s.fn)
        return out

    base = symbols(parent.lhs, parent.rhs)

    def key(e):
        fresh = symbols(e.lhs, e.rhs) - base
        return max((height(f) for f in fresh), default=0)

    return sorted(eqs, key=key)


# --- the search --------------------------------------------------------------

class _Timeout(Exception):
    pass


@dataclass
class _Ctx:
    sys: LCTRS
    reg: InitVarRegistry
    cats: dict
    order: object
    defined: frozenset
    cfg: StrategyConfig
    namer: Namer
    deadline: float
    confluent: bool
    trace: list
    generalizations: list = field(default_factory=list)
    maybe_reason: str = ""

    def check_time(self):
        if time.monotonic() > self.deadline:
            raise _Timeout()


def _fresh_ctx(lctrs, cfg, confluent=True, trace=None, deadline=None):
    cats, order = categorize_recursion(lctrs)
    return _Ctx(lctrs, InitVarRegistry(()), cats, order,
                lctrs.classification().defined, cfg, Namer(),
                deadline if deadline is not None else float("inf"),
                confluent, trace if trace is not None else [])


def _eq_deletion_positions(eqn):
    """Minimal differing positions if all are logical pairs, else None."""
    phi_vars = free_vars(eqn.constraint)
    out = []

    def walk(p, a, b):
        if a == b:
            return True
        if isinstance(a, App) and isinstance(b, App) and a.fn == b.fn:
            return all(walk(p + (j + 1,), x, y)
                       for j, (x, y) in enumerate(zip(a.args, b.args)))
        if is_logical(a) and is_logical(b) and a.sort == b.sort \
                and (free_vars(a) | free_vars(b)) <= phi_vars:
            out.append(p)
            return True
        return False

    return out if walk((), eqn.lhs, eqn.rhs) and out else None


def _try_eq_deletion(st, i):
    """eq-deletion immediately followed by deletion, or None."""
    eqn = st.equations[i]
    ps = _eq_deletion_positions(eqn)
    if ps is None:
        return None
    try:
        st2 = apply_eq_deletion(st, i, ps)
        return apply_deletion(st2, i), ps
    except ProofError:
        return None


def _find_simplification(st, ctx):
    """First simplification step: leftmost-innermost, newest rule first.

    Calculation steps fire at theory subterms (ground ones evaluate, the
    rest become definition clauses); rules from H (newest first) then R
    (newest first) fire at defined-symbol subterms, with irregular rules
    instantiated from the equation's constraint before falling back to
    fresh variables.
    """
    for i, eqn in enumerate(st.equations):
        labeled = [("H%d" % j, st.hypotheses[j])
                   for j in range(len(st.hypotheses) - 1, -1, -1)]
        labeled += [("R%d" % j, ctx.sys.rules[j])
                    for j in range(len(ctx.sys.rules) - 1, -1, -1)]
        taken = {v.name for v in eqn.variables()}
        for side in ("L", "R"):
            for p, sub in _innermost_positions(eqn.side(side)):
                if not isinstance(sub, App):
                    continue
                if sub.fn.is_theory:
                    if sub.fn.is_value or not is_logical(sub):
                        continue
                    try:
                        st2 = apply_simplification(
                            st, i, side, p, CalcRule(sub.fn), namer=ctx.namer)
                    except ProofError:
                        continue
                    step = InferenceStep("simplification", i, side, tuple(p),
                                         "calc:%s" % sub.fn.name)
                    return st2, step
                for label, rule in labeled:
                    if not (isinstance(rule.lhs, App)
                            and rule.lhs.fn == sub.fn):
                        continue
                    rr, _ = rename_apart(rule, taken, ctx.namer,
                                         init_vars=rule.init_var_names)
                    hint = match(rr.lhs, sub)
                    if hint is None:
                        continue
                    if rr.is_irregular:
                        hint = instantiate_irregular(rr, eqn, hint)
                    try:
                        st2 = apply_simplification(st, i, side, p, rr,
                                                   hint=hint, namer=ctx.namer)
                    except ProofError:
                        continue
                    step = InferenceStep("simplification", i, side, tuple(p),
                                         label)
                    return st2, step
    return None


def _saturate(st, ctx):
    """Apply the deterministic inferences until only choices remain.

    Returns ("ok", state) when quiescent, ("bot", Bot) on a disproof that
    counts, ("genfail", state) when a disproof shows the most recent
    generalization over-generalized, or ("fail", state) when the branch is
    dead (diverging simplification, or a disproof the confluence status
    cannot support).
    """
    steps = 0
    while True:
        ctx.check_time()
        if st.ancestors and set(st.equations) <= set(st.ancestors[-1][0]):
            st = apply_completeness(st)
            ctx.trace.append("STEP completeness -> %s" % state_digest(st))
            continue
        if not st.equations:
            return "ok", st
        acted = False
        for i in range(len(st.equations)):
            try:
                st = apply_deletion(st, i)
                ctx.trace.append("STEP deletion eq=%d -> %s"
                                 % (i, state_digest(st)))
                acted = True
                break
            except ProofError:
                pass
            got = _try_eq_deletion(st, i)
            if got is not None:
                st, ps = got
                ctx.trace.append(
                    "STEP eq-deletion+deletion eq=%d pos=%s -> %s"
                    % (i, ",".join(pos_str(p) for p in ps), state_digest(st)))
                acted = True
                break
        if acted:
            continue
        for i in range(len(st.equations)):
            try:
                bot = apply_disprove(st, i, ctx.sys, ignore_flag=True)
            except ProofError:
                continue
            if st.flag == "complete":
                if ctx.confluent:
                    ctx.trace.append("STEP disprove eq=%d case=%s"
                                     % (i, bot.case))
                    return "bot", bot
                ctx.maybe_reason = ("counterexample candidate found but "
                                    "confluence is unconfirmed")
                ctx.trace.append("ABORT %s" % ctx.maybe_reason)
                return "fail", st
            if st.ancestors:
                ctx.trace.append(
                    "BACKTRACK disprove eq=%d in incomplete state" % i)
                return "genfail", st
            ctx.maybe_reason = ("counterexample found in an incomplete "
                                "state with no ancestor to return to")
            return "fail", st
        for i in range(len(st.equations)):
            try:
                st = apply_constructor(st, i, ctx.sys)
                ctx.trace.append("STEP constructor eq=%d -> %s"
                                 % (i, state_digest(st)))
                acted = True
                break
            except ProofError:
                continue
        if acted:
            continue
        got = _find_simplification(st, ctx)
        if got is not None:
            st, step = got
            ctx.trace.append("%s -> %s" % (trace_line(step), state_digest(st)))
            steps += 1
            if steps > ctx.cfg.max_simplifications:
                ctx.trace.append("ABORT simplification diverged")
                return "fail", st
            continue
        return "ok", st


def _expansion_candidates(st, idx, ctx):
    eqn = st.equations[idx]
    buckets = {"general-recursive": [], "non-recursive": [],
               "tail-recursive": []}
    full = []
    for side in ("L", "R"):
        for p, sub in _innermost_positions(eqn.side(side)):
            if not (isinstance(sub, App) and _is_basic(sub, ctx.defined)):
                continue
            phase, add = expansion_policy(eqn, side, p, ctx.sys, ctx.cats)
            if phase == "restricted":
                buckets[ctx.cats[sub.fn]].append(
                    ("expand", idx, side, tuple(p), add))
            full.append(("expand", idx, side, tuple(p), False))
    # whole-call positions before calls buried under other symbols: the
    # buried ones rarely make progress before their context is unfolded
    root_first = lambda c: c[3] != ()
    restricted = (sorted(buckets["general-recursive"], key=root_first)
                  + sorted(buckets["non-recursive"], key=root_first)
                  + sorted(buckets["tail-recursive"], key=root_first))
    return restricted, sorted(full, key=root_first)


def _generalization_candidate(st, idx, ctx):
    eqn = st.equations[idx]
    if not eqn.init_var_names:
        return None
    phi = introduce_range_quantifier(eqn.constraint, init_definitions(eqn))
    staged = replace(eqn, constraint=phi) if phi != eqn.constraint else eqn
    gen, delta = generalize_init_vars(staged, ctx.reg, ctx.namer)
    if gen == eqn:
        return None
    return ("generalize", idx, gen, delta)


def _candidates(st, ctx):
    """Choice points for the first equation that offers any."""
    for idx in range(len(st.equations)):
        restricted, full = _expansion_candidates(st, idx, ctx)
        gen = _generalization_candidate(st, idx, ctx)
        cands = restricted + ([gen] if gen else []) + full
        if cands:
            return cands
    return []


def _branch(st, ctx, used, limit):
    kind, data = _saturate(st, ctx)
    if kind != "ok":
        return kind, data
    st = data
    if not st.equations:
        while st.ancestors:
            st = apply_completeness(st)
        return "yes", st
    for cand in _candidates(st, ctx):
        ctx.check_time()
        if cand[0] == "expand":
            _, idx, side, p, add = cand
            if used >= limit:
                ctx.trace.append("ABORT expansion budget (%d) reached" % limit)
                continue
            parent = st.equations[idx]
            try:
                st2 = apply_expansion(st, idx, side, p, ctx.sys,
                                      add_rule=add, namer=ctx.namer)
            except ProofError:
                continue
            grew = len(st2.equations) - len(st.equations) + 1
            fresh_eqs = order_new_equations(
                st2.equations[idx:idx + grew], parent, ctx.sys, ctx.order)
            st2 = replace(st2, equations=st2.equations[:idx]
                          + tuple(fresh_eqs) + st2.equations[idx + grew:])
            ctx.trace.append(
                "STEP expansion eq=%d side=%s pos=%s add_rule=%s -> %s"
                % (idx, side, pos_str(p), add, state_digest(st2)))
            res = _branch(st2, ctx, used + 1, limit)
        else:
            _, idx, gen, delta = cand
            try:
                st2 = apply_generalization(st, idx, gen, delta)
            except ProofError:
                continue
            ctx.generalizations.append(gen)
            ctx.trace.append("STEP generalization eq=%d to %r -> %s"
                             % (idx, gen, state_digest(st2)))
            res = _branch(st2, ctx, 0, limit)
        if res[0] in ("yes", "bot"):
            return res
        if res[0] == "genfail":
            if cand[0] == "generalize":
                ctx.trace.append("RESUME without generalizing")
                continue
            return res
    return "fail", st


def select_inference(st, lctrs, cfg=None):
    """The inference the search would apply next, as a replayable step.

    Deterministic in the state: deletion, eq-deletion (ending in
    deletion), disprove, constructor, simplification, then the first
    expansion or generalization candidate.  Returns None when stuck.
    """
    ctx = _fresh_ctx(lctrs, cfg or StrategyConfig(),
                     confluent=st.confluence_ok)
    for i, eqn in enumerate(st.equations):
        try:
            apply_deletion(st, i)
            return InferenceStep("deletion", i)
        except ProofError:
            pass
        if _try_eq_deletion(st, i) is not None:
            return InferenceStep("eq-deletion", i,
                                 payload=tuple(_eq_deletion_positions(eqn)))
    for i in range(len(st.equations)):
        try:
            apply_disprove(st, i, lctrs, ignore_flag=True)
            return InferenceStep("disprove", i)
        except ProofError:
            pass
    for i in range(len(st.equations)):
        try:
            apply_constructor(st, i, lctrs)
            return InferenceStep("constructor", i)
        except ProofError:
            pass
    got = _find_simplification(st, ctx)
    if got is not None:
        return got[1]
    for cand in _candidates(st, ctx):
        if cand[0] == "expand":
            _, idx, side, p, add = cand
            return InferenceStep("expansion", idx, side, p, payload=add)
        _, idx, gen, delta = cand
        return InferenceStep("generalization", idx, payload=(gen, delta))
    return None


def prove(lctrs, goals, cfg=None):
    """Prove or refute the goal equations over the given system.

    Returns a ProveResult with verdict YES (all goals are inductive
    theorems), NO (a goal has a counterexample, only claimed when the
    system is confluent) or MAYBE, plus the search trace.  Preconditions —
    quasi-reductivity and termination — are checked first and reported as
    MAYBE when they fail.
    """
    cfg = cfg or StrategyConfig()
    trace = []
    goals = tuple(goals)
    qr = check_quasi_reductivity(lctrs)
    if not qr:
        trace.append("PRECONDITION quasi-reductivity failed: %r"
                     % (qr.violations or qr.failing_symbols,))
        return ProveResult("MAYBE", trace, reason="not quasi-reductive")
    status, _cert = check_termination(lctrs.rules)
    if status != "terminating":
        trace.append("PRECONDITION termination not established")
        return ProveResult("MAYBE", trace, reason="termination unknown")
    conf, why = check_confluence(lctrs)
    confluent = conf == "confluent"
    if not confluent:
        trace.append("NOTE confluence unconfirmed: %s" % why)
    rules2, reg = make_initialization_free(lctrs.rules)
    sys = LCTRS(tuple(rules2), lctrs.signature)
    cats, order = categorize_recursion(sys)
    deadline = time.monotonic() + cfg.per_proof_timeout
    limit = cfg.expansion_limit_start
    reason = ""
    gens = ()
    while True:
        ctx = _Ctx(sys, reg, cats, order, sys.classification().defined, cfg,
                   Namer(), deadline, confluent, trace)
        st0 = initial_state(goals, confluence_ok=confluent)
        trace.append("SEARCH expansion limit %d" % limit)
        try:
            kind, data = _branch(st0, ctx, 0, limit)
        except _Timeout:
            trace.append("TIMEOUT after %.0fs" % cfg.per_proof_timeout)
            return ProveResult("MAYBE", trace, reason="timeout",
                               generalizations=tuple(ctx.generalizations))
        gens = tuple(ctx.generalizations)
        if kind == "yes":
            trace.append("VERDICT YES")
            return ProveResult("YES", trace, state=data,
                               generalizations=gens)
        if kind == "bot":
            trace.append("VERDICT NO")
            return ProveResult("NO", trace, witness=data.witness, state=data,
                               generalizations=gens)
        reason = ctx.maybe_reason or "search space exhausted"
        if limit >= cfg.expansion_limit_max:
            trace.append("VERDICT MAYBE (%s)" % reason)
            return ProveResult("MAYBE", trace, reason=reason,
                               generalizations=gens)
        limit *= 2
