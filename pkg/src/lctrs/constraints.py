"""Constraint simplification.

Clause-level rewrites that preserve the equation's semantics: pushing
negations into comparisons, dropping clauses implied by the rest, removing
clauses whose only job is to name a dead variable, grouping indexed clause
families into ranged quantifiers, and eliminating store-chains through dead
array variables.

Everything here is validity-checked through the solver; on UNKNOWN the
clause is left alone, so a weak solver only costs simplification power,
never soundness.
"""

from __future__ import annotations

from .terms import (App, Forall, INT, Subst, Var, apply_substitution,
                    free_vars, match, replace_at)
from .theory import (GE, GT, IMP, LE, LT, NOT, PLUS, SELECT, SIZE, STORE,
                     TRUE_TERM, conj, eq, eq_symbol, mk, neq_symbol,
                     split_conj, value_term)
from . import solver

_FLIP = {"<=": GT, "<": GE, ">=": LT, ">": LE}


def push_negations(phi):
    """not(x > y) -> x <= y and friends; double negations cancel."""
    if isinstance(phi, App) and phi.fn == NOT:
        inner = phi.args[0]
        if isinstance(inner, App):
            name = inner.fn.name
            if name in _FLIP:
                return App(_FLIP[name], [push_negations(a) for a in inner.args])
            if name == "=":
                return App(neq_symbol(inner.args[0].sort), inner.args)
            if name == "!=":
                return App(eq_symbol(inner.args[0].sort), inner.args)
            if inner.fn == NOT:
                return push_negations(inner.args[0])
            if inner.fn.is_value:
                return value_term(not inner.fn.payload)
        return App(NOT, (push_negations(inner),))
    if isinstance(phi, App) and phi.args:
        return App(phi.fn, [push_negations(a) for a in phi.args])
    if isinstance(phi, Forall):
        return Forall(phi.var, phi.lo, phi.hi, push_negations(phi.body))
    return phi


def _is_definition(clause, protected):
    """A clause `v = n` naming a protected variable; kept verbatim."""
    if isinstance(clause, App) and clause.fn.name == "=":
        l, r = clause.args
        for a, b in ((l, r), (r, l)):
            if isinstance(a, Var) and a.name in protected and \
                    isinstance(b, App) and b.fn.is_value:
                return True
    return False


_SIMP_CACHE = {}


def simplify_constraint(phi, protected=frozenset()):
    """Normalize and prune a conjunction of clauses.

    protected names are never rewritten away (their definition clauses
    survive verbatim); everything else may be dropped when implied by the
    remaining clauses or when it only constrains an otherwise-unused
    variable.
    """
    key = (phi, frozenset(protected))
    hit = _SIMP_CACHE.get(key)
    if hit is None:
        hit = _SIMP_CACHE[key] = _simplify_constraint(phi, protected)
    return hit


def _simplify_constraint(phi, protected):
    clauses = []
    for c in split_conj(push_negations(phi)):
        if c != TRUE_TERM and c not in clauses:
            clauses.append(c)

    # dead local variables: a lone clause `v = t` or `v <op> t` with v
    # appearing nowhere else poses no constraint on the rest
    changed = True
    while changed:
        changed = False
        counts = {}
        for c in clauses:
            for v in free_vars(c):
                counts[v] = counts.get(v, 0) + 1
        for c in list(clauses):
            if _is_definition(c, protected):
                continue
            if not (isinstance(c, App) and c.fn.name in
                    ("=", "<=", "<", ">=", ">")):
                continue
            l, r = c.args
            for a, b in ((l, r), (r, l)):
                if (isinstance(a, Var) and a.name not in protected
                        and counts.get(a) == 1 and a not in free_vars(b)):
                    clauses.remove(c)
                    changed = True
                    break
            if changed:
                break

    # implied clauses (checked one at a time against the survivors).
    # Definition clauses of protected variables are not used as premises:
    # they may be dropped later (generalization forgets initializations),
    # and a bound like 0 <= i that only follows from i = v + 1 /\ v = 0
    # must outlive that.
    kept = list(clauses)
    premises = [c for c in kept if not _is_definition(c, protected)]
    for c in list(kept):
        if _is_definition(c, protected):
            continue
        rest = [d for d in premises if d is not c]
        if solver.is_valid(mk(IMP, conj(*rest), c)).kind == "VALID":
            kept.remove(c)
            premises = [d for d in premises if d is not c]
    return conj(*kept)


# --- ranged quantifier introduction -----------------------------------------

_HOLE = Var("•hole", INT)


def _skeletons(clause):
    """Yield (skeleton, slot term) for every int position of the clause."""
    for p, s in clause.subterms():
        if p and s.sort == INT:
            yield replace_at(clause, p, _HOLE), s


def _chain_next(defs, a, b):
    """Is b = a + 1 derivable from the other clauses?"""
    goal = eq(b, mk(PLUS, a, 1))
    return solver.is_valid(mk(IMP, conj(*defs), goal)).kind == "VALID"


def _fresh_bound(phi):
    used = {v.name for v in free_vars(phi)}
    for _, t in phi.subterms():
        if isinstance(t, Forall):
            used.add(t.var.name)
    name = "j"
    k = 0
    while name in used:
        k += 1
        name = "j%d" % k
    return Var(name, INT)


def introduce_range_quantifier(phi, init_defs=None):
    """Group >= 3 clauses C[t], C[t+1], C[t+2], ... into a ranged forall.

    The +1 links must be derivable from the remaining clauses.  Abutting
    quantifiers over the same body are merged, and a lower bound that is an
    initialization variable is replaced by its defined value (init_defs:
    map from Var to value Term).
    """
    clauses = split_conj(phi)
    if len(clauses) < 3 and not any(isinstance(c, Forall) for c in clauses):
        return phi
    init_defs = init_defs or {}
    bound = _fresh_bound(phi)

    groups = {}
    for c in clauses:
        if isinstance(c, Forall):
            continue
        for skel, slot in _skeletons(c):
            groups.setdefault(skel, []).append((slot, c))

    for skel, members in sorted(groups.items(), key=lambda kv: repr(kv[0])):
        if len(members) < 3 or len(members) > 8:
            continue
        member_clauses = {c for _, c in members}
        defs = [c for c in clauses if c not in member_clauses]
        # order the slots into a +1 chain
        slots = [s for s, _ in members]
        succ = {}
        for a in slots:
            for b in slots:
                if a != b and _chain_next(defs, a, b):
                    succ[a] = b
                    break
        starts = [s for s in slots if s not in succ.values()]
        best = []
        for s in starts:
            chain = [s]
            while chain[-1] in succ and succ[chain[-1]] not in chain:
                chain.append(succ[chain[-1]])
            if len(chain) > len(best):
                best = chain
        if len(best) < 3:
            continue
        body = apply_substitution(skel, Subst({_HOLE: bound}))
        lo, hi = best[0], best[-1]
        if isinstance(lo, Var) and lo in init_defs:
            lo = init_defs[lo]
        quant = Forall(bound, lo, hi, body)
        chain_clauses = set()
        for s in best:
            for slot, c in members:
                if slot == s:
                    chain_clauses.add(c)
        clauses = [c for c in clauses if c not in chain_clauses] + [quant]
        break  # re-group from scratch below

    clauses = _merge_quantifiers(clauses)
    return conj(*clauses)


def _merge_quantifiers(clauses):
    """Fuse abutting foralls and absorb single clauses adjoining a range."""
    changed = True
    while changed:
        changed = False
        foralls = [c for c in clauses if isinstance(c, Forall)]
        for f in foralls:
            others = [c for c in clauses if c is not f]
            # absorb a matching single clause at hi+1 or lo-1
            for c in others:
                if isinstance(c, Forall):
                    continue
                g = match(f.body, c)
                if g is None or g.domain() - {f.var}:
                    continue
                t = g[f.var]
                if _chain_next(
                        [d for d in others if d is not c], f.hi, t):
                    clauses = [d for d in clauses if d is not f and d is not c]
                    clauses.append(Forall(f.var, f.lo, t, f.body))
                    changed = True
                    break
                if _chain_next([d for d in others if d is not c], t, f.lo):
                    clauses = [d for d in clauses if d is not f and d is not c]
                    clauses.append(Forall(f.var, t, f.hi, f.body))
                    changed = True
                    break
            if changed:
                break
            # fuse two foralls with alpha-equal bodies
            for c in others:
                if not isinstance(c, Forall):
                    continue
                body2 = apply_substitution(c.body, Subst({c.var: f.var}))
                if body2 != f.body:
                    continue
                rest = [d for d in clauses if d is not f and d is not c]
                if _chain_next(rest, f.hi, c.lo):
                    clauses = rest + [Forall(f.var, f.lo, c.hi, f.body)]
                    changed = True
                    break
                if _chain_next(rest, c.hi, f.lo):
                    clauses = rest + [Forall(f.var, c.lo, f.hi, f.body)]
                    changed = True
                    break
            if changed:
                break
    return clauses


# --- store elimination ------------------------------------------------------

def eliminate_store(phi, protected=frozenset()):
    """Rewrite `z = store(y, i, e)` where y is a dead array variable.

    When the other clauses guarantee 0 <= i < size(y), the clause is
    equivalent (up to the choice of y) to select(z,i) = e together with the
    bounds on z; returns (new_phi, witness) where witness maps y to a term
    over the new constraint's variables (y := store(z, i, w) for fresh w),
    or (phi, None) if nothing applies.
    """
    clauses = split_conj(phi)
    counts = {}
    for c in clauses:
        for v in free_vars(c):
            counts[v] = counts.get(v, 0) + 1
    for c in clauses:
        if not (isinstance(c, App) and c.fn.name == "="):
            continue
        l, r = c.args
        for z, rhs in ((l, r), (r, l)):
            if not (isinstance(z, Var) and isinstance(rhs, App)
                    and rhs.fn == STORE):
                continue
            y, idx, e = rhs.args
            if not isinstance(y, Var) or y.name in protected:
                continue
            if counts.get(y, 0) != 1 or y in (free_vars(idx) | free_vars(e)):
                continue
            rest = [d for d in clauses if d is not c]
            inb = conj(mk(LE, 0, idx), mk(LT, idx, App(SIZE, (y,))))
            # bounds must follow from the rest plus the size transfer
            ctx = conj(*(rest + [eq(App(SIZE, (y,)), App(SIZE, (z,)))]))
            if solver.is_valid(mk(IMP, ctx, apply_substitution(
                    inb, Subst({y: z})))).kind != "VALID":
                continue
            new = rest + [eq(App(SELECT, (z, idx)), e),
                          mk(LE, 0, idx), mk(LT, idx, App(SIZE, (z,)))]
            w = Var("•w", INT)
            witness = (y, App(STORE, (z, idx, w)))
            return conj(*new), witness
    return phi, None
