"""Many-sorted terms: signatures, positions, substitutions, matching, unification.

Everything here is immutable and purely syntactic.  We never match modulo
theories: 0+(x+y) does not match y+x.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional


@dataclass(frozen=True)
class Sort:
    name: str
    is_theory_sort: bool = False

    def __repr__(self):
        return self.name


INT = Sort("int", True)
BOOL = Sort("bool", True)
AINT = Sort("array(int)", True)


@dataclass(frozen=True)
class FunctionSymbol:
    """A sorted function symbol.

    kind is one of: term-symbol, theory-symbol, value, both-value.
    Values are nullary and carry their semantic payload (bool, int, or a
    tuple of ints) so the symbol <-> value bijection is structural.
    """

    name: str
    input_sorts: tuple
    output_sort: Sort
    kind: str = "term-symbol"
    payload: object = None

    @property
    def arity(self):
        return len(self.input_sorts)

    @property
    def is_value(self):
        return self.kind in ("value", "both-value")

    @property
    def is_theory(self):
        return self.kind in ("theory-symbol", "value", "both-value")

    def __repr__(self):
        return self.name


class Term:
    __slots__ = ("_hash",)

    def __hash__(self):
        return self._hash

    @property
    def sort(self):
        raise NotImplementedError

    def subterms(self):
        """Yield (position, subterm) pairs in preorder."""
        stack = [((), self)]
        while stack:
            p, t = stack.pop()
            yield p, t
            if isinstance(t, App):
                for i in range(len(t.args) - 1, -1, -1):
                    stack.append((p + (i + 1,), t.args[i]))
            elif isinstance(t, Forall):
                stack.append((p + (1,), t.lo))
                # hi/body explored too; bound var is not a free subterm
                stack.append((p + (2,), t.hi))
                stack.append((p + (3,), t.body))


class Var(Term):
    __slots__ = ("name", "_sort")

    def __init__(self, name, sort):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "_sort", sort)
        object.__setattr__(self, "_hash", hash(("V", name, sort)))

    def __setattr__(self, *a):
        raise AttributeError("immutable")

    @property
    def sort(self):
        return self._sort

    def __eq__(self, other):
        return (
            self is other
            or (isinstance(other, Var) and self.name == other.name and self._sort == other._sort)
        )

    __hash__ = Term.__hash__

    def __repr__(self):
        return self.name


class App(Term):
    __slots__ = ("fn", "args")

    def __init__(self, fn, args=()):
        args = tuple(args)
        object.__setattr__(self, "fn", fn)
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "_hash", hash(("A", fn, args)))

    def __setattr__(self, *a):
        raise AttributeError("immutable")

    @property
    def sort(self):
        return self.fn.output_sort

    def __eq__(self, other):
        if self is other:
            return True
        return (
            isinstance(other, App)
            and self._hash == other._hash
            and self.fn == other.fn
            and self.args == other.args
        )

    __hash__ = Term.__hash__

    def __repr__(self):
        if not self.args:
            return self.fn.name
        return "%s(%s)" % (self.fn.name, ", ".join(map(repr, self.args)))


class Forall(Term):
    """Ranged quantifier: forall var in [lo..hi] (body).  Sort bool.

    Binds var in body only; lo/hi are ordinary int terms.
    """

    __slots__ = ("var", "lo", "hi", "body")

    def __init__(self, var, lo, hi, body):
        object.__setattr__(self, "var", var)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "body", body)
        object.__setattr__(self, "_hash", hash(("F", var, lo, hi, body)))

    def __setattr__(self, *a):
        raise AttributeError("immutable")

    @property
    def sort(self):
        return BOOL

    def __eq__(self, other):
        if self is other:
            return True
        return (
            isinstance(other, Forall)
            and self.var == other.var
            and self.lo == other.lo
            and self.hi == other.hi
            and self.body == other.body
        )

    __hash__ = Term.__hash__

    def __repr__(self):
        return "forall %s in [%r..%r] (%r)" % (self.var.name, self.lo, self.hi, self.body)


class TermError(Exception):
    def __init__(self, msg, position=None):
        super().__init__(msg if position is None else "%s at position %s" % (msg, pos_str(position)))
        self.position = position


def pos_str(p):
    """Dot-joined 1-based position; empty position prints as 'e'."""
    return ".".join(str(i) for i in p) if p else "e"


def free_vars(t, acc=None):
    if acc is None:
        acc = set()
    if isinstance(t, Var):
        acc.add(t)
    elif isinstance(t, App):
        for a in t.args:
            free_vars(a, acc)
    elif isinstance(t, Forall):
        free_vars(t.lo, acc)
        free_vars(t.hi, acc)
        inner = free_vars(t.body, set())
        inner.discard(t.var)
        acc |= inner
    return acc


def is_logical(t):
    """True iff every symbol in t is a theory symbol (variables allowed)."""
    if isinstance(t, Var):
        return True
    if isinstance(t, Forall):
        return is_logical(t.lo) and is_logical(t.hi) and is_logical(t.body)
    return t.fn.is_theory and all(is_logical(a) for a in t.args)


def is_ground(t):
    return not free_vars(t)


def is_value_term(t):
    return isinstance(t, App) and t.fn.is_value


def sort_check(term, signature):
    """Check well-sortedness against a signature (set of FunctionSymbol).

    Returns the term's sort or raises TermError with the offending position.
    """
    by_key = {}
    for f in signature:
        by_key[(f.name, f.input_sorts, f.output_sort)] = f

    def go(t, p):
        if isinstance(t, Var):
            return t.sort
        if isinstance(t, Forall):
            if go(t.lo, p + (1,)) != INT or go(t.hi, p + (2,)) != INT:
                raise TermError("quantifier bounds must be int", p)
            if go(t.body, p + (3,)) != BOOL:
                raise TermError("quantifier body must be bool", p)
            return BOOL
        f = t.fn
        if (f.name, f.input_sorts, f.output_sort) not in by_key:
            raise TermError("unknown symbol %s" % f.name, p)
        if len(t.args) != f.arity:
            raise TermError("arity mismatch for %s" % f.name, p)
        for i, a in enumerate(t.args):
            s = go(a, p + (i + 1,))
            if s != f.input_sorts[i]:
                raise TermError("sort mismatch", p + (i + 1,))
        return f.output_sort

    return go(term, ())


def subterm_at(term, p):
    t = term
    for depth, i in enumerate(p):
        if isinstance(t, App) and 1 <= i <= len(t.args):
            t = t.args[i - 1]
        else:
            raise TermError("position out of range", tuple(p[: depth + 1]))
    return t


def replace_at(term, p, new):
    if not p:
        if term.sort != new.sort:
            raise TermError("sort mismatch in replacement", p)
        return new
    if not isinstance(term, App) or not (1 <= p[0] <= len(term.args)):
        raise TermError("position out of range", (p[0],))
    i = p[0] - 1
    args = list(term.args)
    args[i] = replace_at(args[i], p[1:], new)
    return App(term.fn, args)


class Subst:
    """A sort-preserving substitution, keyed by Var."""

    def __init__(self, bindings=None):
        self.bindings = dict(bindings or {})
        # drop identity bindings so domain() matches the paper's Dom
        for v in [v for v, t in self.bindings.items() if t == v]:
            del self.bindings[v]

    def __getitem__(self, v):
        return self.bindings.get(v, v)

    def get(self, v, default=None):
        return self.bindings.get(v, default)

    def domain(self):
        return set(self.bindings)

    def items(self):
        return self.bindings.items()

    def extended(self, v, t):
        b = dict(self.bindings)
        b[v] = t
        return Subst(b)

    def compose(self, other):
        """self then other:  x -> other(self(x))."""
        b = {v: apply_substitution(t, other) for v, t in self.bindings.items()}
        for v, t in other.bindings.items():
            b.setdefault(v, t)
        return Subst(b)

    def __eq__(self, other):
        return isinstance(other, Subst) and self.bindings == other.bindings

    def __repr__(self):
        inner = ", ".join("%s:=%r" % (v.name, t) for v, t in sorted(self.bindings.items(), key=lambda kv: kv[0].name))
        return "[%s]" % inner

    def __len__(self):
        return len(self.bindings)


def apply_substitution(term, gamma):
    if isinstance(gamma, dict):
        gamma = Subst(gamma)
    if isinstance(term, Var):
        return gamma[term]
    if isinstance(term, App):
        if not term.args:
            return term
        return App(term.fn, [apply_substitution(a, gamma) for a in term.args])
    if isinstance(term, Forall):
        lo = apply_substitution(term.lo, gamma)
        hi = apply_substitution(term.hi, gamma)
        inner = gamma
        bound = term.var
        if bound in gamma.domain():
            inner = Subst({v: t for v, t in gamma.items() if v != bound})
        # capture avoidance: rename the bound variable if some image mentions it
        clash = any(
            bound in free_vars(inner[v])
            for v in free_vars(term.body)
            if v != bound and v in inner.domain()
        )
        if clash:
            fresh = Var(default_namer.fresh(bound.name), bound.sort)
            body = apply_substitution(term.body, Subst({bound: fresh}))
            body = apply_substitution(body, inner)
            return Forall(fresh, lo, hi, body)
        return Forall(bound, lo, hi, apply_substitution(term.body, inner))
    raise TypeError(term)


def match(pattern, subject, gamma=None):
    """Syntactic matching: returns minimal γ with patternγ = subject, or None."""
    b = dict(gamma.bindings) if isinstance(gamma, Subst) else dict(gamma or {})
    stack = [(pattern, subject)]
    while stack:
        p, s = stack.pop()
        if isinstance(p, Var):
            if p.sort != s.sort:
                return None
            seen = b.get(p)
            if seen is None:
                b[p] = s
            elif seen != s:
                return None
        elif isinstance(p, App):
            if not isinstance(s, App) or p.fn != s.fn:
                return None
            stack.extend(zip(p.args, s.args))
        else:
            return None  # no quantifier matching
    return Subst(b)


def unify(s, t):
    """First-order syntactic unification with occurs check; returns an mgu or None."""
    subst = {}

    def walk(t):
        while isinstance(t, Var) and t in subst:
            t = subst[t]
        return t

    def occurs(v, t):
        t = walk(t)
        if t == v:
            return True
        if isinstance(t, App):
            return any(occurs(v, a) for a in t.args)
        return False

    queue = [(s, t)]
    while queue:
        a, b = queue.pop()
        a, b = walk(a), walk(b)
        if a == b:
            continue
        if isinstance(a, Var):
            if a.sort != b.sort or occurs(a, b):
                return None
            subst[a] = b
        elif isinstance(b, Var):
            queue.append((b, a))
        elif isinstance(a, App) and isinstance(b, App) and a.fn == b.fn:
            queue.extend(zip(a.args, b.args))
        else:
            return None
    # resolve chains so the result is idempotent
    resolved = {}

    def deep(t):
        t = walk(t)
        if isinstance(t, App) and t.args:
            return App(t.fn, [deep(a) for a in t.args])
        return t

    for v in subst:
        resolved[v] = deep(v)
    return Subst(resolved)


class Namer:
    """Monotone counter name supply, so renamings are reproducible run-to-run."""

    def __init__(self, plain_prefix="x", init_prefix="v"):
        self.counter = 0
        self.plain_prefix = plain_prefix
        self.init_prefix = init_prefix

    def fresh(self, base=None, init=False):
        self.counter += 1
        prefix = self.init_prefix if init else (base or self.plain_prefix)
        # keep bases readable: strip an existing counter suffix
        prefix = prefix.rstrip("0123456789") or self.plain_prefix
        return "%s%d" % (prefix, self.counter)


default_namer = Namer()


def rename_apart(obj, forbidden, namer=None, init_vars=frozenset()):
    """Rename obj's variables away from `forbidden` (a set of identifiers).

    obj is anything with .variables() and .substituted(γ) — rules and
    equations provide these — or a bare Term.  Variables whose names are in
    init_vars keep the initialization-variable prefix (their Vinit
    membership is recorded by the caller's registry).
    """
    namer = namer or default_namer
    if isinstance(obj, Term):
        vs = free_vars(obj)
        subst_fn = lambda g: apply_substitution(obj, g)
    else:
        vs = obj.variables()
        subst_fn = obj.substituted
    forbidden = set(forbidden)
    mapping = {}
    for v in sorted(vs, key=lambda v: v.name):
        if v.name in forbidden:
            is_init = v.name in init_vars
            name = namer.fresh(v.name, init=is_init)
            while name in forbidden:
                name = namer.fresh(v.name, init=is_init)
            mapping[v] = Var(name, v.sort)
    if not mapping:
        return obj, Subst({})
    g = Subst(mapping)
    return subst_fn(g), g
