"""Translation from the C subset into constrained rewrite rules.

Every statement gets its own function symbol over the variables in
scope; transitions between statements become rules, with assignments
reflected as argument updates and conditions as constraints.  A return
statement reduces to ret_f(...), runtime hazards (array bounds, zero
divisors, optionally overflow) reduce to error_f.  Globals are threaded
as extra arguments and returned when altered; calls run in an extra
parameter with dispatch rules on the ret/error outcome.

The generated system is then cleaned up by simplify_lctrs: inlining of
intermediate symbols, merging of twin rules, removal of unused argument
positions and constraint normalization.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .cparse import (Bin, CallE, CParseError, Name, Num, Read, SAssign,
                     SCall, SDecl, SFor, SIf, SReturn, SWhile, Un, parse_c)
from .constraints import simplify_constraint
from .rules import LCTRS, Rule
from .terms import (AINT, App, BOOL, FunctionSymbol, INT, Sort, Subst, Var,
                    apply_substitution, free_vars)
from .theory import (AND, DIV, GE, GT, LE, LT, MINUS, MOD, NOT, OR, PLUS,
                     SELECT, SIZE, STORE, TIMES, TRUE_TERM, conj, disj, eq,
                     mk, neg, neq, split_conj, value_term)


@dataclass
class ErrorModel:
    bounds: bool = True
    divzero: bool = True
    overflow: bool = False
    shared_error: bool = False
    max_int: int = 2 ** 31 - 1
    min_int: int = -(2 ** 31)


@dataclass
class FunctionInfo:
    name: str
    returns_value: bool
    params: list
    globals_used: tuple    # global names read or written, transitively
    globals_altered: tuple
    arrays_altered: tuple  # array parameter names written to
    result_sort: object = None
    entry: object = None
    ret_sym: object = None
    err_sym: object = None

    def ret_layout(self):
        """Names whose final value the ret constructor carries."""
        return list(self.globals_altered) + list(self.arrays_altered)


@dataclass
class TranslationUnit:
    program: object
    functions: dict          # name -> FunctionInfo
    rules: tuple             # simplified
    raw_rules: tuple         # pre-simplification (with error rules)
    signature: frozenset
    model: ErrorModel

    def lctrs(self, simplified=True):
        return LCTRS(self.rules if simplified else self.raw_rules,
                     self.signature)


class TranslationError(Exception):
    pass


_STMT_LETTERS = "uvwspqr"


def _stmt_prefix(index):
    if index < len(_STMT_LETTERS):
        return _STMT_LETTERS[index]
    return "u%d_" % index


def _walk(stmts):
    for s in stmts:
        yield s
        if isinstance(s, SIf):
            yield from _walk(s.then)
            yield from _walk(s.els)
        elif isinstance(s, SWhile):
            yield from _walk(s.body)
        elif isinstance(s, SFor):
            yield from _walk(s.init)
            yield from _walk(s.post)
            yield from _walk(s.body)


def _expr_reads(e, acc):
    if isinstance(e, Name):
        acc.add(e.name)
    elif isinstance(e, Bin):
        _expr_reads(e.left, acc)
        _expr_reads(e.right, acc)
    elif isinstance(e, Un):
        _expr_reads(e.arg, acc)
    elif isinstance(e, Read):
        acc.add(e.array)
        _expr_reads(e.index, acc)
    elif isinstance(e, CallE):
        for a in e.args:
            _expr_reads(a, acc)


def function_infos(prog, model=None):
    """Per-function globals/arrays usage, closed under the call graph."""
    model = model or ErrorModel()
    gnames = [g for g, _t, _i in prog.globals]
    gset = set(gnames)
    direct = {}
    calls = {}
    for fn in prog.functions:
        used, altered, arrays = set(), set(), set()
        locals_ = {n for n, _t in fn.params}
        for s in _walk(fn.body):
            if isinstance(s, SDecl):
                locals_.add(s.name)
        arr_params = {n for n, t in fn.params if t == "int[]"}
        for s in _walk(fn.body):
            reads = set()
            if isinstance(s, SDecl) and s.init is not None:
                _expr_reads(s.init, reads)
            elif isinstance(s, SAssign):
                _expr_reads(s.expr, reads)
                if isinstance(s.target, Name):
                    if s.target.name in gset and s.target.name not in locals_:
                        altered.add(s.target.name)
                else:
                    _expr_reads(s.target.index, reads)
                    if s.target.array in arr_params:
                        arrays.add(s.target.array)
                    elif s.target.array in gset:
                        altered.add(s.target.array)
            elif isinstance(s, SCall):
                for a in s.args:
                    _expr_reads(a, reads)
                if s.var is not None and s.var in gset and s.var not in locals_:
                    altered.add(s.var)
            elif isinstance(s, (SIf, SWhile, SFor)):
                if getattr(s, "cond", None) is not None:
                    _expr_reads(s.cond, reads)
            elif isinstance(s, SReturn) and s.expr is not None:
                _expr_reads(s.expr, reads)
            used |= {n for n in reads if n in gset and n not in locals_}
        used |= altered
        direct[fn.name] = (used, altered, arrays)
        calls[fn.name] = [(s.func, s.args) for s in _walk(fn.body)
                          if isinstance(s, SCall)]

    defined = {fn.name for fn in prog.functions}
    changed = True
    while changed:
        changed = False
        for fn in prog.functions:
            used, altered, arrays = direct[fn.name]
            arr_params = {n for n, t in fn.params if t == "int[]"}
            for callee, args in calls[fn.name]:
                if callee not in defined:
                    continue
                cu, ca, carr = direct[callee]
                if not (cu <= used and ca <= altered):
                    used |= cu
                    altered |= ca
                    changed = True
                # array arguments written by the callee are altered here too
                callee_params = prog.function(callee).params
                arr_pos = [i for i, (pn, pt) in enumerate(callee_params)
                           if pt == "int[]"]
                for i, (pn, pt) in enumerate(callee_params):
                    if pn in carr and i < len(args):
                        a = args[i]
                        if isinstance(a, Name):
                            if a.name in arr_params and a.name not in arrays:
                                arrays.add(a.name)
                                changed = True
                            elif a.name in gset and a.name not in altered:
                                altered.add(a.name)
                                changed = True
            direct[fn.name] = (used, altered, arrays)

    shared_sort = Sort("result")
    shared_err = FunctionSymbol("error", (), shared_sort)
    shared_rets = {}
    infos = {}
    for fn in prog.functions:
        used, altered, arrays = direct[fn.name]
        info = FunctionInfo(
            fn.name, fn.ret_type != "void", list(fn.params),
            tuple(g for g in gnames if g in used),
            tuple(g for g in gnames if g in altered),
            tuple(n for n, t in fn.params if n in arrays))
        ret_sorts = tuple([INT] * len(info.globals_altered)
                          + [AINT] * len(info.arrays_altered)
                          + ([INT] if info.returns_value else []))
        if model.shared_error:
            info.result_sort = shared_sort
            info.err_sym = shared_err
            if ret_sorts not in shared_rets:
                shared_rets[ret_sorts] = FunctionSymbol(
                    "return" if not shared_rets else "return%d" % len(shared_rets),
                    ret_sorts, shared_sort)
            info.ret_sym = shared_rets[ret_sorts]
        else:
            info.result_sort = Sort("result_%s" % fn.name)
            info.err_sym = FunctionSymbol("error_%s" % fn.name, (),
                                          info.result_sort)
            info.ret_sym = FunctionSymbol("ret_%s" % fn.name, ret_sorts,
                                          info.result_sort)
        entry_sorts = tuple([INT] * len(info.globals_used)
                            + [AINT if t == "int[]" else INT
                               for _n, t in fn.params])
        info.entry = FunctionSymbol(fn.name, entry_sorts, info.result_sort)
        infos[fn.name] = info
    return infos


# --- per-function translation -----------------------------------------------

class _Point:
    __slots__ = ("sym", "scope")

    def __init__(self, sym, scope):
        self.sym = sym
        self.scope = scope  # list of (name, sort)


class _LazyPoint:
    def __init__(self, maker):
        self.maker = maker
        self.point = None

    def __call__(self):
        if self.point is None:
            self.point = self.maker()
        return self.point


class _FnTranslator:
    def __init__(self, fn, infos, model, prefix):
        self.fn = fn
        self.infos = infos
        self.info = infos[fn.name]
        self.model = model
        self.prefix = prefix
        self.counter = 0
        self.rules = []
        self.order = {}  # symbol -> creation index, for stable output order

    def new_point(self, scope, extra_sorts=()):
        self.counter += 1
        sym = FunctionSymbol("%s%d" % (self.prefix, self.counter),
                             tuple(s for _n, s in scope) + tuple(extra_sorts),
                             self.info.result_sort)
        self.order[sym] = len(self.order) + 1
        return _Point(sym, list(scope))

    def emit(self, rule):
        self.rules.append(rule)

    # -- expressions --
    def term(self, e, env, checks):
        """Translate an int expression; hazards are appended to checks."""
        if isinstance(e, Num):
            return value_term(e.value)
        if isinstance(e, Name):
            v = env.get(e.name)
            if v is None:
                raise TranslationError("undefined variable %s in %s"
                                       % (e.name, self.fn.name))
            return v
        if isinstance(e, Un):
            if e.op == "neg":
                return mk(MINUS, 0, self.term(e.arg, env, checks))
            raise TranslationError("boolean expression in integer context")
        if isinstance(e, Read):
            a = env.get(e.array)
            if a is None or a.sort != AINT:
                raise TranslationError("%s is not an array" % e.array)
            idx = self.term(e.index, env, checks)
            if self.model.bounds:
                checks.append((disj(mk(LT, idx, 0), mk(GE, idx, mk(SIZE, a))),
                               conj(mk(LE, 0, idx), mk(LT, idx, mk(SIZE, a)))))
            return mk(SELECT, a, idx)
        if isinstance(e, Bin):
            op = {"+": PLUS, "-": MINUS, "*": TIMES,
                  "div": DIV, "mod": MOD}.get(e.op)
            if op is None:
                raise TranslationError("boolean expression in integer context")
            l = self.term(e.left, env, checks)
            r = self.term(e.right, env, checks)
            if e.op in ("div", "mod") and self.model.divzero:
                checks.append((eq(r, 0), neq(r, 0)))
            return App(op, (l, r))
        raise TranslationError("unsupported expression %r" % (e,))

    def cond(self, e, env, checks):
        """Translate a condition to a boolean term."""
        if isinstance(e, Bin) and e.op in ("<", "<=", ">", ">=", "=", "!="):
            l = self.term(e.left, env, checks)
            r = self.term(e.right, env, checks)
            if e.op in ("=", "!="):
                return eq(l, r) if e.op == "=" else neq(l, r)
            op = {"<": LT, "<=": LE, ">": GT, ">=": GE}[e.op]
            return App(op, (l, r))
        if isinstance(e, Bin) and e.op in ("and", "or"):
            l = self.cond(e.left, env, checks)
            r = self.cond(e.right, env, checks)
            return App(AND if e.op == "and" else OR, (l, r))
        if isinstance(e, Un) and e.op == "not":
            return neg(self.cond(e.arg, env, checks))
        # integer used as truth value
        return neq(self.term(e, env, checks), 0)

    # -- rule emission --
    def _env(self, point):
        return {n: Var(n, s) for n, s in point.scope}

    def lhs_of(self, point, extra=()):
        args = tuple(Var(n, s) for n, s in point.scope) + tuple(extra)
        return App(point.sym, args)

    def error_rules(self, lhs, checks, path=()):
        """One error rule per hazard, guarded by earlier checks passing."""
        guard = list(path)
        for tau, safe in checks:
            self.emit(Rule(lhs, App(self.info.err_sym, ()),
                           conj(*(guard + [tau])), origin="translated"))
            guard.append(safe)
        return guard  # the all-clear conjuncts

    def transition(self, frm, to, updates, constraint=(), checks=()):
        """frm -> to, with `updates` overriding scope variables by name."""
        lhs = self.lhs_of(frm)
        env = self._env(frm)
        safes = self.error_rules(lhs, checks, list(constraint))
        args = []
        for n, s in to.scope:
            if n in updates:
                args.append(updates[n])
            elif n in env:
                args.append(env[n])
            else:
                raise TranslationError("no value for %s" % n)
        phi = conj(*(list(constraint) + safes[len(constraint):]))
        self.emit(Rule(lhs, App(to.sym, tuple(args)), phi,
                       origin="translated"))

    def ret_term(self, env, value):
        info = self.info
        args = [env[n] for n in info.ret_layout()]
        if info.returns_value:
            args.append(value if value is not None
                        else Var("rnd", INT))  # unspecified return value
        return App(info.ret_sym, tuple(args))

    # -- statements --
    def seq(self, stmts, cur, end):
        """Compile stmts from point cur; control flow ends up at end()."""
        if not stmts:
            self.transition(cur, end(), {})
            return cur
        for i, s in enumerate(stmts):
            if isinstance(cur, _LazyPoint):
                cur = cur()
            if cur is None:  # everything beyond a return is dead code
                break
            target = end if i == len(stmts) - 1 else None
            cur = self.stmt(s, cur, target)
        return cur

    def _target(self, target, scope):
        if target is not None:
            return target()
        return self.new_point(scope)

    def stmt(self, s, cur, target):
        env = self._env(cur)
        checks = []
        if isinstance(s, SDecl):
            init = (self.term(s.init, env, checks)
                    if s.init is not None else Var(s.name, INT))
            nxt = self._target(target, cur.scope + [(s.name, INT)])
            self.transition(cur, nxt, {s.name: init}, checks=checks)
            return nxt
        if isinstance(s, SAssign):
            if isinstance(s.target, Name):
                val = self.term(s.expr, env, checks)
                updates = {s.target.name: val}
            else:
                a = env.get(s.target.array)
                if a is None or a.sort != AINT:
                    raise TranslationError("%s is not an array"
                                           % s.target.array)
                idx = self.term(s.target.index, env, checks)
                val = self.term(s.expr, env, checks)
                if self.model.bounds:
                    checks.append(
                        (disj(mk(LT, idx, 0), mk(GE, idx, mk(SIZE, a))),
                         conj(mk(LE, 0, idx), mk(LT, idx, mk(SIZE, a)))))
                updates = {s.target.array: mk(STORE, a, idx, val)}
            nxt = self._target(target, cur.scope)
            self.transition(cur, nxt, updates, checks=checks)
            return nxt
        if isinstance(s, SCall):
            return self.call(s, cur, target)
        if isinstance(s, SReturn):
            val = (self.term(s.expr, env, checks)
                   if s.expr is not None else None)
            lhs = self.lhs_of(cur)
            safes = self.error_rules(lhs, checks)
            self.emit(Rule(lhs, self.ret_term(env, val), conj(*safes),
                           origin="translated"))
            return None
        if isinstance(s, SIf):
            c = self.cond(s.cond, env, checks)
            safes = self.error_rules(self.lhs_of(cur), checks)
            join = _LazyPoint(lambda: self._target(target, cur.scope))
            for branch, guard in ((s.then, c), (s.els, neg(c))):
                phi = conj(*(safes + [guard]))
                if branch:
                    entry = self.new_point(cur.scope)
                    self.transition(cur, entry, {}, constraint=split_conj(phi))
                    self.seq(branch, entry, join)
                else:
                    self.transition(cur, join(), {},
                                    constraint=split_conj(phi))
            return join
        if isinstance(s, SWhile):
            return self.loop(cur, s.cond, s.body, [], cur.scope, target)
        if isinstance(s, SFor):
            inner = cur
            for st in s.init:
                inner = self.stmt(st, inner, None)
            return self.loop(inner, s.cond, s.body, s.post, cur.scope, target)
        raise TranslationError("unsupported statement %r" % (s,))

    def loop(self, cond_pt, cond, body, post, outer_scope, target):
        env = self._env(cond_pt)
        checks = []
        c = (self.cond(cond, env, checks) if cond is not None else TRUE_TERM)
        body_entry = self.new_point(cond_pt.scope)
        if post:
            post_pt = self.new_point(cond_pt.scope)
            self.seq(body, body_entry, lambda: post_pt)
            self.seq(post, post_pt, lambda: cond_pt)
        else:
            self.seq(body, body_entry, lambda: cond_pt)
        exit_pt = self._target(target, outer_scope)
        safes = self.error_rules(self.lhs_of(cond_pt), checks)
        self.transition(cond_pt, body_entry, {},
                        constraint=split_conj(conj(*(safes + [c]))))
        if cond is not None:
            self.transition(cond_pt, exit_pt, {},
                            constraint=split_conj(conj(*(safes + [neg(c)]))))
        return exit_pt

    def call(self, s, cur, target):
        env = self._env(cur)
        checks = []
        callee = self.infos.get(s.func)
        if callee is None:
            # undefined external (e.g. IO): result is an arbitrary integer
            nxt = self._target(target, cur.scope)
            updates = {}
            if s.var is not None:
                updates[s.var] = Var("rnd", INT)
            for a in s.args:  # still evaluate arguments for their hazards
                if not isinstance(a, Name):
                    self.term(a, env, checks)
            self.transition(cur, nxt, updates, checks=checks)
            return nxt
        cfn_params = callee.params
        if len(s.args) != len(cfn_params):
            raise TranslationError("wrong arity calling %s" % s.func)
        call_args = [env[g] for g in callee.globals_used]
        arr_args = {}
        for (pn, pt), a in zip(cfn_params, s.args):
            if pt == "int[]":
                if not (isinstance(a, Name) and env.get(a.name) is not None
                        and env[a.name].sort == AINT):
                    raise TranslationError(
                        "array argument of %s must be an array variable"
                        % s.func)
                arr_args[pn] = a.name
                call_args.append(env[a.name])
            else:
                call_args.append(self.term(a, env, checks))
        lhs = self.lhs_of(cur)
        safes = self.error_rules(lhs, checks)
        mid = self.new_point(cur.scope, extra_sorts=(callee.result_sort,))
        self.emit(Rule(lhs, App(mid.sym,
                                tuple(Var(n, srt) for n, srt in cur.scope)
                                + (App(callee.entry, tuple(call_args)),)),
                       conj(*safes), origin="translated"))
        # dispatch on the outcome
        self.emit(Rule(self.lhs_of(mid, extra=(App(callee.err_sym, ()),)),
                       App(self.info.err_sym, ()), origin="translated"))
        out_vars = []
        updates = {}
        for g in callee.globals_altered:
            v = Var("%s'" % g, INT)
            out_vars.append(v)
            updates[g] = v
        for pn in callee.arrays_altered:
            v = Var("%s'" % arr_args[pn], AINT)
            out_vars.append(v)
            updates[arr_args[pn]] = v
        if callee.returns_value:
            v = Var("rv", INT)
            out_vars.append(v)
            if s.var is not None:
                updates[s.var] = v
        nxt = self._target(target, cur.scope)
        pat = App(callee.ret_sym, tuple(out_vars))
        lhs2 = self.lhs_of(mid, extra=(pat,))
        args = []
        for n, srt in nxt.scope:
            args.append(updates.get(n, Var(n, srt)))
        self.emit(Rule(lhs2, App(nxt.sym, tuple(args)), origin="translated"))
        return nxt

    def run(self):
        info = self.info
        scope = ([(g, INT) for g in info.globals_used]
                 + [(n, AINT if t == "int[]" else INT)
                    for n, t in self.fn.params])
        entry_pt = _Point(info.entry, scope)
        self.order[info.entry] = 0
        end = _LazyPoint(lambda: self.new_point(scope))
        final = self.seq(self.fn.body, entry_pt, end) \
            if self.fn.body else entry_pt
        if isinstance(final, _LazyPoint):
            final = final.point
        if end.point is not None:
            final = end.point
        if final is not None:
            # falling off the end of the body: implicit return
            env = self._env(final)
            self.emit(Rule(self.lhs_of(final), self.ret_term(env, None),
                           origin="translated"))
        self.rules.sort(key=lambda r: self.order.get(r.lhs.fn, 999))
        return self.rules


def translate_function(fn, infos, model=None, prefix="u"):
    """Translate one parsed function into its pre-simplification rules."""
    model = model or ErrorModel()
    return _FnTranslator(fn, infos, model, prefix).run()


# --- post-hoc error splitting ------------------------------------------------

def _rule_hazards(rule, model):
    """Hazard conditions found in a rule, in rhs-then-constraint order."""
    out = []
    seen = set()
    for host in (rule.rhs, rule.constraint):
        for _p, t in host.subterms():
            if not isinstance(t, App) or t in seen:
                continue
            seen.add(t)
            if model.bounds and t.fn in (SELECT, STORE):
                a, idx = t.args[0], t.args[1]
                out.append((disj(mk(LT, idx, 0), mk(GE, idx, mk(SIZE, a))),
                            conj(mk(LE, 0, idx),
                                 mk(LT, idx, mk(SIZE, a)))))
            elif model.divzero and t.fn in (DIV, MOD):
                out.append((eq(t.args[1], 0), neq(t.args[1], 0)))
    if model.overflow:
        taus, safes = [], []
        for _p, t in rule.rhs.subterms():
            if (isinstance(t, App) and t.fn in (PLUS, MINUS, TIMES)
                    and t.sort == INT):
                taus.append(disj(mk(GT, t, model.max_int),
                                 mk(LT, t, model.min_int)))
                safes.append(conj(mk(LE, t, model.max_int),
                                  mk(GE, t, model.min_int)))
        if taus:
            out.append((disj(*taus), conj(*safes)))
    return out


def inject_error_rules(rules, model=None, errors=None):
    """Split each hazardous rule l -> r [phi] into a guarded safe rule and
    an error rule, per enabled error-model flags.

    errors maps a result sort to its error constructor; when omitted it
    is reconstructed from nullary constructors named error*.
    """
    model = model or ErrorModel()
    if errors is None:
        errors = {}
        for r in rules:
            for t in (r.lhs, r.rhs):
                for _p, s in t.subterms():
                    if (isinstance(s, App) and not s.args
                            and s.fn.name.startswith("error")):
                        errors[s.fn.output_sort] = s.fn
    out = []
    for r in rules:
        if isinstance(r.rhs, App) and r.rhs.fn == errors.get(r.lhs.sort):
            out.append(r)
            continue
        hazards = _rule_hazards(r, model)
        if not hazards:
            out.append(r)
            continue
        err = errors.get(r.lhs.sort)
        if err is None:
            raise TranslationError("no error constructor for sort %s"
                                   % r.lhs.sort)
        base = split_conj(r.constraint)
        guard = list(base)
        for tau, safe in hazards:
            out.append(Rule(r.lhs, App(err, ()), conj(*(guard + [tau])),
                            origin="translated"))
            guard.append(safe)
        out.append(replace(r, constraint=conj(*guard)))
    return out


# --- simplification ----------------------------------------------------------

def _rewrite_with(term, rule):
    """Exhaustively rewrite with an unconstrained rule u(x..) -> r."""
    from .terms import match
    if isinstance(term, App):
        args = tuple(_rewrite_with(a, rule) for a in term.args)
        term = App(term.fn, args) if term.args else term
        if term.fn == rule.lhs.fn:
            g = match(rule.lhs, term)
            if g is not None:
                return _rewrite_with(apply_substitution(rule.rhs, g), rule)
    return term


def _occurs(sym, term):
    return any(isinstance(t, App) and t.fn == sym for _p, t in term.subterms())


def _symbol_positions(sym, rules):
    """(in some lhs, at a non-root position anywhere)"""
    in_lhs, non_root = False, False
    for r in rules:
        if r.lhs.fn == sym:
            in_lhs = True
        for host in (r.lhs, r.rhs):
            for p, t in host.subterms():
                if isinstance(t, App) and t.fn == sym and p != ():
                    non_root = True
    return in_lhs, non_root


def _inline_unconstrained(rules, entries):
    for i, rho in enumerate(rules):
        u = rho.lhs.fn
        if (rho.constraint != TRUE_TERM or u in entries
                or not all(isinstance(a, Var) for a in rho.lhs.args)
                or len(set(rho.lhs.args)) != len(rho.lhs.args)
                or _occurs(u, rho.rhs)):
            continue
        if any(j != i and _occurs(u, r.lhs) for j, r in enumerate(rules)):
            continue
        out = []
        for j, r in enumerate(rules):
            if j == i:
                continue
            out.append(replace(r, rhs=_rewrite_with(r.rhs, rho)))
        return out
    return None


def _canon_pair(l, r):
    ren = {}

    def walk(t):
        if isinstance(t, Var):
            if t not in ren:
                ren[t] = Var("#%d" % len(ren), t.sort)
            return ren[t]
        if isinstance(t, App) and t.args:
            return App(t.fn, tuple(walk(a) for a in t.args))
        return t

    return (walk(l), walk(r)), ren


def _merge_twins(rules, entries=None):
    groups = {}
    for r in rules:
        key, ren = _canon_pair(r.lhs, r.rhs)
        groups.setdefault(key, []).append((r, ren))
    if all(len(g) == 1 for g in groups.values()):
        return None
    out = []
    for g in groups.values():
        first, ren0 = g[0]
        if len(g) == 1:
            out.append(first)
            continue
        inv0 = {cv: ov for ov, cv in ren0.items()}
        phis = [first.constraint]
        taken = set(first.variables())
        for other, ren in g[1:]:
            sub = {}
            for ov, cv in ren.items():
                tv = inv0.get(cv)
                if tv is None:  # constraint-only variable: keep it fresh
                    base = ov.name
                    k = 0
                    tv = ov
                    while tv in taken:
                        k += 1
                        tv = Var("%s_%d" % (base, k), ov.sort)
                sub[ov] = tv
                taken.add(tv)
            extra = free_vars(other.constraint) - set(ren)
            for ov in extra:
                tv = ov
                k = 0
                while tv in taken and tv not in sub.values():
                    k += 1
                    tv = Var("%s_%d" % (ov.name, k), ov.sort)
                sub[ov] = tv
                taken.add(tv)
            phis.append(apply_substitution(other.constraint, Subst(sub)))
        out.append(replace(first, constraint=disj(*phis)))
    return out


def _inline_constrained(rules, entries):
    from .terms import match
    defined = {r.lhs.fn for r in rules} | set(entries)
    by_sym = {}
    for r in rules:
        by_sym.setdefault(r.lhs.fn, []).append(r)
    for u, urules in by_sym.items():
        if u in entries:
            continue
        if not all(all(isinstance(a, Var) for a in r.lhs.args)
                   and len(set(r.lhs.args)) == len(r.lhs.args)
                   for r in urules):
            continue
        if any(_occurs(d, r.rhs) for r in urules
               for d in [u]):  # u recursive: removing it would be wrong
            continue
        if any(isinstance(t, App) and t.fn in defined - {u}
               for r in urules for _p, t in r.rhs.subterms()):
            continue
        # u may appear only as the root of a right-hand side elsewhere
        ok_ = True
        hosts = []
        for r in rules:
            if r.lhs.fn == u:
                continue
            if _occurs(u, r.lhs):
                ok_ = False
                break
            for p, t in r.rhs.subterms():
                if isinstance(t, App) and t.fn == u:
                    if p != ():
                        ok_ = False
                    else:
                        hosts.append(r)
            if not ok_:
                break
        if not ok_ or not hosts:
            continue
        out = []
        for r in rules:
            if r.lhs.fn == u:
                continue
            if r not in hosts:
                out.append(r)
                continue
            forbidden = r.variables()
            for ur in urules:
                from .terms import rename_apart
                ur2, _ = rename_apart(ur, forbidden)
                g = match(ur2.lhs, r.rhs)
                out.append(replace(
                    r,
                    rhs=apply_substitution(ur2.rhs, g),
                    constraint=conj(*(split_conj(r.constraint)
                                      + split_conj(apply_substitution(
                                          ur2.constraint, g))))))
        return out
    return None


def _drop_unused_args(rules, entries):
    keep_all = set(entries)
    for r in rules:
        for host in (r.lhs, r.rhs):
            for _p, t in host.subterms():
                if isinstance(t, App) and t.fn.kind == "term-symbol" \
                        and t.fn not in {rr.lhs.fn for rr in rules}:
                    keep_all.add(t.fn)  # constructors (ret/error)
    syms = {r.lhs.fn for r in rules}
    used = {}
    for f in syms:
        n = len(f.input_sorts)
        used[f] = [f in keep_all] * n

    def used_positions(t, mark):
        # mark variables sitting at used positions
        if isinstance(t, Var):
            mark.add(t)
            return
        if not isinstance(t, App):
            return
        for i, a in enumerate(t.args):
            f = t.fn
            if f in used and not used[f][i]:
                continue
            used_positions(a, mark)

    changed = True
    while changed:
        changed = False
        for r in rules:
            f = r.lhs.fn
            if f not in used:
                continue
            phi_vars = free_vars(r.constraint)
            mark = set()
            used_positions(r.rhs, mark)
            for j, lj in enumerate(r.lhs.args):
                if used[f][j]:
                    continue
                if not isinstance(lj, Var) or lj in phi_vars or lj in mark:
                    used[f][j] = True
                    changed = True
    if all(all(u) for u in used.values()):
        return None
    new_syms = {}
    for f, flags in used.items():
        if all(flags):
            continue
        sorts = tuple(s for s, ok_ in zip(f.input_sorts, flags) if ok_)
        new_syms[f] = (FunctionSymbol(f.name, sorts, f.output_sort, f.kind),
                       flags)

    def rebuild(t):
        if not isinstance(t, App) or not t.args:
            return t
        args = tuple(rebuild(a) for a in t.args)
        if t.fn in new_syms:
            f2, flags = new_syms[t.fn]
            args = tuple(a for a, ok_ in zip(args, flags) if ok_)
            return App(f2, args)
        return App(t.fn, args)

    return [replace(r, lhs=rebuild(r.lhs), rhs=rebuild(r.rhs))
            for r in rules]


def simplify_lctrs(rules, entries):
    """The three cleanup passes, iterated to a fixpoint."""
    rules = list(rules)
    entries = set(entries)
    while True:
        stepped = False
        while True:
            for passfn in (_inline_unconstrained, _merge_twins,
                           _inline_constrained):
                nxt = passfn(rules, entries)
                if nxt is not None:
                    rules = nxt
                    stepped = True
                    break
            else:
                break
        nxt = _drop_unused_args(rules, entries)
        if nxt is not None:
            rules = nxt
            stepped = True
        if not stepped:
            break
    out = []
    for r in rules:
        protected = frozenset(v.name for v in
                              free_vars(r.lhs) | free_vars(r.rhs))
        out.append(replace(r, constraint=simplify_constraint(r.constraint,
                                                             protected)))
    return out


# --- the whole unit ----------------------------------------------------------

def translate_unit(source, model=None):
    """parse -> translate each function -> error rules -> simplify."""
    model = model or ErrorModel()
    prog = parse_c(source)
    infos = function_infos(prog, model)
    raw = []
    for i, fn in enumerate(prog.functions):
        frules = translate_function(fn, infos, model, _stmt_prefix(i))
        raw.extend(frules)
    entries = {info.entry for info in infos.values()}
    errors = {info.result_sort: info.err_sym for info in infos.values()}
    simplified = simplify_lctrs(raw, entries)
    if model.overflow:
        simplified = inject_error_rules(
            simplified, replace(model, bounds=False, divzero=False), errors)
        simplified = simplify_lctrs(simplified, entries)
    sig = set()
    for rs in (raw, simplified):
        for r in rs:
            for host in (r.lhs, r.rhs):
                for _p, t in host.subterms():
                    if isinstance(t, App) and t.fn.kind == "term-symbol":
                        sig.add(t.fn)
    for info in infos.values():
        sig.update({info.entry, info.ret_sym, info.err_sym})
    return TranslationUnit(prog, infos, tuple(simplified), tuple(raw),
                           frozenset(sig), model)
