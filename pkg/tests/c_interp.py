"""A direct interpreter for the supported C subset, used as an oracle.

Executes the parsed AST with ordinary Python state — no rewriting, no
constraints — so its verdicts are independent ground truth for the
translation: running a function here must agree with normalizing the
corresponding entry term in the generated rewrite system.

Semantics mirrored: truncating division, runtime errors for out-of-bounds
array access and division by zero (and, optionally, signed overflow).
Arrays are Python lists and are mutated in place; altered globals are
visible in the returned state.
"""

from lctrs.cparse import (Bin, CallE, Name, Num, Read, SAssign, SCall, SDecl,
                          SFor, SIf, SReturn, SWhile, Un)


class CRuntimeError(Exception):
    """The program hit a checked error (bounds, division, overflow)."""


class _Return(Exception):
    def __init__(self, value):
        self.value = value


class Interp:
    def __init__(self, program, bounds=True, divzero=True, overflow=False,
                 max_int=2 ** 31 - 1, min_int=-(2 ** 31), fuel=100000):
        self.program = program
        self.bounds = bounds
        self.divzero = divzero
        self.overflow = overflow
        self.max_int = max_int
        self.min_int = min_int
        self.fuel = fuel
        self.globals = {}
        for name, _t, init in program.globals:
            self.globals[name] = None if init is None \
                else self._expr(init, {})

    def call(self, name, args):
        """Run a function; returns its value (None for void).

        Raises CRuntimeError on a checked error; array arguments are
        mutated in place.
        """
        fn = self.program.function(name)
        if fn is None:
            raise KeyError(name)
        env = {}
        for p, a in zip(fn.params, args):
            env[p[0]] = a
        try:
            self._stmts(fn.body, env)
        except _Return as r:
            return r.value
        return None

    # --- expressions ---------------------------------------------------------

    def _arith(self, value):
        if self.overflow and not (self.min_int <= value <= self.max_int):
            raise CRuntimeError("overflow")
        return value

    def _index(self, arr, idx):
        if idx < 0 or idx >= len(arr):
            if self.bounds:
                raise CRuntimeError("out of bounds")
            return None  # unchecked OOB has no defined value
        return idx

    def _expr(self, e, env):
        if isinstance(e, Num):
            return e.value
        if isinstance(e, Name):
            if e.name in env:
                val = env[e.name]
            elif e.name in self.globals:
                val = self.globals[e.name]
            else:
                raise CRuntimeError("uninitialized variable %s" % e.name)
            if val is None:
                raise CRuntimeError("uninitialized variable %s" % e.name)
            return val
        if isinstance(e, Read):
            arr = self._expr(Name(e.array), env)
            idx = self._index(arr, self._expr(e.index, env))
            return 0 if idx is None else arr[idx]
        if isinstance(e, Un):
            v = self._expr(e.arg, env)
            return self._arith(-v) if e.op == "neg" else (0 if v else 1)
        if isinstance(e, CallE):
            return self.call(e.func, [self._expr(a, env) for a in e.args])
        assert isinstance(e, Bin)
        if e.op == "and":
            return 1 if self._truth(e.left, env) and \
                self._truth(e.right, env) else 0
        if e.op == "or":
            return 1 if self._truth(e.left, env) or \
                self._truth(e.right, env) else 0
        a = self._expr(e.left, env)
        b = self._expr(e.right, env)
        if e.op in ("div", "mod"):
            if b == 0:
                if self.divzero:
                    raise CRuntimeError("division by zero")
                return 0
            q = abs(a) // abs(b)
            q = q if (a >= 0) == (b >= 0) else -q
            return self._arith(q if e.op == "div" else a - q * b)
        if e.op == "+":
            return self._arith(a + b)
        if e.op == "-":
            return self._arith(a - b)
        if e.op == "*":
            return self._arith(a * b)
        return 1 if {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b,
                     "=": a == b, "!=": a != b}[e.op] else 0

    def _truth(self, e, env):
        return self._expr(e, env) != 0

    # --- statements ----------------------------------------------------------

    def _stmts(self, stmts, env):
        for s in stmts:
            self._stmt(s, env)

    def _assign(self, target, value, env):
        if isinstance(target, Name):
            if target.name not in env and target.name in self.globals:
                self.globals[target.name] = value
            else:
                env[target.name] = value
        else:
            arr = self._expr(Name(target.array), env)
            idx = self._index(arr, self._expr(target.index, env))
            if idx is not None:
                arr[idx] = value

    def _stmt(self, s, env):
        self.fuel -= 1
        if self.fuel <= 0:
            raise RuntimeError("interpreter fuel exhausted")
        if isinstance(s, SDecl):
            env[s.name] = self._expr(s.init, env) if s.init is not None \
                else None
        elif isinstance(s, SAssign):
            self._assign(s.target, self._expr(s.expr, env), env)
        elif isinstance(s, SCall):
            rv = self.call(s.func, [self._expr(a, env) for a in s.args])
            if s.var is not None:
                self._assign(Name(s.var), rv, env)
        elif isinstance(s, SReturn):
            raise _Return(None if s.expr is None
                          else self._expr(s.expr, env))
        elif isinstance(s, SIf):
            branch = s.then if self._truth(s.cond, env) else s.els
            self._stmts(branch, env)
        elif isinstance(s, SWhile):
            while self._truth(s.cond, env):
                self._stmts(s.body, env)
        else:
            assert isinstance(s, SFor)
            scope = dict(env)
            self._stmts(s.init, scope)
            while self._truth(s.cond, scope):
                self._stmts(s.body, scope)
                self._stmts(s.post, scope)
            for k in env:
                env[k] = scope[k]
