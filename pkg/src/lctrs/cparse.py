"""C-subset front end.

Parses C sources with pycparser, checks them against the supported
subset (int, one-dimensional int arrays, assignments, if/for/while,
return, function calls, global variables) and converts them into a
small statement/expression AST.  Function calls buried inside
expressions are pre-split so that every call occurs only in statements
of the shape `var = f(args)`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from pycparser import c_ast, c_parser


class CParseError(Exception):
    def __init__(self, msg, coord=None):
        if coord is not None:
            msg = "%s:%s: %s" % (getattr(coord, "line", "?"),
                                 getattr(coord, "column", "?"), msg)
        super().__init__(msg)


# --- expressions ------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Name:
    name: str


@dataclass(frozen=True)
class Bin:
    op: str  # + - * div mod < <= > >= = != and or
    left: object
    right: object


@dataclass(frozen=True)
class Un:
    op: str  # "neg" | "not"
    arg: object


@dataclass(frozen=True)
class Read:
    """Array element read a[i]."""
    array: str
    index: object


@dataclass(frozen=True)
class CallE:
    """A function call in expression position (removed by pre-splitting)."""
    func: str
    args: tuple


# --- statements -------------------------------------------------------------

@dataclass
class SDecl:
    name: str
    ctype: str  # "int"
    init: object = None


@dataclass
class SAssign:
    target: object  # Name or Read (array element write)
    expr: object = None


@dataclass
class SCall:
    """var = f(args) (var None when the result is discarded)."""
    var: object
    func: str
    args: tuple = ()


@dataclass
class SIf:
    cond: object
    then: list = field(default_factory=list)
    els: list = field(default_factory=list)


@dataclass
class SWhile:
    cond: object
    body: list = field(default_factory=list)


@dataclass
class SFor:
    init: list = field(default_factory=list)
    cond: object = None
    post: list = field(default_factory=list)
    body: list = field(default_factory=list)


@dataclass
class SReturn:
    expr: object = None


@dataclass
class CFunction:
    name: str
    ret_type: str  # "int" | "void"
    params: list   # [(name, "int" | "int[]")]
    body: list


@dataclass
class CProgram:
    globals: list  # [(name, "int", init-or-None)]
    functions: list

    def function(self, name):
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)


_BINOPS = {"+": "+", "-": "-", "*": "*", "/": "div", "%": "mod",
           "<": "<", "<=": "<=", ">": ">", ">=": ">=",
           "==": "=", "!=": "!=", "&&": "and", "||": "or"}

_INT_TYPES = {("int",), ("char",), ("long",), ("signed",), ("unsigned",),
              ("long", "int"), ("signed", "int"), ("unsigned", "int"),
              ("signed", "char"), ("unsigned", "char")}


def _scalar_type(node, coord):
    if isinstance(node, c_ast.TypeDecl) and isinstance(node.type, c_ast.IdentifierType):
        names = tuple(node.type.names)
        if names in _INT_TYPES:
            return "int"
        if names == ("void",):
            return "void"
        raise CParseError("unsupported type %s" % " ".join(names), coord)
    raise CParseError("unsupported declaration", coord)


def _param_type(decl):
    t = decl.type
    if isinstance(t, (c_ast.ArrayDecl, c_ast.PtrDecl)):
        inner = _scalar_type(t.type, decl.coord)
        if inner != "int":
            raise CParseError("only int arrays are supported", decl.coord)
        return "int[]"
    return _scalar_type(t, decl.coord)


class _Converter:
    def __init__(self):
        self.out_functions = []
        self.out_globals = []

    # -- expressions --
    def expr(self, n):
        if isinstance(n, c_ast.Constant):
            if n.type in ("int", "long int", "unsigned int"):
                return Num(int(n.value, 0))
            if n.type == "char":
                body = n.value[1:-1]
                if body == "\\0":
                    return Num(0)
                if len(body) == 1:
                    return Num(ord(body))
            raise CParseError("unsupported constant %s" % n.value, n.coord)
        if isinstance(n, c_ast.ID):
            return Name(n.name)
        if isinstance(n, c_ast.BinaryOp):
            op = _BINOPS.get(n.op)
            if op is None:
                raise CParseError("unsupported operator %s" % n.op, n.coord)
            return Bin(op, self.expr(n.left), self.expr(n.right))
        if isinstance(n, c_ast.UnaryOp):
            if n.op == "-":
                return Un("neg", self.expr(n.expr))
            if n.op == "+":
                return self.expr(n.expr)
            if n.op == "!":
                return Un("not", self.expr(n.expr))
            raise CParseError("unsupported unary operator %s" % n.op, n.coord)
        if isinstance(n, c_ast.ArrayRef):
            if not isinstance(n.name, c_ast.ID):
                raise CParseError("only direct array indexing is supported",
                                  n.coord)
            return Read(n.name.name, self.expr(n.subscript))
        if isinstance(n, c_ast.FuncCall):
            if not isinstance(n.name, c_ast.ID):
                raise CParseError("unsupported call target", n.coord)
            args = tuple(self.expr(a) for a in (n.args.exprs if n.args else []))
            return CallE(n.name.name, args)
        if isinstance(n, c_ast.Paren) if hasattr(c_ast, "Paren") else False:
            return self.expr(n.expr)
        if isinstance(n, c_ast.Cast):
            raise CParseError("casts are not supported", n.coord)
        raise CParseError("unsupported expression %s" % type(n).__name__,
                          getattr(n, "coord", None))

    def _lvalue(self, n):
        if isinstance(n, c_ast.ID):
            return Name(n.name)
        if isinstance(n, c_ast.ArrayRef) and isinstance(n.name, c_ast.ID):
            return Read(n.name.name, self.expr(n.subscript))
        raise CParseError("unsupported assignment target", n.coord)

    # -- statements --
    def stmts(self, node):
        if node is None:
            return []
        if isinstance(node, c_ast.Compound):
            items = node.block_items or []
        else:
            items = [node]
        out = []
        for it in items:
            out.extend(self.stmt(it))
        return out

    def stmt(self, n):
        if isinstance(n, c_ast.Decl):
            return self.decl(n)
        if isinstance(n, c_ast.DeclList):
            out = []
            for d in n.decls:
                out.extend(self.decl(d))
            return out
        if isinstance(n, c_ast.Assignment):
            tgt = self._lvalue(n.lvalue)
            rhs = self.expr(n.rvalue)
            if n.op != "=":
                op = _BINOPS.get(n.op[:-1])
                if op is None:
                    raise CParseError("unsupported assignment %s" % n.op,
                                      n.coord)
                cur = tgt if isinstance(tgt, Name) else Read(tgt.array,
                                                             tgt.index)
                rhs = Bin(op, cur, rhs)
            return [SAssign(tgt, rhs)]
        if isinstance(n, c_ast.UnaryOp) and n.op in ("p++", "p--", "++", "--"):
            tgt = self._lvalue(n.expr)
            op = "+" if "+" in n.op else "-"
            cur = tgt if isinstance(tgt, Name) else Read(tgt.array, tgt.index)
            return [SAssign(tgt, Bin(op, cur, Num(1)))]
        if isinstance(n, c_ast.If):
            return [SIf(self.expr(n.cond), self.stmts(n.iftrue),
                        self.stmts(n.iffalse))]
        if isinstance(n, c_ast.While):
            return [SWhile(self.expr(n.cond), self.stmts(n.stmt))]
        if isinstance(n, c_ast.For):
            init = self.stmts(n.init) if n.init is not None else []
            cond = self.expr(n.cond) if n.cond is not None else None
            post = self.stmt(n.next) if n.next is not None else []
            return [SFor(init, cond, post, self.stmts(n.stmt))]
        if isinstance(n, c_ast.Return):
            return [SReturn(self.expr(n.expr) if n.expr else None)]
        if isinstance(n, c_ast.FuncCall):
            e = self.expr(n)
            return [SCall(None, e.func, e.args)]
        if isinstance(n, c_ast.EmptyStatement):
            return []
        if isinstance(n, c_ast.Compound):
            return self.stmts(n)
        raise CParseError("unsupported statement %s" % type(n).__name__,
                          getattr(n, "coord", None))

    def decl(self, n):
        if isinstance(n.type, (c_ast.ArrayDecl, c_ast.PtrDecl)):
            raise CParseError("local array declarations are not supported",
                              n.coord)
        t = _scalar_type(n.type, n.coord)
        if t != "int":
            raise CParseError("unsupported declaration type", n.coord)
        init = self.expr(n.init) if n.init is not None else None
        return [SDecl(n.name, "int", init)]

    # -- top level --
    def top(self, ext):
        if isinstance(ext, c_ast.FuncDef):
            decl = ext.decl
            ftype = decl.type  # FuncDecl
            ret = _scalar_type(ftype.type, decl.coord)
            params = []
            if ftype.args:
                for p in ftype.args.params:
                    if isinstance(p, c_ast.Typename) or p.name is None:
                        continue  # f(void)
                    params.append((p.name, _param_type(p)))
            body = self.stmts(ext.body)
            self.out_functions.append(CFunction(decl.name, ret, params, body))
        elif isinstance(ext, c_ast.Decl):
            if isinstance(ext.type, c_ast.FuncDecl):
                return  # forward declaration
            t = _scalar_type(ext.type, ext.coord)
            if t != "int":
                raise CParseError("unsupported global type", ext.coord)
            init = self.expr(ext.init) if ext.init is not None else None
            self.out_globals.append((ext.name, "int", init))
        else:
            raise CParseError("unsupported top-level construct",
                              getattr(ext, "coord", None))


# --- call pre-splitting (§ every call becomes `var = f(args)`) --------------

class _Splitter:
    def __init__(self, used_names):
        self.used = set(used_names)
        self.n = 0

    def fresh(self):
        while True:
            self.n += 1
            name = "tmp%d" % self.n
            if name not in self.used:
                self.used.add(name)
                return name

    def hoist(self, e, pre):
        """Replace embedded calls in e with temporaries, innermost first."""
        if isinstance(e, Bin):
            return Bin(e.op, self.hoist(e.left, pre), self.hoist(e.right, pre))
        if isinstance(e, Un):
            return Un(e.op, self.hoist(e.arg, pre))
        if isinstance(e, Read):
            return Read(e.array, self.hoist(e.index, pre))
        if isinstance(e, CallE):
            args = tuple(self.hoist(a, pre) for a in e.args)
            tmp = self.fresh()
            pre.append(SDecl(tmp, "int", None))
            pre.append(SCall(tmp, e.func, args))
            return Name(tmp)
        return e

    def block(self, stmts):
        out = []
        for s in stmts:
            out.extend(self.split(s))
        return out

    def split(self, s):
        pre = []
        if isinstance(s, SDecl):
            if isinstance(s.init, CallE):
                args = tuple(self.hoist(a, pre) for a in s.init.args)
                return pre + [SDecl(s.name, s.ctype, None),
                              SCall(s.name, s.init.func, args)]
            if s.init is not None:
                s = SDecl(s.name, s.ctype, self.hoist(s.init, pre))
        elif isinstance(s, SAssign):
            if isinstance(s.expr, CallE) and isinstance(s.target, Name):
                args = tuple(self.hoist(a, pre) for a in s.expr.args)
                return pre + [SCall(s.target.name, s.expr.func, args)]
            tgt = s.target
            if isinstance(tgt, Read):
                tgt = Read(tgt.array, self.hoist(tgt.index, pre))
            s = SAssign(tgt, self.hoist(s.expr, pre))
        elif isinstance(s, SCall):
            s = SCall(s.var, s.func,
                      tuple(self.hoist(a, pre) for a in s.args))
        elif isinstance(s, SIf):
            cond = self.hoist(s.cond, pre)
            s = SIf(cond, self.block(s.then), self.block(s.els))
        elif isinstance(s, SWhile):
            if _has_call(s.cond):
                raise CParseError("function calls in loop conditions are "
                                  "not supported")
            s = SWhile(s.cond, self.block(s.body))
        elif isinstance(s, SFor):
            if s.cond is not None and _has_call(s.cond):
                raise CParseError("function calls in loop conditions are "
                                  "not supported")
            s = SFor(self.block(s.init), s.cond, self.block(s.post),
                     self.block(s.body))
        elif isinstance(s, SReturn):
            if s.expr is not None:
                s = SReturn(self.hoist(s.expr, pre))
        return pre + [s]


def _has_call(e):
    if isinstance(e, CallE):
        return True
    if isinstance(e, Bin):
        return _has_call(e.left) or _has_call(e.right)
    if isinstance(e, Un):
        return _has_call(e.arg)
    if isinstance(e, Read):
        return _has_call(e.index)
    return False


def _all_names(stmts, acc):
    for s in stmts:
        if isinstance(s, SDecl):
            acc.add(s.name)
        elif isinstance(s, SIf):
            _all_names(s.then, acc)
            _all_names(s.els, acc)
        elif isinstance(s, SWhile):
            _all_names(s.body, acc)
        elif isinstance(s, SFor):
            _all_names(s.init, acc)
            _all_names(s.post, acc)
            _all_names(s.body, acc)


def parse_c(source):
    """Parse a C translation unit from source text into a CProgram."""
    parser = c_parser.CParser()
    try:
        ast = parser.parse(source, filename="<input>")
    except c_parser.ParseError as exc:
        raise CParseError(str(exc)) from None
    conv = _Converter()
    for ext in ast.ext:
        conv.top(ext)
    for fn in conv.out_functions:
        used = {n for n, _t in fn.params} | {g for g, _t, _i in conv.out_globals}
        _all_names(fn.body, used)
        fn.body = _Splitter(used).block(fn.body)
    return CProgram(conv.out_globals, conv.out_functions)
