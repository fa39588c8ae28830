"""Front-end parser tests: AST shapes, desugarings, rejections."""

import pytest

from lctrs.cparse import (Bin, CallE, CParseError, Name, Num, Read, SAssign,
                          SCall, SDecl, SFor, SIf, SReturn, SWhile,
                          parse_c)

FACT = """
int fact(int x) {
  int z = 1;
  for (int i = 1; i <= x; i++) z = z * i;
  return z;
}
"""


def test_fact_shape():
    prog = parse_c(FACT)
    fn = prog.function("fact")
    assert fn.ret_type == "int"
    assert fn.params == [("x", "int")]
    decl, loop, ret = fn.body
    assert isinstance(decl, SDecl) and decl.name == "z" \
        and decl.init == Num(1)
    assert isinstance(loop, SFor)
    assert loop.init == [SDecl("i", "int", Num(1))]
    assert loop.cond == Bin("<=", Name("i"), Name("x"))
    assert isinstance(ret, SReturn) and ret.expr == Name("z")


def test_operators_normalized():
    prog = parse_c("int f(int a, int b) { return a / b + a % b; }")
    e = prog.function("f").body[0].expr
    assert e == Bin("+", Bin("div", Name("a"), Name("b")),
                    Bin("mod", Name("a"), Name("b")))


def test_equality_and_increment_desugar():
    prog = parse_c("""
        int f(int x) {
          if (x == 0) x += 2;
          x++;
          return x;
        }""")
    cond, inc, _ = prog.function("f").body
    assert cond.cond == Bin("=", Name("x"), Num(0))
    assert cond.then == [SAssign(Name("x"), Bin("+", Name("x"), Num(2)))]
    assert inc == SAssign(Name("x"), Bin("+", Name("x"), Num(1)))


def test_char_literal_is_its_code():
    prog = parse_c("int f() { return 'a'; }")
    assert prog.function("f").body[0].expr == Num(ord("a"))


def test_array_param_and_indexing():
    prog = parse_c("void g(int a[]) { a[0] = a[1]; }")
    fn = prog.function("g")
    assert fn.params == [("a", "int[]")]
    st = fn.body[0]
    assert st.target == Read("a", Num(0))
    assert st.expr == Read("a", Num(1))


def test_call_presplit_innermost_first():
    prog = parse_c("""
        int f(int x) { return x; }
        int g(int x) { return f(f(x) + 1); }""")
    body = prog.function("g").body
    # the inner call is hoisted first, then the outer, then the return
    kinds = [type(s) for s in body]
    assert kinds == [SDecl, SCall, SDecl, SCall, SReturn]
    inner, outer = body[1], body[3]
    assert inner.func == "f" and list(inner.args) == [Name("x")]
    assert outer.func == "f" \
        and list(outer.args) == [Bin("+", Name(inner.var), Num(1))]
    assert body[4].expr == Name(outer.var)


def test_direct_call_assignment_not_split():
    prog = parse_c("""
        int f(int x) { return x; }
        int g(int x) { int y = f(x); return y; }""")
    body = prog.function("g").body
    assert isinstance(body[1], SCall) and body[1].var == "y"


def test_globals():
    prog = parse_c("int b; int c = 3; int f() { return b + c; }")
    assert prog.globals == [("b", "int", None), ("c", "int", Num(3))]


@pytest.mark.parametrize("src,frag", [
    ("int f(float x) { return 0; }", "float"),
    ("int f(int *p) { return *p; }", ""),
    ("struct s { int x; };", ""),
    ("int f() { int a[10]; return 0; }", ""),
    ("int f(int x) { while (f(x)) { x = 0; } return x; }", "loop"),
])
def test_rejections(src, frag):
    with pytest.raises(CParseError) as exc:
        parse_c(src)
    assert frag in str(exc.value)


def test_parse_error_has_location():
    with pytest.raises(CParseError):
        parse_c("int f( { }")
