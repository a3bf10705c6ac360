"""Parser for subtraction-free expression programs.

Grammar::

    program := (NAME '=' expr ';')* (expr | '(' expr (',' expr)+ ')')
    expr    := term ('+' term)*
    term    := power (('*' | '/') power)*
    power   := atom ('^' INT)?
    atom    := INT | NAME | '(' expr ')'

Variables are ``t1`` .. ``tk`` (k = arity).  A bound name refers to the same
node everywhere it is used, so bindings become shared DAG nodes.  ``x^k``
expands to a product chain.  A minus sign anywhere is rejected.
"""

from __future__ import annotations

import re

from .expr import Add, Const, Div, Expr, Mul, Var


class ExprSyntaxError(SyntaxError):
    pass


class MinusSignRejected(ExprSyntaxError):
    pass


class UnknownVariable(ExprSyntaxError):
    pass


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(.))")
_VAR = re.compile(r"t([1-9][0-9]*)$")


def _tokenize(text: str) -> list[tuple[str, str]]:
    if "-" in text:
        raise MinusSignRejected(f"subtraction-free expressions cannot contain '-': {text!r}")
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        num, name, op = m.groups()
        if num is not None:
            out.append(("int", num))
        elif name is not None:
            out.append(("name", name))
        elif op in "+*/^(),=;":
            out.append(("op", op))
        else:
            raise ExprSyntaxError(f"unexpected character {op!r} at offset {m.start(3)}")
        pos = m.end()
    out.append(("end", ""))
    return out


class _Parser:
    def __init__(self, text: str, arity: int):
        self.toks = _tokenize(text)
        self.pos = 0
        self.arity = arity
        self.env: dict[str, Expr] = {}
        self.vars = [Var(i) for i in range(arity)]
        self.consts: dict[int, Const] = {}

    def peek(self, k=0):
        return self.toks[self.pos + k]

    def take(self, kind=None, value=None):
        tok = self.toks[self.pos]
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            want = value or kind
            raise ExprSyntaxError(f"expected {want!r}, found {tok[1] or 'end of input'!r}")
        self.pos += 1
        return tok

    def program(self) -> list[Expr]:
        while self.peek()[0] == "name" and self.peek(1) == ("op", "="):
            name = self.take("name")[1]
            if _VAR.match(name):
                raise ExprSyntaxError(f"cannot rebind variable {name}")
            self.take("op", "=")
            self.env[name] = self.expr()
            self.take("op", ";")
        if self.peek() == ("op", "("):
            save = self.pos
            self.take("op", "(")
            first = self.expr()
            if self.peek() == ("op", ","):
                items = [first]
                while self.peek() == ("op", ","):
                    self.take("op", ",")
                    items.append(self.expr())
                self.take("op", ")")
                self.take("end")
                return items
            self.pos = save
        e = self.expr()
        self.take("end")
        return [e]

    def expr(self) -> Expr:
        node = self.term()
        while self.peek() == ("op", "+"):
            self.take()
            node = Add(node, self.term())
        return node

    def term(self) -> Expr:
        node = self.power()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            rhs = self.power()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def power(self) -> Expr:
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            k = int(self.take("int")[1])
            if k < 1:
                raise ExprSyntaxError("exponents must be positive integers")
            node = base
            for _ in range(k - 1):
                node = Mul(node, base)
            return node
        return base

    def atom(self) -> Expr:
        kind, val = self.peek()
        if kind == "int":
            self.take()
            k = int(val)
            if k == 0:
                raise ExprSyntaxError("the constant 0 is not allowed")
            return self.consts.setdefault(k, Const(k))
        if kind == "name":
            self.take()
            m = _VAR.match(val)
            if m:
                idx = int(m.group(1))
                if idx > self.arity:
                    raise UnknownVariable(f"{val} exceeds arity {self.arity}")
                return self.vars[idx - 1]
            if val not in self.env:
                raise UnknownVariable(f"unbound name {val!r}")
            return self.env[val]
        if (kind, val) == ("op", "("):
            self.take()
            node = self.expr()
            self.take("op", ")")
            return node
        raise ExprSyntaxError(f"unexpected token {val or 'end of input'!r}")


def parse_program(text: str, arity: int) -> list[Expr]:
    """Parse bindings followed by one expression or a tuple of expressions."""
    return _Parser(text, arity).program()


def parse_expr(text: str, arity: int) -> Expr:
    exprs = parse_program(text, arity)
    if len(exprs) != 1:
        raise ExprSyntaxError(f"expected a single expression, got a {len(exprs)}-tuple")
    return exprs[0]
