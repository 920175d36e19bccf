"""Hand-rolled lexer and recursive-descent parser for MiniDyn.

Objects are prototype-based: `{a: 4} proto y` allocates an object whose
prototype is y.  Identifiers resolve lexically at parse time; names the
trace recorder reserves for itself (tmp0.., ret, esc.., global) are
rejected as user identifiers.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from ..tracelang import SourceLoc
from . import ast as A

KEYWORDS = {"var", "function", "return", "if", "else", "while", "new",
            "delete", "typeof", "instanceof", "true", "false", "null",
            "undefined", "proto", "this"}

BUILTIN_GLOBALS = {"Array"}

RESERVED_NAME = re.compile(r"^(tmp\d+|ret|esc\d*|global)$")

PUNCT = ["===", "!==", "==", "!=", "<=", ">=", "&&", "||",
         "{", "}", "(", ")", "[", "]", ";", ",", ".", "=",
         "<", ">", "+", "-", "*", "/", "%", "!", ":"]


class ParseError(Exception):
    def __init__(self, loc: SourceLoc, message: str):
        super().__init__(f"{loc}: {message}")
        self.loc = loc
        self.message = message


@dataclass
class Token:
    kind: str  # num str ident keyword punct eof
    value: str
    loc: SourceLoc


def tokenize(text: str, filename: str) -> list[Token]:
    tokens: list[Token] = []
    line, col, i = 1, 1, 0
    n = len(text)
    while i < n:
        c = text[i]
        loc = SourceLoc(filename, line, col)
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            m = re.match(r"\d*\.?\d+([eE][+-]?\d+)?", text[i:])
            lexeme = m.group(0)
            tokens.append(Token("num", lexeme, loc))
            i += len(lexeme)
            col += len(lexeme)
            continue
        if c in "\"'":
            quote = c
            j = i + 1
            out = []
            while j < n and text[j] != quote:
                if text[j] == "\\":
                    j += 1
                    if j >= n:
                        raise ParseError(loc, "unterminated string")
                    out.append({"n": "\n", "t": "\t", "r": "\r",
                                "\\": "\\", quote: quote}.get(text[j], text[j]))
                elif text[j] == "\n":
                    raise ParseError(loc, "newline in string literal")
                else:
                    out.append(text[j])
                j += 1
            if j >= n:
                raise ParseError(loc, "unterminated string")
            tokens.append(Token("str", "".join(out), loc))
            col += j + 1 - i
            i = j + 1
            continue
        if c.isalpha() or c in "_$":
            m = re.match(r"[A-Za-z_$][A-Za-z0-9_$]*", text[i:])
            lexeme = m.group(0)
            kind = "keyword" if lexeme in KEYWORDS else "ident"
            tokens.append(Token(kind, lexeme, loc))
            i += len(lexeme)
            col += len(lexeme)
            continue
        for p in PUNCT:
            if text.startswith(p, i):
                tokens.append(Token("punct", p, loc))
                i += len(p)
                col += len(p)
                break
        else:
            raise ParseError(loc, f"unexpected character {c!r}")
    tokens.append(Token("eof", "", SourceLoc(filename, line, col)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def at(self, kind: str, value: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (value is None or tok.value == value)

    def expect(self, kind: str, value: str | None = None) -> Token:
        if not self.at(kind, value):
            tok = self.peek()
            want = value or kind
            raise ParseError(tok.loc, f"expected {want!r}, found {tok.value or tok.kind!r}")
        return self.next()

    # -- statements

    def program_body(self) -> list:
        body = []
        while not self.at("eof"):
            body.append(self.statement())
        return body

    def statement(self) -> A.Node:
        tok = self.peek()
        if tok.kind == "keyword":
            if tok.value == "var":
                return self.var_decl()
            if tok.value == "function":
                return self.func_decl()
            if tok.value == "if":
                return self.if_stmt()
            if tok.value == "while":
                return self.while_stmt()
            if tok.value == "return":
                return self.return_stmt()
            if tok.value == "delete":
                return self.delete_stmt()
        expr = self.expression()
        self.expect("punct", ";")
        return A.ExprStmt(expr, tok.loc)

    def var_decl(self) -> A.VarDecl:
        loc = self.expect("keyword", "var").loc
        name = self.ident_name()
        init = None
        if self.at("punct", "="):
            self.next()
            init = self.expression()
        self.expect("punct", ";")
        return A.VarDecl(name, init, loc)

    def func_decl(self) -> A.FuncDecl:
        loc = self.peek().loc
        func = self.func_literal(require_name=True)
        return A.FuncDecl(func, loc)

    def func_literal(self, require_name: bool = False) -> A.FuncLit:
        loc = self.expect("keyword", "function").loc
        name = None
        if self.at("ident"):
            name = self.ident_name()
        elif require_name:
            raise ParseError(self.peek().loc, "function declaration needs a name")
        self.expect("punct", "(")
        params = []
        while not self.at("punct", ")"):
            params.append(self.ident_name())
            if not self.at("punct", ")"):
                self.expect("punct", ",")
        self.next()
        body = self.block()
        return A.FuncLit(name, params, body, loc)

    def block(self) -> list:
        self.expect("punct", "{")
        body = []
        while not self.at("punct", "}"):
            body.append(self.statement())
        self.next()
        return body

    def if_stmt(self) -> A.If:
        loc = self.expect("keyword", "if").loc
        self.expect("punct", "(")
        cond = self.expression()
        self.expect("punct", ")")
        then = self.block()
        els = None
        if self.at("keyword", "else"):
            self.next()
            els = [self.if_stmt()] if self.at("keyword", "if") else self.block()
        return A.If(cond, then, els, loc)

    def while_stmt(self) -> A.While:
        loc = self.expect("keyword", "while").loc
        self.expect("punct", "(")
        cond = self.expression()
        self.expect("punct", ")")
        return A.While(cond, self.block(), loc)

    def return_stmt(self) -> A.Return:
        loc = self.expect("keyword", "return").loc
        value = None
        if not self.at("punct", ";"):
            value = self.expression()
        self.expect("punct", ";")
        return A.Return(value, loc)

    def delete_stmt(self) -> A.DeleteStmt:
        loc = self.expect("keyword", "delete").loc
        target = self.postfix()
        if not isinstance(target, (A.Member, A.Index)):
            raise ParseError(loc, "delete needs a property reference")
        self.expect("punct", ";")
        return A.DeleteStmt(target, loc)

    def ident_name(self) -> str:
        tok = self.expect("ident")
        if RESERVED_NAME.match(tok.value):
            raise ParseError(tok.loc, f"{tok.value!r} is reserved for the trace recorder")
        return tok.value

    # -- expressions (precedence climbing)

    def expression(self) -> A.Node:
        return self.assignment()

    def assignment(self) -> A.Node:
        left = self.logical_or()
        if self.at("punct", "="):
            loc = self.next().loc
            if not isinstance(left, (A.Ident, A.Member, A.Index)):
                raise ParseError(loc, "invalid assignment target")
            return A.Assign(left, self.assignment(), loc)
        return left

    def logical_or(self) -> A.Node:
        left = self.logical_and()
        while self.at("punct", "||"):
            loc = self.next().loc
            left = A.Logical("||", left, self.logical_and(), loc)
        return left

    def logical_and(self) -> A.Node:
        left = self.equality()
        while self.at("punct", "&&"):
            loc = self.next().loc
            left = A.Logical("&&", left, self.equality(), loc)
        return left

    def equality(self) -> A.Node:
        left = self.relational()
        while self.peek().kind == "punct" and self.peek().value in ("==", "!=", "===", "!=="):
            op = self.next()
            left = A.Binary(op.value, left, self.relational(), op.loc)
        return left

    def relational(self) -> A.Node:
        left = self.additive()
        while ((self.peek().kind == "punct" and self.peek().value in ("<", "<=", ">", ">="))
               or self.at("keyword", "instanceof")):
            op = self.next()
            left = A.Binary(op.value, left, self.additive(), op.loc)
        return left

    def additive(self) -> A.Node:
        left = self.multiplicative()
        while self.peek().kind == "punct" and self.peek().value in ("+", "-"):
            op = self.next()
            left = A.Binary(op.value, left, self.multiplicative(), op.loc)
        return left

    def multiplicative(self) -> A.Node:
        left = self.unary()
        while self.peek().kind == "punct" and self.peek().value in ("*", "/", "%"):
            op = self.next()
            left = A.Binary(op.value, left, self.unary(), op.loc)
        return left

    def unary(self) -> A.Node:
        tok = self.peek()
        if tok.kind == "punct" and tok.value in ("!", "-"):
            self.next()
            return A.Unary(tok.value, self.unary(), tok.loc)
        if tok.kind == "keyword" and tok.value == "typeof":
            self.next()
            return A.Unary("typeof", self.unary(), tok.loc)
        return self.postfix()

    def postfix(self) -> A.Node:
        expr = self.primary()
        while True:
            if self.at("punct", "."):
                loc = self.next().loc
                name = self.expect("ident").value
                expr = A.Member(expr, name, loc)
            elif self.at("punct", "["):
                loc = self.next().loc
                index = self.expression()
                self.expect("punct", "]")
                expr = A.Index(expr, index, loc)
            elif self.at("punct", "("):
                loc = self.next().loc
                args = []
                while not self.at("punct", ")"):
                    args.append(self.expression())
                    if not self.at("punct", ")"):
                        self.expect("punct", ",")
                self.next()
                expr = A.Call(expr, args, loc)
            else:
                return expr

    def primary(self) -> A.Node:
        tok = self.peek()
        if tok.kind == "num":
            self.next()
            return A.NumberE(float(tok.value), tok.loc)
        if tok.kind == "str":
            self.next()
            return A.StringE(tok.value, tok.loc)
        if tok.kind == "keyword":
            if tok.value in ("true", "false"):
                self.next()
                return A.BoolE(tok.value == "true", tok.loc)
            if tok.value == "null":
                self.next()
                return A.NullE(tok.loc)
            if tok.value == "undefined":
                self.next()
                return A.UndefinedE(tok.loc)
            if tok.value == "this":
                self.next()
                return A.ThisE(tok.loc)
            if tok.value == "function":
                return self.func_literal()
            if tok.value == "new":
                self.next()
                callee = self.primary()
                while self.at("punct", "."):
                    loc = self.next().loc
                    callee = A.Member(callee, self.expect("ident").value, loc)
                args = []
                if self.at("punct", "("):
                    self.next()
                    while not self.at("punct", ")"):
                        args.append(self.expression())
                        if not self.at("punct", ")"):
                            self.expect("punct", ",")
                    self.next()
                return A.New(callee, args, tok.loc)
        if tok.kind == "ident":
            self.next()
            if RESERVED_NAME.match(tok.value):
                raise ParseError(tok.loc, f"{tok.value!r} is reserved for the trace recorder")
            return A.Ident(tok.value, tok.loc)
        if tok.kind == "punct":
            if tok.value == "(":
                self.next()
                expr = self.expression()
                self.expect("punct", ")")
                return expr
            if tok.value == "{":
                return self.object_literal()
            if tok.value == "[":
                loc = self.next().loc
                elements = []
                while not self.at("punct", "]"):
                    elements.append(self.expression())
                    if not self.at("punct", "]"):
                        self.expect("punct", ",")
                self.next()
                return A.ArrayLit(elements, loc)
        raise ParseError(tok.loc, f"unexpected token {tok.value or tok.kind!r}")

    def object_literal(self) -> A.ObjectLit:
        loc = self.expect("punct", "{").loc
        props = []
        while not self.at("punct", "}"):
            name_tok = self.peek()
            if name_tok.kind in ("ident", "keyword"):
                self.next()
                name = name_tok.value
            elif name_tok.kind == "str":
                self.next()
                name = name_tok.value
            elif name_tok.kind == "num":
                self.next()
                name = _number_prop(float(name_tok.value))
            else:
                raise ParseError(name_tok.loc, "expected property name")
            self.expect("punct", ":")
            props.append((name, self.expression()))
            if not self.at("punct", "}"):
                self.expect("punct", ",")
        self.next()
        proto = None
        if self.at("keyword", "proto"):
            self.next()
            proto = self.expression()
        return A.ObjectLit(props, proto, loc)


def _number_prop(n: float) -> str:
    return str(int(n)) if n.is_integer() else repr(n)


# ---------------------------------------------------------------------------
# lexical resolution

def _declared_names(body: list) -> set:
    """Hoisted declarations of one function body (vars and functions),
    not descending into nested function literals."""
    names: set[str] = set()

    def walk(stmts: list) -> None:
        for s in stmts:
            if isinstance(s, A.VarDecl):
                names.add(s.name)
            elif isinstance(s, A.FuncDecl):
                if s.func.name:
                    names.add(s.func.name)
            elif isinstance(s, A.If):
                walk(s.then)
                if s.els:
                    walk(s.els)
            elif isinstance(s, A.While):
                walk(s.body)

    walk(body)
    return names


def _resolve(node, scopes: list) -> None:
    if isinstance(node, A.Ident):
        if any(node.name in s for s in scopes):
            return
        if node.name in BUILTIN_GLOBALS:
            node.builtin = True
            return
        raise ParseError(node.loc, f"undeclared identifier {node.name!r}")
    if isinstance(node, A.FuncLit):
        inner = set(node.params) | _declared_names(node.body)
        if node.name:
            inner.add(node.name)
        for s in node.body:
            _resolve(s, scopes + [inner])
        return
    for name in getattr(node, "__dataclass_fields__", {}):
        value = getattr(node, name)
        if isinstance(value, A.Node):
            _resolve(value, scopes)
        elif isinstance(value, list):
            for item in value:
                if isinstance(item, A.Node):
                    _resolve(item, scopes)
                elif isinstance(item, tuple):  # object literal props
                    _resolve(item[1], scopes)


def parse_program(text: str, filename: str = "<input>") -> A.Program:
    parser = _Parser(tokenize(text, filename))
    body = parser.program_body()
    program = A.Program(body, filename)
    top = _declared_names(body)
    for stmt in body:
        _resolve(stmt, [top])
    return program
