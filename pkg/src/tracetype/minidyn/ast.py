"""MiniDyn syntax tree.  Every node carries the source location it came
from; identifier references are resolved lexically by the parser."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..tracelang import SourceLoc


class Node:
    __slots__ = ()


# --- expressions ---

@dataclass
class NumberE(Node):
    value: float
    loc: SourceLoc


@dataclass
class StringE(Node):
    value: str
    loc: SourceLoc


@dataclass
class BoolE(Node):
    value: bool
    loc: SourceLoc


@dataclass
class NullE(Node):
    loc: SourceLoc


@dataclass
class UndefinedE(Node):
    loc: SourceLoc


@dataclass
class Ident(Node):
    name: str
    loc: SourceLoc
    builtin: bool = False  # set for globals provided by the native environment


@dataclass
class ThisE(Node):
    loc: SourceLoc


@dataclass
class FuncLit(Node):
    name: Optional[str]
    params: list
    body: list
    loc: SourceLoc


@dataclass
class ObjectLit(Node):
    props: list  # (name, expr)
    proto: Optional[Node]
    loc: SourceLoc


@dataclass
class ArrayLit(Node):
    elements: list
    loc: SourceLoc


@dataclass
class Member(Node):
    obj: Node
    name: str
    loc: SourceLoc


@dataclass
class Index(Node):
    obj: Node
    index: Node
    loc: SourceLoc


@dataclass
class Call(Node):
    callee: Node
    args: list
    loc: SourceLoc


@dataclass
class New(Node):
    callee: Node
    args: list
    loc: SourceLoc


@dataclass
class Assign(Node):
    target: Node  # Ident | Member | Index
    value: Node
    loc: SourceLoc


@dataclass
class Binary(Node):
    op: str
    left: Node
    right: Node
    loc: SourceLoc


@dataclass
class Logical(Node):
    op: str  # && or ||
    left: Node
    right: Node
    loc: SourceLoc


@dataclass
class Unary(Node):
    op: str  # ! - typeof
    operand: Node
    loc: SourceLoc


# --- statements ---

@dataclass
class VarDecl(Node):
    name: str
    init: Optional[Node]
    loc: SourceLoc


@dataclass
class FuncDecl(Node):
    func: FuncLit
    loc: SourceLoc


@dataclass
class ExprStmt(Node):
    expr: Node
    loc: SourceLoc


@dataclass
class If(Node):
    cond: Node
    then: list
    els: Optional[list]
    loc: SourceLoc


@dataclass
class While(Node):
    cond: Node
    body: list
    loc: SourceLoc


@dataclass
class Return(Node):
    value: Optional[Node]
    loc: SourceLoc


@dataclass
class DeleteStmt(Node):
    target: Node  # Member | Index
    loc: SourceLoc


@dataclass
class Program(Node):
    body: list
    file: str
