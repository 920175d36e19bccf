"""Runtime representations for MiniDyn values plus the trace recorder.

Values are the host primitives (float, bool, str), two sentinels for null
and undefined, and MDObject for objects (prototype-based; functions and
arrays are objects).  The recorder assigns object ids in the order their
`allocate` statements are emitted so replay reproduces them exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..tracelang import (
    Allocate, BoolLit, FieldRead, NullLit, NumberLit, SourceLoc, StringLit,
    TraceStatement, TraceVar, UndefinedLit, VarRead, VarWrite, format_number,
)
from ..traceval import (
    BoolV, ConcreteValue, FuncRef, NullV, NumberV, ObjRef, StringV, UndefinedV,
)


class _Undefined:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "undefined"


class _Null:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "null"


UNDEF = _Undefined()
NULLV = _Null()


@dataclass
class MDFunction:
    name: Optional[str]
    params: list
    body: list
    env: "object"  # defining Scope
    decl_loc: SourceLoc


class MDObject:
    def __init__(self, *, fn: Optional[MDFunction] = None, array: bool = False,
                 builtin: Optional[str] = None):
        self.id: Optional[int] = None  # assigned when its allocate is emitted
        self.props: dict = {}
        self.proto: Optional[MDObject] = None
        self.fn = fn
        self.array = array
        self.array_len = 0
        self.builtin = builtin
        self.esc_occ = 0  # writes to its escape variable so far

    def lookup(self, name: str):
        cur, seen = self, set()
        while cur is not None and id(cur) not in seen:
            seen.add(id(cur))
            if name in cur.props:
                return cur.props[name]
            cur = cur.proto
        return UNDEF

    def has_prop(self, name: str) -> bool:
        cur, seen = self, set()
        while cur is not None and id(cur) not in seen:
            seen.add(id(cur))
            if name in cur.props:
                return True
            cur = cur.proto
        return False

    def __repr__(self):
        tag = self.builtin or (self.fn.name if self.fn else None)
        return f"<obj {self.id} {tag or ''}>".replace("  ", " ")


def is_object(v) -> bool:
    return isinstance(v, MDObject)


def concrete(v) -> ConcreteValue:
    if v is NULLV:
        return NullV()
    if v is UNDEF:
        return UndefinedV()
    if isinstance(v, bool):
        return BoolV(v)
    if isinstance(v, float):
        return NumberV(v)
    if isinstance(v, str):
        return StringV(v)
    if isinstance(v, MDObject):
        if v.fn is not None or v.builtin is not None:
            return FuncRef(v.id, v.fn.decl_loc if v.fn else None)
        return ObjRef(v.id)
    raise TypeError(f"not a MiniDyn value: {v!r}")


# --- coercion primitives (simplified ECMAScript rules; objects convert to
# the fixed tag "[object]" instead of via toString/valueOf) ---

def to_boolean(v) -> bool:
    if isinstance(v, bool):
        return v
    if v is NULLV or v is UNDEF:
        return False
    if isinstance(v, float):
        return not (v == 0 or v != v)
    if isinstance(v, str):
        return v != ""
    return True


def to_number(v) -> float:
    if isinstance(v, bool):
        return 1.0 if v else 0.0
    if isinstance(v, float):
        return v
    if v is NULLV:
        return 0.0
    if v is UNDEF:
        return float("nan")
    if isinstance(v, str):
        s = v.strip()
        if s == "":
            return 0.0
        try:
            return float(s)
        except ValueError:
            return float("nan")
    return float("nan")


def to_string(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_number(v)
    if isinstance(v, str):
        return v
    if v is NULLV:
        return "null"
    if v is UNDEF:
        return "undefined"
    return "[object]"


def to_prop_name(v) -> str:
    return to_string(v)


def strict_equals(a, b) -> bool:
    if isinstance(a, MDObject) or isinstance(b, MDObject):
        return a is b
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    if isinstance(a, float) and isinstance(b, float):
        return a == b
    if type(a) is type(b) or (a is NULLV and b is NULLV) or (a is UNDEF and b is UNDEF):
        return a == b if not (a is NULLV or a is UNDEF) else a is b
    return False


# --- frames and recording ---

class Frame:
    def __init__(self, fid: str):
        self.id = fid
        self.counters: dict = {}
        self.ntmp = 0

    def occ_var(self, name: str) -> TraceVar:
        k = self.counters.get(name, 0)
        self.counters[name] = k + 1
        return TraceVar(name, k, self.id)

    def temp(self) -> TraceVar:
        v = TraceVar(f"tmp{self.ntmp}", 0, self.id)
        self.ntmp += 1
        return v


class Recorder:
    """Accumulates trace statements, assigns object ids in allocation order,
    and keeps an oracle log of every variable's concrete value for replay
    checks."""

    def __init__(self, filename: str):
        self.filename = filename
        self.statements: list[TraceStatement] = []
        self.oracle: list = []  # (TraceVar, ConcreteValue)
        self.next_obj_id = 0

    def emit(self, stmt: TraceStatement) -> None:
        self.statements.append(stmt)

    def emit_allocate(self, lhs: TraceVar, obj: MDObject,
                      src: Optional[SourceLoc]) -> None:
        obj.id = self.next_obj_id
        self.next_obj_id += 1
        self.emit(VarWrite(lhs, Allocate(), src))
        self.oracle.append((lhs, concrete(obj)))

    def emit_write(self, lhs: TraceVar, rhs, value, src: Optional[SourceLoc]) -> None:
        self.emit(VarWrite(lhs, rhs, src))
        self.oracle.append((lhs, concrete(value)))

    def literal_expr(self, value):
        if value is NULLV:
            return NullLit()
        if value is UNDEF:
            return UndefinedLit()
        if isinstance(value, bool):
            return BoolLit(value)
        if isinstance(value, float):
            return NumberLit(value)
        if isinstance(value, str):
            return StringLit(value)
        raise TypeError(f"not a literal value: {value!r}")

    def executed_lines(self) -> int:
        lines = {s.src.line for s in self.statements
                 if s.src is not None and s.src.file == self.filename}
        return len(lines)
