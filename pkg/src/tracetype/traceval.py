"""Deterministic replay of a trace: recovers the concrete value held by
every trace variable plus the heap history needed to build shape maps.

The heap history keeps, per object, its own property bindings in trace
order, its prototype-link history, its end-of-initialization index, and a
flattened visibility log: every (property, value) pair that could be read
from the object (through the prototype chain, child shadowing parent) at
some point of the trace.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .tracelang import (
    Allocate, BeginCall, BoolLit, Delete, EndCall, EndInit, FieldRead,
    FieldWrite, NullLit, NumberLit, PROTO_PROP, SourceLoc, StringLit,
    TraceProgram, TraceVar, UndefinedLit, VarRead, VarWrite,
)


# --- concrete values ---

class ConcreteValue:
    __slots__ = ()


@dataclass(frozen=True)
class NullV(ConcreteValue):
    pass


@dataclass(frozen=True)
class UndefinedV(ConcreteValue):
    pass


@dataclass(frozen=True)
class BoolV(ConcreteValue):
    value: bool


@dataclass(frozen=True)
class NumberV(ConcreteValue):
    value: float


@dataclass(frozen=True)
class StringV(ConcreteValue):
    value: str


@dataclass(frozen=True)
class ObjRef(ConcreteValue):
    id: int


@dataclass(frozen=True)
class FuncRef(ConcreteValue):
    """An object that was observed being called.  `decl` is the source
    location of its allocation, when known."""

    id: int
    decl: Optional[SourceLoc] = None


def value_equal(a: ConcreteValue, b: ConcreteValue) -> bool:
    """Replay comparison: object identity is by allocation ordinal; whether
    an object was ever called (ObjRef vs FuncRef) does not matter."""
    if isinstance(a, (ObjRef, FuncRef)) and isinstance(b, (ObjRef, FuncRef)):
        return a.id == b.id
    if isinstance(a, NumberV) and isinstance(b, NumberV):
        return a.value == b.value or (a.value != a.value and b.value != b.value)
    return a == b


@dataclass
class VisEntry:
    """All values a property could produce when read from one object, with
    the trace indexes needed to restrict shape maps to pre-init bindings."""

    first_index: int
    first_own_index: Optional[int] = None
    first_inherited_index: Optional[int] = None
    values: list = field(default_factory=list)
    own_values: list = field(default_factory=list)
    inherited_values: list = field(default_factory=list)

    def add(self, value: ConcreteValue, index: int, inherited: bool) -> None:
        if not any(value_equal(value, v) for v in self.values):
            self.values.append(value)
        if inherited:
            if self.first_inherited_index is None:
                self.first_inherited_index = index
            if not any(value_equal(value, v) for v in self.inherited_values):
                self.inherited_values.append(value)
        else:
            if self.first_own_index is None:
                self.first_own_index = index
            if not any(value_equal(value, v) for v in self.own_values):
                self.own_values.append(value)


@dataclass
class ObjectHistory:
    obj_id: int
    alloc_index: int
    alloc_src: Optional[SourceLoc]
    alloc_name: Optional[str]  # lhs name of the allocating write, if any
    end_init_index: Optional[int] = None
    own_events: list = field(default_factory=list)  # (index, kind, prop, value)
    proto_events: list = field(default_factory=list)  # (index, target id | None)
    visible: dict = field(default_factory=dict)  # prop -> VisEntry

    def first_proto(self) -> Optional[int]:
        return self.proto_events[0][1] if self.proto_events else None


@dataclass
class TraceDefect:
    index: int
    kind: str
    detail: str


@dataclass
class HeapHistory:
    objects: dict = field(default_factory=dict)  # id -> ObjectHistory
    function_ids: set = field(default_factory=set)
    defects: list = field(default_factory=list)

    def is_function(self, obj_id: int) -> bool:
        return obj_id in self.function_ids


_TEMP_PREFIXES = ("tmp", "ret")


def _name_hint(var: TraceVar) -> Optional[str]:
    name = var.name
    if name.startswith(_TEMP_PREFIXES) or name.startswith("esc"):
        return None
    return name


class _Heap:
    """Mutable replay state: current own maps, prototype graph, and the
    incremental visibility log."""

    def __init__(self, history: HeapHistory):
        self.history = history
        self.own: dict[int, dict] = {}
        self.parent: dict[int, Optional[int]] = {}
        self.children: dict[int, set] = {}

    def allocate(self, index: int, src, name) -> int:
        oid = len(self.history.objects)
        self.history.objects[oid] = ObjectHistory(oid, index, src, name)
        self.own[oid] = {}
        self.parent[oid] = None
        self.children[oid] = set()
        return oid

    def _descendants(self, oid: int) -> list[int]:
        out, seen, queue = [], {oid}, [oid]
        while queue:
            cur = queue.pop()
            for child in self.children[cur]:
                if child not in seen:
                    seen.add(child)
                    out.append(child)
                    queue.append(child)
        return sorted(out)

    def _owner(self, oid: int, prop: str) -> Optional[int]:
        cur, seen = oid, set()
        while cur is not None and cur not in seen:
            seen.add(cur)
            if prop in self.own[cur]:
                return cur
            cur = self.parent[cur]
        return None

    def _vis(self, oid: int, prop: str, index: int) -> VisEntry:
        visible = self.history.objects[oid].visible
        if prop not in visible:
            visible[prop] = VisEntry(first_index=index)
        return visible[prop]

    def _refresh_full_view(self, oid: int, index: int) -> None:
        cur, seen = oid, set()
        while cur is not None and cur not in seen:
            seen.add(cur)
            for prop, value in self.own[cur].items():
                if self._owner(oid, prop) == cur:
                    self._vis(oid, prop, index).add(value, index, cur != oid)
            cur = self.parent[cur]

    def set_proto(self, index: int, oid: int, target: Optional[int]) -> None:
        old = self.parent[oid]
        if old is not None:
            self.children[old].discard(oid)
        self.parent[oid] = target
        if target is not None:
            self.children[target].add(oid)
        self.history.objects[oid].proto_events.append((index, target))
        for o in [oid] + self._descendants(oid):
            self._refresh_full_view(o, index)

    def write(self, index: int, oid: int, prop: str, value: ConcreteValue) -> None:
        self.own[oid][prop] = value
        self.history.objects[oid].own_events.append((index, "write", prop, value))
        for o in [oid] + self._descendants(oid):
            if self._owner(o, prop) == oid:
                self._vis(o, prop, index).add(value, index, o != oid)

    def delete(self, index: int, oid: int, prop: str) -> None:
        self.own[oid].pop(prop, None)
        self.history.objects[oid].own_events.append((index, "delete", prop, None))
        # a delete can expose a previously shadowed inherited binding
        for o in [oid] + self._descendants(oid):
            owner = self._owner(o, prop)
            if owner is not None:
                self._vis(o, prop, index).add(self.own[owner][prop], index, owner != o)


def evaluate_trace(t: TraceProgram) -> tuple[dict, HeapHistory]:
    """Replay the trace.  Returns (ValueOf, heap history); deterministic.

    Field operations on non-object bases are trace defects: they are recorded
    and skipped, and a skipped write's left-hand side evaluates to undefined
    so ValueOf stays total.
    """
    history = HeapHistory()
    heap = _Heap(history)
    values: dict[TraceVar, ConcreteValue] = {}
    callee_ids: set[int] = set()

    def lookup(var: TraceVar) -> ConcreteValue:
        return values.get(var, UndefinedV())

    for index, stmt in enumerate(t.statements):
        if isinstance(stmt, VarWrite):
            rhs = stmt.rhs
            if isinstance(rhs, Allocate):
                oid = heap.allocate(index, stmt.src, _name_hint(stmt.lhs))
                values[stmt.lhs] = ObjRef(oid)
            elif isinstance(rhs, VarRead):
                values[stmt.lhs] = lookup(rhs.var)
            elif isinstance(rhs, FieldRead):
                base = lookup(rhs.base)
                if not isinstance(base, (ObjRef, FuncRef)):
                    history.defects.append(TraceDefect(index, "field-on-primitive",
                                                       f"read {rhs.base}.{rhs.name}"))
                    values[stmt.lhs] = UndefinedV()
                    continue
                owner = heap._owner(base.id, rhs.name)
                values[stmt.lhs] = (heap.own[owner][rhs.name]
                                    if owner is not None else UndefinedV())
            elif isinstance(rhs, NullLit):
                values[stmt.lhs] = NullV()
            elif isinstance(rhs, UndefinedLit):
                values[stmt.lhs] = UndefinedV()
            elif isinstance(rhs, BoolLit):
                values[stmt.lhs] = BoolV(rhs.value)
            elif isinstance(rhs, NumberLit):
                values[stmt.lhs] = NumberV(rhs.value)
            elif isinstance(rhs, StringLit):
                values[stmt.lhs] = StringV(rhs.value)
            else:
                raise TypeError(f"unknown expression {rhs!r}")
        elif isinstance(stmt, FieldWrite):
            base = lookup(stmt.base)
            if not isinstance(base, (ObjRef, FuncRef)):
                history.defects.append(TraceDefect(index, "field-on-primitive",
                                                   f"write {stmt.base}.{stmt.name}"))
                continue
            value = lookup(stmt.rhs)
            if stmt.name == PROTO_PROP:
                if isinstance(value, (ObjRef, FuncRef)):
                    heap.set_proto(index, base.id, value.id)
                else:
                    history.defects.append(TraceDefect(index, "non-object-proto",
                                                       f"{stmt.base}.{PROTO_PROP}"))
            else:
                heap.write(index, base.id, stmt.name, value)
        elif isinstance(stmt, Delete):
            base = lookup(stmt.base)
            if not isinstance(base, (ObjRef, FuncRef)):
                history.defects.append(TraceDefect(index, "field-on-primitive",
                                                   f"delete {stmt.base}.{stmt.name}"))
                continue
            heap.delete(index, base.id, stmt.name)
        elif isinstance(stmt, BeginCall):
            callee = lookup(stmt.callee)
            if isinstance(callee, (ObjRef, FuncRef)):
                callee_ids.add(callee.id)
        elif isinstance(stmt, EndInit):
            target = lookup(stmt.obj)
            if isinstance(target, (ObjRef, FuncRef)):
                oh = history.objects[target.id]
                if oh.end_init_index is None:
                    oh.end_init_index = index
        elif isinstance(stmt, EndCall):
            pass
        else:
            raise TypeError(f"unknown statement {stmt!r}")

    history.function_ids = callee_ids

    # objects that were called are functions; rewrite their references
    def resolve(v: ConcreteValue) -> ConcreteValue:
        if isinstance(v, (ObjRef, FuncRef)) and v.id in callee_ids:
            return FuncRef(v.id, history.objects[v.id].alloc_src)
        return v

    values = {var: resolve(v) for var, v in values.items()}
    for oh in history.objects.values():
        for entry in oh.visible.values():
            entry.values = [resolve(v) for v in entry.values]
            entry.own_values = [resolve(v) for v in entry.own_values]
            entry.inherited_values = [resolve(v) for v in entry.inherited_values]
        oh.own_events = [(i, k, p, resolve(v) if v is not None else None)
                         for i, k, p, v in oh.own_events]
    return values, history
