"""The analysis engine: plugin interface, shape maps, initial ascription,
variable equivalence classes, the merge/propagation fixed point, and the
type-checking pass that counts error locations.

A configuration supplies five things: how values are ascribed, the
least-upper-bound operator, the function-merge operator, the merge policy
(flow/context sensitivity plus flags), and the checking rules.  Everything
else here is shared machinery.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from . import lattice as lt
from .lattice import (
    BOTTOM, FuncSig, FunctionType, ObjectType, TOP, Type, UnionType,
    fold_rec, fresh_binder, is_subtype, lub_subtyping, render, type_equal,
)
from .tracelang import (
    Allocate, BeginCall, Delete, EndCall, EndInit, FieldRead, FieldWrite,
    PROTO_PROP, SourceLoc, TraceProgram, TraceVar, VarRead, VarWrite,
)
from .traceval import (
    BoolV, ConcreteValue, FuncRef, HeapHistory, NullV, NumberV, ObjRef,
    StringV, UndefinedV, evaluate_trace,
)


class NonTermination(Exception):
    """The merge fixed point failed to stabilize; the plugin lub is not
    monotone or has unbounded chains."""


TEMP_NAMES = ("ret",)


def is_temp_name(name: str) -> bool:
    return name in TEMP_NAMES or (name.startswith("tmp") and name[3:].isdigit())


def frame_function(frame: str) -> str:
    if frame in ("G", "N"):
        return frame
    base, _, k = frame.rpartition("_")
    return base if base and k.isdigit() else frame


# ---------------------------------------------------------------------------
# plugin interface

@dataclass
class TypeSystemPlugin:
    """The five-component strategy defining one source-level type system."""

    name: str
    lub: Callable[[Type, Type], Type]
    lub_fn: Callable[[list[FuncSig]], Type]
    flow: str = "FI"          # FI | FS
    context: str = "CI"       # CI | CS
    propagate_assignments: bool = True
    # CS partitioning: maps each invocation to a key; None means one key
    # per dynamic invocation (its frame id)
    assign_context_keys: Optional[Callable] = None
    checker: str = "core"     # core | fixed
    fixed_layout: bool = False

    def ascribe_primitive(self, v: ConcreteValue) -> Type:
        if isinstance(v, NullV):
            return lt.NULL
        if isinstance(v, UndefinedV):
            return lt.UNDEFINED
        if isinstance(v, BoolV):
            return lt.BOOLEAN
        if isinstance(v, NumberV):
            return lt.NUMBER
        if isinstance(v, StringV):
            return lt.STRING
        raise TypeError(f"not a primitive: {v!r}")


# ---------------------------------------------------------------------------
# invocations

@dataclass
class InvocationRecord:
    index: int                      # begin-call statement index
    src: Optional[SourceLoc]
    callee_id: int
    receiver: ConcreteValue
    args: tuple
    result: ConcreteValue
    frame: Optional[str]            # callee frame, from the result variable
    sig: Optional[FuncSig] = None   # concrete per-invocation signature
    key: str = "{}"                 # context key under CS merging
    inst: Optional[dict] = None     # type-variable instantiation (poly)


def collect_invocations(trace: TraceProgram, values: dict) -> list[InvocationRecord]:
    records: list[InvocationRecord] = []
    stack: list[tuple[int, BeginCall]] = []
    for index, stmt in enumerate(trace.statements):
        if isinstance(stmt, BeginCall):
            stack.append((index, stmt))
        elif isinstance(stmt, EndCall) and stack:
            bindex, begin = stack.pop()
            callee = values.get(begin.callee)
            if not isinstance(callee, (ObjRef, FuncRef)):
                continue
            records.append(InvocationRecord(
                index=bindex,
                src=begin.src,
                callee_id=callee.id,
                receiver=values.get(begin.receiver, UndefinedV()),
                args=tuple(values.get(a, UndefinedV()) for a in begin.args),
                result=values.get(stmt.result, UndefinedV()),
                frame=stmt.result.frame,
            ))
    records.sort(key=lambda r: r.index)
    return records


# ---------------------------------------------------------------------------
# shape maps

@dataclass
class ShapeMap:
    """Flattened per-object property-to-value-set maps derived from the heap
    history, with the pre-initialization restriction used by fixed-layout
    ascription."""

    heap: HeapHistory
    trace_len: int

    def value_map(self, obj_id: int) -> list[tuple[str, list]]:
        oh = self.heap.objects[obj_id]
        return [(p, e.values) for p, e in oh.visible.items()]

    def init_boundary(self, obj_id: int) -> int:
        end = self.heap.objects[obj_id].end_init_index
        return end if end is not None else self.trace_len

    def restricted(self, obj_id: int) -> tuple[list, list]:
        """(read-write, read-only) maps: own/inherited properties present
        before the end of initialization, each with its value list."""
        oh = self.heap.objects[obj_id]
        boundary = self.init_boundary(obj_id)
        rw, ro = [], []
        for p, e in oh.visible.items():
            if e.first_own_index is not None and e.first_own_index <= boundary:
                rw.append((p, e.own_values))
            elif e.first_inherited_index is not None and e.first_inherited_index <= boundary:
                ro.append((p, e.inherited_values))
        return rw, ro


@dataclass
class ShadowRecord:
    obj_id: int
    prop: str
    child: Type
    parent: Type
    loc: Optional[SourceLoc]


# ---------------------------------------------------------------------------
# ascription

class Ascriber:
    """Memoized value ascription: one type per object instance for the whole
    execution, functions combined over their invocations, cycles closed with
    recursive types."""

    def __init__(self, heap: HeapHistory, shapes: ShapeMap, plugin: TypeSystemPlugin,
                 invocations: list[InvocationRecord]):
        self.heap = heap
        self.shapes = shapes
        self.plugin = plugin
        self.by_fn: dict[int, list[InvocationRecord]] = {}
        for rec in invocations:
            self.by_fn.setdefault(rec.callee_id, []).append(rec)
        self.memo: dict[int, Type] = {}
        self._in_progress: dict[int, int] = {}
        self.shadow_records: list[ShadowRecord] = []
        self.missing_end_init: list[int] = []
        self._shadow_seen: set = set()
        # constructor names for instances: prototype object -> owning function
        self._proto_owner: dict[int, int] = {}
        for fid in heap.function_ids:
            for _, kind, prop, value in heap.objects[fid].own_events:
                if kind == "write" and prop == "prototype" and \
                        isinstance(value, (ObjRef, FuncRef)):
                    self._proto_owner.setdefault(value.id, fid)
                    break

    # -- public entry points

    def ascribe(self, v: ConcreteValue) -> Type:
        if isinstance(v, (ObjRef, FuncRef)):
            if self.heap.is_function(v.id):
                return self.ascribe_function(v.id)
            return self.ascribe_object(v.id)
        return self.plugin.ascribe_primitive(v)

    def ascribe_object(self, obj_id: int) -> Type:
        if obj_id in self.memo:
            return self.memo[obj_id]
        if obj_id in self._in_progress:
            return lt.VarType(self._in_progress[obj_id])
        binder = fresh_binder()
        self._in_progress[obj_id] = binder
        try:
            body = (self._fixed_object_type(obj_id) if self.plugin.fixed_layout
                    else self._core_object_type(obj_id))
        finally:
            del self._in_progress[obj_id]
        t = fold_rec(binder, body)
        if not (lt.free_vars(t) & set(self._in_progress.values())):
            self.memo[obj_id] = t
        return t

    def ascribe_function(self, fn_id: int) -> Type:
        if fn_id in self.memo:
            return self.memo[fn_id]
        if fn_id in self._in_progress:
            return lt.VarType(self._in_progress[fn_id])
        recs = self.by_fn.get(fn_id, [])
        if not recs:
            t: Type = FunctionType((FuncSig(BOTTOM, (), BOTTOM),), uncalled=True)
            self.memo[fn_id] = t
            return t
        binder = fresh_binder()
        self._in_progress[fn_id] = binder
        try:
            sigs = []
            for rec in recs:
                sig = FuncSig(self.ascribe(rec.receiver),
                              tuple(self.ascribe(a) for a in rec.args),
                              self.ascribe(rec.result))
                rec.sig = sig
                sigs.append(sig)
            body = self.plugin.lub_fn(sigs)
        finally:
            del self._in_progress[fn_id]
        t = fold_rec(binder, body)
        if not (lt.free_vars(t) & set(self._in_progress.values())):
            self.memo[fn_id] = t
        return t

    # -- object flavors

    def _name_hint(self, obj_id: int) -> Optional[str]:
        proto = self.heap.objects[obj_id].first_proto()
        if proto is not None and proto in self._proto_owner:
            return self.heap.objects[self._proto_owner[proto]].alloc_name
        return None

    def _fold_values(self, values: list) -> Type:
        t = BOTTOM
        for v in values:
            t = self.plugin.lub(t, self.ascribe(v))
        return t

    def _core_object_type(self, obj_id: int) -> ObjectType:
        props = tuple((p, self._fold_values(vals))
                      for p, vals in self.shapes.value_map(obj_id))
        precise = self.heap.objects[obj_id].end_init_index is not None
        return ObjectType(props, precise=precise, name_hint=self._name_hint(obj_id))

    def _fixed_object_type(self, obj_id: int) -> ObjectType:
        oh = self.heap.objects[obj_id]
        if oh.end_init_index is None:
            if obj_id not in self.missing_end_init:
                self.missing_end_init.append(obj_id)
        rw_map, ro_map = self.shapes.restricted(obj_id)
        named = {p for p, _ in rw_map} | {p for p, _ in ro_map}
        order = [p for p in oh.visible if p in named]
        types = {p: self._fold_values(vals) for p, vals in rw_map + ro_map}
        props = tuple((p, types[p]) for p in order)
        self._record_shadows(obj_id)
        return ObjectType(
            props,
            precise=oh.end_init_index is not None,
            rw=frozenset(p for p, _ in rw_map),
            ro=frozenset(p for p, _ in ro_map),
            name_hint=self._name_hint(obj_id),
        )

    def _record_shadows(self, obj_id: int) -> None:
        """A shadowing event is an own property that also exists on the
        prototype chain; the consistency check compares the two types."""
        oh = self.heap.objects[obj_id]
        for p, e in oh.visible.items():
            if not e.own_values or (obj_id, p) in self._shadow_seen:
                continue
            parent_values = self._chain_own_values(obj_id, p)
            if parent_values is None:
                continue
            self._shadow_seen.add((obj_id, p))
            self.shadow_records.append(ShadowRecord(
                obj_id, p,
                child=self._fold_values(e.own_values),
                parent=self._fold_values(parent_values),
                loc=oh.alloc_src,
            ))

    def _chain_own_values(self, obj_id: int, prop: str):
        cur = self.heap.objects[obj_id].first_proto()
        seen = {obj_id}
        while cur is not None and cur not in seen:
            seen.add(cur)
            values = [v for _, kind, p, v in self.heap.objects[cur].own_events
                      if kind == "write" and p == prop]
            if values:
                return values
            cur = self.heap.objects[cur].first_proto()
        return None


# ---------------------------------------------------------------------------
# type environments and equivalence classes

@dataclass
class TypeEnv:
    stage: str  # gamma0 | gamma_hat
    mapping: dict

    def __getitem__(self, var: TraceVar) -> Type:
        return self.mapping[var]

    def get(self, var: TraceVar, default=None):
        return self.mapping.get(var, default)


@dataclass
class EquivClasses:
    class_of: dict
    members: dict  # key -> [TraceVar] in definition order
    order: list    # class keys in first-definition order


def build_classes(trace: TraceProgram, plugin: TypeSystemPlugin,
                  frame_keys: Optional[dict] = None) -> EquivClasses:
    frame_keys = frame_keys or {}
    class_of: dict = {}
    members: dict = {}
    order: list = []

    for stmt in trace.statements:
        if not isinstance(stmt, VarWrite):
            continue
        v = stmt.lhs
        if is_temp_name(v.name):
            key = ("one", v)
        elif plugin.flow == "FS":
            if plugin.context == "CS" or stmt.src is None:
                key = ("one", v)
            else:
                key = ("fs", v.name, stmt.src)
        else:  # FI
            fn = frame_function(v.frame)
            if plugin.context == "CI":
                key = ("fi", v.name, fn)
            else:
                key = ("fics", v.name, fn, frame_keys.get(v.frame, v.frame))
        class_of[v] = key
        if key not in members:
            members[key] = []
            order.append(key)
        members[key].append(v)
    return EquivClasses(class_of, members, order)


def build_gamma0(trace: TraceProgram, values: dict, ascriber: Ascriber) -> TypeEnv:
    mapping = {}
    for stmt in trace.statements:
        if isinstance(stmt, VarWrite):
            mapping[stmt.lhs] = ascriber.ascribe(values[stmt.lhs])
    return TypeEnv("gamma0", mapping)


def build_gamma_hat(trace: TraceProgram, gamma0: TypeEnv, classes: EquivClasses,
                    plugin: TypeSystemPlugin, order: Optional[list] = None,
                    fallback: str = "precise",
                    max_sweeps: int = 1000) -> TypeEnv:
    """Least fixed point of merge + propagation over variable classes.

    Every class is seeded with the joined initial types of its members;
    `x = y` statements propagate the class type of y (unless assignment
    propagation is disabled), and field reads `b.p` propagate the property
    type out of the current class type of b, falling back to the precise
    property type from the initial environment when merging erased it.
    """
    table: dict = {}
    for key in classes.order:
        t = BOTTOM
        for v in classes.members[key]:
            t = plugin.lub(t, gamma0[v])
        table[key] = t

    contribs: dict = {k: [] for k in classes.order}
    dependents: dict = {k: [] for k in classes.order}
    for stmt in trace.statements:
        if not isinstance(stmt, VarWrite):
            continue
        target = classes.class_of[stmt.lhs]
        if isinstance(stmt.rhs, VarRead) and plugin.propagate_assignments:
            src = classes.class_of[stmt.rhs.var]
            contribs[target].append(("var", src))
            dependents[src].append(target)
        elif isinstance(stmt.rhs, FieldRead):
            src = classes.class_of[stmt.rhs.base]
            contribs[target].append(("field", src, stmt.rhs.base,
                                     stmt.rhs.name, stmt.lhs))
            dependents[src].append(target)

    def recompute(key) -> Type:
        t = BOTTOM
        for v in classes.members[key]:
            t = plugin.lub(t, gamma0[v])
        for c in contribs[key]:
            if c[0] == "var":
                t = plugin.lub(t, table[c[1]])
            else:
                _, src, base_var, prop, lhs_var = c
                view = lt._object_view(table[src])
                pt = view.prop(prop) if view is not None else None
                if pt is None:
                    if fallback == "top":
                        pt = TOP
                    else:
                        view0 = lt._object_view(gamma0[base_var])
                        pt = view0.prop(prop) if view0 is not None else None
                        if pt is None:
                            pt = gamma0[lhs_var]
                t = plugin.lub(t, pt)
        return t

    worklist = list(order if order is not None else classes.order)
    pending = set(worklist)
    sweeps = 0
    budget = max_sweeps * max(1, len(classes.order))
    while worklist:
        key = worklist.pop()
        pending.discard(key)
        sweeps += 1
        if sweeps > budget:
            raise NonTermination(f"no fixed point after {sweeps} class updates")
        new = recompute(key)
        if not type_equal(new, table[key]):
            table[key] = new
            for dep in dependents[key]:
                if dep not in pending:
                    pending.add(dep)
                    worklist.append(dep)

    mapping = {v: table[k] for v, k in classes.class_of.items()}
    return TypeEnv("gamma_hat", mapping)


# ---------------------------------------------------------------------------
# error reporting

NO_LOC = SourceLoc("<none>", 0, 0)

RATIO_KINDS = ("ro_rw", "prototypal", "inheritance")


@dataclass
class ErrorReport:
    config: str
    counts: dict = field(default_factory=dict)          # (loc, kind) -> n
    ratio_events: dict = field(default_factory=dict)    # kind -> [(loc, is_error)]
    subject_prefixes: tuple = ()

    def add(self, loc: Optional[SourceLoc], kind: str, n: int = 1) -> None:
        if n:
            key = (loc or NO_LOC, kind)
            self.counts[key] = self.counts.get(key, 0) + n

    def add_ratio_event(self, kind: str, loc: Optional[SourceLoc], is_error: bool) -> None:
        self.ratio_events.setdefault(kind, []).append((loc or NO_LOC, is_error))
        if is_error:
            self.add(loc, {"ro_rw": "ro-write", "prototypal": "imprecise-proto",
                           "inheritance": "shadow-incompat"}[kind])

    def _included(self, loc: SourceLoc) -> bool:
        if not self.subject_prefixes:
            return True
        return any(loc.file.startswith(p) for p in self.subject_prefixes)

    def rows(self) -> list:
        picked = [(loc, kind, n) for (loc, kind), n in self.counts.items()
                  if self._included(loc)]
        picked.sort(key=lambda r: (r[0].file, r[0].line, r[0].col, r[1]))
        return picked

    @property
    def error_locations(self) -> int:
        return len({loc for loc, _, _ in self.rows()})

    @property
    def total_errors(self) -> int:
        return sum(n for _, _, n in self.rows())

    def ratios(self) -> dict:
        out = {}
        for kind in RATIO_KINDS:
            events = [(loc, e) for loc, e in self.ratio_events.get(kind, [])
                      if self._included(loc)]
            out[kind] = (sum(1 for _, e in events if e), len(events))
        return out

    def to_csv(self) -> str:
        lines = ["location,kind,count"]
        lines += [f"{loc},{kind},{n}" for loc, kind, n in self.rows()]
        lines.append("config,error_locations,total_errors")
        lines.append(f"{self.config},{self.error_locations},{self.total_errors}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# type checking

def _substitute_vars(t: Type, inst: Optional[dict]) -> Type:
    for var_id in sorted(lt.free_vars(t)):
        repl = TOP if inst is None else inst.get(var_id, TOP)
        t = lt.subst_var(t, var_id, repl)
    return t


def _union_members_with_prop(t: Type, prop: str) -> list:
    out = []
    for m in (t.members if isinstance(t, UnionType) else [t]):
        view = lt._object_view(m)
        if view is not None and view.prop(prop) is not None:
            out.append(view)
    return out


class _CoreChecker:
    """Standard rules: assignment compatibility at writes, property existence
    and type at reads, receiver/argument checks at calls (too few arguments
    permitted), optimistic union handling, and every use of or assignment to
    a Top-typed variable counted as one error."""

    def __init__(self, ghat: TypeEnv, gamma0: TypeEnv, inv_by_index: dict,
                 report: ErrorReport):
        self.ghat = ghat
        self.gamma0 = gamma0
        self.inv_by_index = inv_by_index
        self.report = report

    def _top_use(self, var: TraceVar, loc) -> bool:
        if isinstance(self.ghat.get(var), lt.TopType):
            self.report.add(loc, "top-use")
            return True
        return False

    def check(self, index: int, stmt) -> None:
        loc = stmt.src
        if isinstance(stmt, VarWrite):
            lhs_top = self._top_use(stmt.lhs, loc)
            rhs = stmt.rhs
            if isinstance(rhs, VarRead):
                if not self._top_use(rhs.var, loc) and not lhs_top:
                    if not is_subtype(self.ghat[rhs.var], self.ghat[stmt.lhs]):
                        self.report.add(loc, "write-incompat")
            elif isinstance(rhs, FieldRead):
                if not self._top_use(rhs.base, loc):
                    self._check_prop_access(self.ghat[rhs.base], rhs.name, loc)
        elif isinstance(stmt, FieldWrite):
            if stmt.name == PROTO_PROP:
                return  # prototype links are checked by the fixed-layout system
            if self._top_use(stmt.base, loc):
                return
            self._top_use(stmt.rhs, loc)
            base_t = self.ghat[stmt.base]
            candidates = _union_members_with_prop(base_t, stmt.name)
            if not candidates:
                self.report.add(loc, "missing-prop")
                return
            value_t = self.ghat[stmt.rhs]
            if not any(is_subtype(value_t, v.prop(stmt.name)) for v in candidates):
                self.report.add(loc, "write-incompat")
        elif isinstance(stmt, Delete):
            if not self._top_use(stmt.base, loc):
                self._check_prop_access(self.ghat[stmt.base], stmt.name, loc)
        elif isinstance(stmt, BeginCall):
            self._check_call(index, stmt, loc)

    def _check_prop_access(self, base_t: Type, prop: str, loc) -> None:
        if not _union_members_with_prop(base_t, prop):
            self.report.add(loc, "missing-prop")

    def _check_call(self, index: int, stmt: BeginCall, loc) -> None:
        if self._top_use(stmt.callee, loc):
            return
        tops = [v for v in (stmt.receiver, *stmt.args) if self._top_use(v, loc)]
        callee_t = self.ghat[stmt.callee]
        fns = [m for m in (callee_t.members if isinstance(callee_t, UnionType)
                           else [callee_t]) if isinstance(m, FunctionType)]
        if not fns:
            self.report.add(loc, "call-incompat")
            return
        rec = self.inv_by_index.get(index)
        inst = rec.inst if rec is not None else None
        recv_t = self.ghat[stmt.receiver]
        arg_ts = [self.ghat[a] for a in stmt.args]
        skip_recv = stmt.receiver in tops
        skip_args = {i for i, a in enumerate(stmt.args) if a in tops}

        def accepts(sig: FuncSig) -> int:
            bad = 0
            if not skip_recv and not is_subtype(recv_t, _substitute_vars(sig.receiver, inst)):
                bad += 1
            for i in range(min(len(arg_ts), len(sig.params))):
                if i in skip_args:
                    continue
                if not is_subtype(arg_ts[i], _substitute_vars(sig.params[i], inst)):
                    bad += 1
            return bad

        # for an intersection some case must accept; a plain signature is the
        # one-case instance of the same rule
        failures = [accepts(sig) for fn in fns for sig in fn.sigs]
        if 0 not in failures:
            self.report.add(loc, "call-incompat", min(failures))


class _FixedChecker:
    """The fixed-object-layout checks: property writes only on read-write
    properties, prototype parents must have precise types, and shadowed
    properties must keep the parent's type (counted at ascription)."""

    def __init__(self, ghat: TypeEnv, report: ErrorReport):
        self.ghat = ghat
        self.report = report

    def check(self, index: int, stmt) -> None:
        if not isinstance(stmt, FieldWrite):
            return
        loc = stmt.src
        if stmt.name == PROTO_PROP:
            target = lt._object_view(self.ghat[stmt.rhs])
            ok = target is not None and target.precise
            self.report.add_ratio_event("prototypal", loc, not ok)
            return
        view = lt._object_view(self.ghat[stmt.base])
        if view is None:
            return  # only writes on object-typed bases are counted
        writable = view.rw if view.rw is not None else frozenset(view.prop_names())
        self.report.add_ratio_event("ro_rw", loc, stmt.name not in writable)


def typecheck_trace(trace: TraceProgram, ghat: TypeEnv, gamma0: TypeEnv,
                    plugin: TypeSystemPlugin, invocations: list[InvocationRecord],
                    ascriber: Optional[Ascriber] = None,
                    subject_prefixes: tuple = ()) -> ErrorReport:
    report = ErrorReport(plugin.name, subject_prefixes=subject_prefixes)
    inv_by_index = {r.index: r for r in invocations}
    checker = (_FixedChecker(ghat, report) if plugin.checker == "fixed"
               else _CoreChecker(ghat, gamma0, inv_by_index, report))
    for index, stmt in enumerate(trace.statements):
        checker.check(index, stmt)
    if plugin.checker == "fixed" and ascriber is not None:
        for rec in ascriber.shadow_records:
            report.add_ratio_event("inheritance", rec.loc,
                                   not type_equal(rec.child, rec.parent))
    return report


# ---------------------------------------------------------------------------
# full pipeline

@dataclass
class Analysis:
    trace: TraceProgram
    plugin: TypeSystemPlugin
    values: dict
    heap: HeapHistory
    shapes: ShapeMap
    ascriber: Ascriber
    invocations: list
    gamma0: TypeEnv
    classes: EquivClasses
    gamma_hat: TypeEnv

    def variable_types(self) -> list:
        """Fig-9-style listing: merged type per source variable, ordered by
        first write."""
        seen: dict = {}
        for stmt in self.trace.statements:
            if not isinstance(stmt, VarWrite):
                continue
            v = stmt.lhs
            if is_temp_name(v.name) or v.name.startswith("esc") or v.name == "this":
                continue
            fn = frame_function(v.frame)
            if fn == "N":
                continue
            label = v.name if fn == "G" else f"{v.name}@{fn}"
            entry = seen.setdefault(label, [stmt.src, []])
            key = self.classes.class_of[v]
            if key not in entry[1]:
                entry[1].append(key)
        out = []
        for label, (src, keys) in seen.items():
            t = BOTTOM
            for key in keys:
                t = self.plugin.lub(t, self.gamma_hat[self.classes.members[key][0]])
            out.append((src, label, render(t)))
        return out


def analyze(trace: TraceProgram, plugin: TypeSystemPlugin,
            order: Optional[list] = None, fallback: str = "precise") -> Analysis:
    values, heap = evaluate_trace(trace)
    shapes = ShapeMap(heap, len(trace.statements))
    invocations = collect_invocations(trace, values)
    ascriber = Ascriber(heap, shapes, plugin, invocations)
    gamma0 = build_gamma0(trace, values, ascriber)
    frame_keys: dict = {}
    if plugin.context == "CS":
        if plugin.assign_context_keys is not None:
            for fid, recs in ascriber.by_fn.items():
                plugin.assign_context_keys(ascriber.ascribe_function(fid), recs)
        for rec in invocations:
            if rec.frame is not None:
                frame_keys[rec.frame] = rec.key if plugin.assign_context_keys else rec.frame
    classes = build_classes(trace, plugin, frame_keys)
    gamma_hat = build_gamma_hat(trace, gamma0, classes, plugin,
                                order=order, fallback=fallback)
    return Analysis(trace, plugin, values, heap, shapes, ascriber,
                    invocations, gamma0, classes, gamma_hat)


def run_typecheck(analysis: Analysis, subject_prefixes: tuple = ()) -> ErrorReport:
    return typecheck_trace(analysis.trace, analysis.gamma_hat, analysis.gamma0,
                           analysis.plugin, analysis.invocations,
                           ascriber=analysis.ascriber,
                           subject_prefixes=subject_prefixes)
