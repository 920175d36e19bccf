"""Native-environment modeling: escape variables, model inference from
pre/post concrete states, and the array builtins.

Every object that crosses the native boundary gets one escape variable
(`esc<id>@N`): passing the object out is a write to it, retrieving the
object is a read, and fresh native objects are allocated into it with
their fields initialized recursively.  Models for most builtins are
inferred by diffing the concrete heap around the call; `sort` is modeled
manually since its rearrangement must be reproduced positionally.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from ..tracelang import (
    BeginCall, Delete, EndCall, FieldRead, FieldWrite, PROTO_PROP, SourceLoc,
    TraceVar, VarRead,
)
from .runtime import (
    Frame, MDObject, NULLV, Recorder, UNDEF, concrete, is_object,
    strict_equals, to_string,
)

ARRAY_METHODS = ("push", "pop", "concat", "indexOf", "sort")


class DuplicateModel(Exception):
    def __init__(self, name: str):
        super().__init__(f"a model for {name!r} is already registered")
        self.name = name


@dataclass
class NativeModel:
    name: str
    mode: str  # inferred | manual
    gen: Optional[Callable] = None  # manual: emits effect statements


@dataclass
class ModelContext:
    """What a manual model generator gets to work with: the call's escaped
    roots with the variables holding them, the pre-call property snapshots,
    and emit helpers running in the native call frame."""

    engine: "NativeEngine"
    frame: Frame
    roots: list          # (MDObject, TraceVar)
    pre: dict            # id(obj) -> dict of pre-call properties
    loc: Optional[SourceLoc]

    def pre_props(self, obj: MDObject) -> dict:
        return self.pre[id(obj)]

    def emit_field_read(self, base_var: TraceVar, prop: str, value) -> TraceVar:
        tmp = self.frame.temp()
        self.engine.recorder.emit_write(tmp, FieldRead(base_var, prop), value, self.loc)
        return tmp

    def emit_field_write(self, base_var: TraceVar, prop: str, tmp: TraceVar) -> None:
        self.engine.recorder.emit(FieldWrite(base_var, prop, tmp, self.loc))


def sort_model(ctx: ModelContext) -> None:
    """Reproduce the observed rearrangement: each index is rewritten from
    the pre-state position that held its new value (reads before writes)."""
    recv, recv_var = ctx.roots[0]
    pre = ctx.pre_props(recv)
    used: set = set()
    moves = []
    for i in range(recv.array_len):
        key = str(i)
        post_value = recv.props.get(key, UNDEF)
        if key in pre and strict_equals(pre[key], post_value):
            continue
        source = None
        for j in range(recv.array_len):
            if j not in used and strict_equals(pre.get(str(j), UNDEF), post_value):
                source = j
                break
        if source is None:
            continue
        used.add(source)
        moves.append((key, str(source), post_value))
    temps = [ctx.emit_field_read(recv_var, src_prop, value)
             for _, src_prop, value in moves]
    for (dst_prop, _, _), tmp in zip(moves, temps):
        ctx.emit_field_write(recv_var, dst_prop, tmp)


class NativeEngine:
    def __init__(self, recorder: Recorder):
        self.recorder = recorder
        self.nframe = Frame("N")
        self.models: dict[str, NativeModel] = {}
        self.register_manual_model("sort", sort_model)
        self.frame_counters: dict[str, int] = {}
        self.global_obj = MDObject()
        self.array_fn = MDObject(builtin="Array")
        self.global_obj.props["Array"] = self.array_fn
        self.method_fns: dict[str, MDObject] = {}

    def register_manual_model(self, name: str, gen: Callable) -> None:
        if name in self.models:
            raise DuplicateModel(name)
        self.models[name] = NativeModel(name, "manual", gen)

    def model_for(self, name: str) -> NativeModel:
        return self.models.get(name, NativeModel(name, "inferred"))

    # -- escape variables

    def _esc_next(self, obj: MDObject) -> TraceVar:
        v = TraceVar(f"esc{obj.id}", obj.esc_occ, "N")
        obj.esc_occ += 1
        return v

    def esc_latest(self, obj: MDObject) -> TraceVar:
        assert obj.esc_occ > 0
        return TraceVar(f"esc{obj.id}", obj.esc_occ - 1, "N")

    def to_native(self, obj: MDObject, from_var: TraceVar,
                  src: Optional[SourceLoc]) -> None:
        if obj.esc_occ > 0 and from_var == self.esc_latest(obj):
            return  # already flowing through its own escape variable
        if obj.id is None:
            self.allocate_native(obj)
            return
        var = self._esc_next(obj)
        self.recorder.emit_write(var, VarRead(from_var), obj, src)

    def from_native(self, value, to_var: TraceVar, src: Optional[SourceLoc]) -> None:
        if is_object(value):
            if value.esc_occ == 0:
                self.allocate_native(value)
            self.recorder.emit_write(to_var, VarRead(self.esc_latest(value)), value, src)
        else:
            self.recorder.emit_write(to_var, self.recorder.literal_expr(value), value, src)

    def allocate_native(self, obj: MDObject) -> None:
        obj.id = self.recorder.next_obj_id  # escape variable is named by id
        var = self._esc_next(obj)
        self.recorder.emit_allocate(var, obj, None)
        for prop, value in list(obj.props.items()):
            fv = self.nframe.temp()
            self.from_native(value, fv, None)
            self.recorder.emit(FieldWrite(var, prop, fv, None))
        if obj.proto is not None:
            fv = self.nframe.temp()
            self.from_native(obj.proto, fv, None)
            self.recorder.emit(FieldWrite(var, PROTO_PROP, fv, None))

    # -- the global object

    def emit_global_model(self) -> None:
        self.allocate_native(self.global_obj)

    def global_var(self) -> TraceVar:
        return self.esc_latest(self.global_obj)

    def read_global(self, name: str, frame: Frame,
                    loc: Optional[SourceLoc]) -> tuple:
        value = self.global_obj.props[name]
        tmp = frame.temp()
        self.recorder.emit_write(tmp, FieldRead(self.global_var(), name), value, loc)
        return value, tmp

    def method_fn(self, name: str) -> MDObject:
        if name not in self.method_fns:
            self.method_fns[name] = MDObject(builtin=name)
        return self.method_fns[name]

    # -- builtin semantics

    def _run_builtin(self, name: str, recv, args: list):
        if name == "Array":
            out = MDObject(array=True)
            out.array_len = len(args)
            for i, a in enumerate(args):
                out.props[str(i)] = a
            return out
        if name == "push":
            value = args[0] if args else UNDEF
            recv.props[str(recv.array_len)] = value
            recv.array_len += 1
            return float(recv.array_len)
        if name == "pop":
            if recv.array_len == 0:
                return UNDEF
            recv.array_len -= 1
            return recv.props.pop(str(recv.array_len), UNDEF)
        if name == "concat":
            out = MDObject(array=True)
            elements = [recv.props.get(str(i), UNDEF) for i in range(recv.array_len)]
            for a in args:
                if is_object(a) and a.array:
                    elements += [a.props.get(str(i), UNDEF) for i in range(a.array_len)]
                else:
                    elements.append(a)
            out.array_len = len(elements)
            for i, e in enumerate(elements):
                out.props[str(i)] = e
            return out
        if name == "indexOf":
            needle = args[0] if args else UNDEF
            for i in range(recv.array_len):
                if strict_equals(recv.props.get(str(i), UNDEF), needle):
                    return float(i)
            return -1.0
        if name == "sort":
            elements = [recv.props.get(str(i), UNDEF) for i in range(recv.array_len)]
            elements.sort(key=to_string)
            for i, e in enumerate(elements):
                recv.props[str(i)] = e
            return recv
        raise KeyError(f"unknown builtin {name!r}")

    # -- the call model

    def call_builtin(self, name: str, fnobj: MDObject, callee_var: Optional[TraceVar],
                     recv, recv_var: TraceVar, args: list, arg_vars: list,
                     caller_frame: Frame, loc: Optional[SourceLoc]) -> tuple:
        rec = self.recorder
        if callee_var is None:
            callee_var = caller_frame.temp()
            self.from_native(fnobj, callee_var, loc)
        rec.emit(BeginCall(callee_var, recv_var, tuple(arg_vars), loc))
        k = self.frame_counters.get(name, 0) + 1
        self.frame_counters[name] = k
        frame = Frame(f"{name}_{k}")

        roots = []
        if is_object(recv):
            self.to_native(recv, recv_var, loc)
            roots.append((recv, recv_var))
        for a, av in zip(args, arg_vars):
            if is_object(a):
                self.to_native(a, av, loc)
                roots.append((a, av))
        pre = {id(obj): dict(obj.props) for obj, _ in roots}

        result = self._run_builtin(name, recv, args)

        ctx = ModelContext(self, frame, roots, pre, loc)
        ret_var = TraceVar("ret", 0, frame.id)
        model = self.model_for(name)
        if model.mode == "manual":
            model.gen(ctx)
            self._emit_result(result, ret_var, pre, roots, frame, loc,
                              allow_read=False)
        else:
            self._emit_inferred(ctx, result, ret_var, roots, pre, frame, loc)
        rec.emit(EndCall(ret_var, loc))
        out = caller_frame.temp()
        rec.emit_write(out, VarRead(ret_var), result, loc)
        return result, out

    def _source_plan(self, value, pre: dict, roots: list):
        for obj, var in roots:
            for prop, held in pre[id(obj)].items():
                if strict_equals(held, value):
                    return ("read", var, prop)
        if is_object(value):
            return ("esc", value) if value.esc_occ > 0 else ("alloc", value)
        return ("lit", value)

    def _emit_inferred(self, ctx: ModelContext, result, ret_var: TraceVar,
                       roots: list, pre: dict, frame: Frame,
                       loc: Optional[SourceLoc]) -> None:
        writes, deletes = [], []
        for obj, var in roots:
            before = pre[id(obj)]
            for prop, value in obj.props.items():
                if prop not in before or not strict_equals(before[prop], value):
                    writes.append((var, prop, value))
            for prop in before:
                if prop not in obj.props:
                    deletes.append((var, prop))

        result_plan = self._source_plan(result, pre, roots)
        # pre-state property reads come first, then writes, then deletions
        if result_plan[0] == "read":
            self.recorder.emit_write(ret_var, FieldRead(result_plan[1], result_plan[2]),
                                     result, loc)
        write_temps = []
        for var, prop, value in writes:
            plan = self._source_plan(value, pre, roots)
            if plan[0] == "read":
                write_temps.append(ctx.emit_field_read(plan[1], plan[2], value))
            else:
                tmp = frame.temp()
                self._emit_plan(plan, tmp, value, loc)
                write_temps.append(tmp)
        for (var, prop, _), tmp in zip(writes, write_temps):
            self.recorder.emit(FieldWrite(var, prop, tmp, loc))
        for var, prop in deletes:
            self.recorder.emit(Delete(var, prop, loc))
        if result_plan[0] != "read":
            self._emit_plan(result_plan, ret_var, result, loc)

    def _emit_result(self, result, ret_var: TraceVar, pre: dict, roots: list,
                     frame: Frame, loc, allow_read: bool) -> None:
        plan = self._source_plan(result, pre, roots)
        if plan[0] == "read" and not allow_read:
            plan = ("esc", result) if is_object(result) and result.esc_occ > 0 \
                else ("lit", result) if not is_object(result) else plan
        if plan[0] == "read":
            self.recorder.emit_write(ret_var, FieldRead(plan[1], plan[2]), result, loc)
        else:
            self._emit_plan(plan, ret_var, result, loc)

    def _emit_plan(self, plan, target: TraceVar, value, loc) -> None:
        kind = plan[0]
        if kind == "lit":
            self.recorder.emit_write(target, self.recorder.literal_expr(value), value, loc)
        elif kind == "esc":
            self.recorder.emit_write(target, VarRead(self.esc_latest(plan[1])), value, loc)
        elif kind == "alloc":
            self.allocate_native(plan[1])
            self.recorder.emit_write(target, VarRead(self.esc_latest(plan[1])), value, loc)
        else:
            raise ValueError(plan)
