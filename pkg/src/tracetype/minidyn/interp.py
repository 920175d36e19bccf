"""Tree-walking MiniDyn interpreter that records a trace as it runs.

Control flow is erased from the trace: conditionals leave only the chosen
branch, loops unroll, and calls are inlined between begin-call/end-call
markers.  Every dynamic read or write of a source variable gets a fresh
occurrence-numbered trace variable in the variable's owning frame; every
implicit operator coercion is written to an explicit temporary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from ..tracelang import (
    BeginCall, Delete, EndCall, EndInit, FieldRead, FieldWrite, PROTO_PROP,
    SourceLoc, TraceProgram, TraceVar, UndefinedLit, VarRead, VarWrite,
)
from . import ast as A
from .natives import ARRAY_METHODS, NativeEngine
from .parser import parse_program
from .runtime import (
    Frame, MDFunction, MDObject, NULLV, Recorder, UNDEF, concrete, is_object,
    strict_equals, to_boolean, to_number, to_prop_name, to_string,
)


class MiniDynRuntimeError(Exception):
    def __init__(self, loc: SourceLoc, kind: str, message: str = ""):
        super().__init__(f"{loc}: {kind}" + (f": {message}" if message else ""))
        self.loc = loc
        self.kind = kind
        self.partial_trace: Optional[TraceProgram] = None


class _Return(Exception):
    def __init__(self, value, var):
        self.value = value
        self.var = var


class Cell:
    __slots__ = ("name", "frame", "value", "var")

    def __init__(self, name: str, frame: Frame):
        self.name = name
        self.frame = frame
        self.value = UNDEF
        self.var: Optional[TraceVar] = None


class Scope:
    def __init__(self, parent: Optional["Scope"] = None):
        self.cells: dict[str, Cell] = {}
        self.parent = parent

    def declare(self, name: str, frame: Frame) -> Cell:
        if name not in self.cells:
            self.cells[name] = Cell(name, frame)
        return self.cells[name]

    def lookup(self, name: str) -> Optional[Cell]:
        scope: Optional[Scope] = self
        while scope is not None:
            if name in scope.cells:
                return scope.cells[name]
            scope = scope.parent
        return None


@dataclass
class Activation:
    frame: Frame
    scope: Scope


@dataclass
class RunInfo:
    statement_count: int
    executed_lines: int
    oracle: list


class Interpreter:
    def __init__(self, filename: str = "<input>"):
        self.recorder = Recorder(filename)
        self.natives = NativeEngine(self.recorder)
        self.frame_counters: dict[str, int] = {}
        self.global_frame = Frame("G")
        self.global_scope = Scope()
        self.globals = Activation(self.global_frame, self.global_scope)

    # -- entry point

    def run(self, program: A.Program) -> tuple[TraceProgram, RunInfo]:
        self.natives.emit_global_model()
        try:
            for stmt in program.body:
                self.exec_stmt(stmt, self.globals)
        except MiniDynRuntimeError as err:
            err.partial_trace = TraceProgram(tuple(self.recorder.statements))
            raise
        trace = TraceProgram(tuple(self.recorder.statements))
        info = RunInfo(len(trace.statements), self.recorder.executed_lines(),
                       self.recorder.oracle)
        return trace, info

    # -- cells

    def read_cell(self, cell: Cell, loc: SourceLoc) -> tuple:
        if cell.var is None:
            raise MiniDynRuntimeError(loc, "use-before-init", cell.name)
        new = cell.frame.occ_var(cell.name)
        self.recorder.emit_write(new, VarRead(cell.var), cell.value, loc)
        cell.var = new
        return cell.value, new

    def write_cell(self, cell: Cell, value, value_var: Optional[TraceVar],
                   loc: SourceLoc) -> TraceVar:
        new = cell.frame.occ_var(cell.name)
        rhs = VarRead(value_var) if value_var is not None else UndefinedLit()
        self.recorder.emit_write(new, rhs, value, loc)
        cell.value = value
        cell.var = new
        return new

    def this_cell(self, act: Activation, loc: SourceLoc) -> Cell:
        cell = act.scope.lookup("this")
        if cell is None:
            # the global receiver is the native global object
            cell = self.global_scope.declare("this", self.global_frame)
        if cell.var is None and cell.frame is self.global_frame:
            cell.value = self.natives.global_obj
            cell.var = self.global_frame.occ_var("this")
            self.recorder.emit_write(cell.var, VarRead(self.natives.global_var()),
                                     cell.value, loc)
        return cell

    # -- statements

    def exec_block(self, body: list, act: Activation) -> None:
        for stmt in body:
            self.exec_stmt(stmt, act)

    def exec_stmt(self, stmt: A.Node, act: Activation) -> None:
        if isinstance(stmt, A.VarDecl):
            cell = act.scope.declare(stmt.name, act.frame)
            if stmt.init is not None:
                value, var = self.eval_expr(stmt.init, act)
                self.write_cell(cell, value, var, stmt.loc)
            else:
                self.write_cell(cell, UNDEF, None, stmt.loc)
        elif isinstance(stmt, A.FuncDecl):
            cell = act.scope.declare(stmt.func.name, act.frame)
            fn = MDFunction(stmt.func.name, stmt.func.params, stmt.func.body,
                            act.scope, stmt.func.loc)
            obj = MDObject(fn=fn)
            lhs = act.frame.occ_var(stmt.func.name)
            self.recorder.emit_allocate(lhs, obj, stmt.loc)
            self.recorder.emit(EndInit(lhs, stmt.loc))
            cell.value = obj
            cell.var = lhs
        elif isinstance(stmt, A.ExprStmt):
            self.eval_expr(stmt.expr, act)
        elif isinstance(stmt, A.If):
            value, var = self.eval_expr(stmt.cond, act)
            b, _ = self.ensure_bool(value, var, act, stmt.loc)
            if b:
                self.exec_block(stmt.then, act)
            elif stmt.els is not None:
                self.exec_block(stmt.els, act)
        elif isinstance(stmt, A.While):
            while True:
                value, var = self.eval_expr(stmt.cond, act)
                b, _ = self.ensure_bool(value, var, act, stmt.loc)
                if not b:
                    break
                self.exec_block(stmt.body, act)
        elif isinstance(stmt, A.Return):
            if stmt.value is not None:
                value, var = self.eval_expr(stmt.value, act)
                raise _Return(value, var)
            raise _Return(UNDEF, None)
        elif isinstance(stmt, A.DeleteStmt):
            base, base_var, name = self.eval_property_ref(stmt.target, act)
            if not is_object(base):
                raise MiniDynRuntimeError(stmt.loc, "delete-on-primitive")
            self.recorder.emit(Delete(base_var, name, stmt.loc))
            base.props.pop(name, None)
        else:
            raise TypeError(f"unknown statement {stmt!r}")

    # -- expressions

    def eval_expr(self, node: A.Node, act: Activation) -> tuple:
        if isinstance(node, (A.NumberE, A.StringE, A.BoolE, A.NullE, A.UndefinedE)):
            value = {A.NullE: NULLV, A.UndefinedE: UNDEF}.get(type(node))
            if value is None:
                value = node.value
            return self.emit_literal(value, act, node.loc)
        if isinstance(node, A.Ident):
            if node.builtin:
                return self.natives.read_global(node.name, act.frame, node.loc)
            cell = act.scope.lookup(node.name)
            if cell is None:
                raise MiniDynRuntimeError(node.loc, "use-before-init", node.name)
            return self.read_cell(cell, node.loc)
        if isinstance(node, A.ThisE):
            return self.read_cell(self.this_cell(act, node.loc), node.loc)
        if isinstance(node, A.FuncLit):
            fn = MDFunction(node.name, node.params, node.body, act.scope, node.loc)
            obj = MDObject(fn=fn)
            tmp = act.frame.temp()
            self.recorder.emit_allocate(tmp, obj, node.loc)
            self.recorder.emit(EndInit(tmp, node.loc))
            return obj, tmp
        if isinstance(node, A.ObjectLit):
            return self.eval_object_literal(node, act)
        if isinstance(node, A.ArrayLit):
            return self.eval_array_literal(node, act)
        if isinstance(node, (A.Member, A.Index)):
            return self.eval_member_read(node, act)
        if isinstance(node, A.Call):
            return self.eval_call(node, act)
        if isinstance(node, A.New):
            return self.eval_new(node, act)
        if isinstance(node, A.Assign):
            return self.eval_assign(node, act)
        if isinstance(node, A.Logical):
            return self.eval_logical(node, act)
        if isinstance(node, A.Binary):
            return self.eval_binary(node, act)
        if isinstance(node, A.Unary):
            return self.eval_unary(node, act)
        raise TypeError(f"unknown expression {node!r}")

    def emit_literal(self, value, act: Activation, loc: SourceLoc) -> tuple:
        tmp = act.frame.temp()
        self.recorder.emit_write(tmp, self.recorder.literal_expr(value), value, loc)
        return value, tmp

    def eval_object_literal(self, node: A.ObjectLit, act: Activation) -> tuple:
        obj = MDObject()
        tmp = act.frame.temp()
        self.recorder.emit_allocate(tmp, obj, node.loc)
        if node.proto is not None:
            pv, pvar = self.eval_expr(node.proto, act)
            if not is_object(pv):
                raise MiniDynRuntimeError(node.loc, "non-object-prototype")
            self.recorder.emit(FieldWrite(tmp, PROTO_PROP, pvar, node.loc))
            obj.proto = pv
        for name, expr in node.props:
            value, var = self.eval_expr(expr, act)
            self.recorder.emit(FieldWrite(tmp, name, var, node.loc))
            obj.props[name] = value
        self.recorder.emit(EndInit(tmp, node.loc))
        return obj, tmp

    def eval_array_literal(self, node: A.ArrayLit, act: Activation) -> tuple:
        obj = MDObject(array=True)
        tmp = act.frame.temp()
        self.recorder.emit_allocate(tmp, obj, node.loc)
        for i, expr in enumerate(node.elements):
            value, var = self.eval_expr(expr, act)
            self.recorder.emit(FieldWrite(tmp, str(i), var, node.loc))
            obj.props[str(i)] = value
        obj.array_len = len(node.elements)
        self.recorder.emit(EndInit(tmp, node.loc))
        return obj, tmp

    def _prop_name(self, node: A.Node, act: Activation) -> tuple:
        """(base value, base var, property name) for Member/Index nodes."""
        if isinstance(node, A.Member):
            base, base_var = self.eval_expr(node.obj, act)
            return base, base_var, node.name
        assert isinstance(node, A.Index)
        base, base_var = self.eval_expr(node.obj, act)
        index, _ = self.eval_expr(node.index, act)
        return base, base_var, to_prop_name(index)

    def eval_property_ref(self, node: A.Node, act: Activation) -> tuple:
        return self._prop_name(node, act)

    def eval_member_read(self, node: A.Node, act: Activation) -> tuple:
        base, base_var, name = self._prop_name(node, act)
        if not is_object(base):
            if base is NULLV or base is UNDEF:
                raise MiniDynRuntimeError(node.loc, "prop-of-nullish", name)
            # property reads on primitives are native behavior; only the
            # resulting value is recorded
            return self.emit_literal(UNDEF, act, node.loc)
        if self._is_builtin_method(base, name):
            fnobj = self.natives.method_fn(name)
            tmp = act.frame.temp()
            self.natives.from_native(fnobj, tmp, node.loc)
            return fnobj, tmp
        value = base.lookup(name)
        tmp = act.frame.temp()
        self.recorder.emit_write(tmp, FieldRead(base_var, name), value, node.loc)
        return value, tmp

    @staticmethod
    def _is_builtin_method(base: MDObject, name: str) -> bool:
        return base.array and name in ARRAY_METHODS and not base.has_prop(name)

    # -- calls

    def next_frame(self, name: str) -> Frame:
        k = self.frame_counters.get(name, 0) + 1
        self.frame_counters[name] = k
        return Frame(f"{name}_{k}")

    def eval_call(self, node: A.Call, act: Activation) -> tuple:
        callee = node.callee
        if isinstance(callee, (A.Member, A.Index)):
            base, base_var, name = self._prop_name(callee, act)
            if is_object(base) and self._is_builtin_method(base, name):
                return self._builtin_call(name, None, base, base_var, node, act)
            if not is_object(base):
                raise MiniDynRuntimeError(node.loc, "call-of-non-function", name)
            fnval = base.lookup(name)
            tmp = act.frame.temp()
            self.recorder.emit_write(tmp, FieldRead(base_var, name), fnval, callee.loc)
            return self.call_value(fnval, tmp, base, base_var, node, act)
        if isinstance(callee, A.Ident) and callee.builtin:
            fnval, fvar = self.natives.read_global(callee.name, act.frame, callee.loc)
            return self.call_value(fnval, fvar, self.natives.global_obj,
                                   self.natives.global_var(), node, act)
        fnval, fvar = self.eval_expr(callee, act)
        return self.call_value(fnval, fvar, self.natives.global_obj,
                               self.natives.global_var(), node, act)

    def call_value(self, fnval, fn_var: TraceVar, recv, recv_var: TraceVar,
                   node: A.Call, act: Activation) -> tuple:
        if not is_object(fnval):
            raise MiniDynRuntimeError(node.loc, "call-of-non-function")
        if fnval.builtin is not None:
            return self._builtin_call(fnval.builtin, fn_var, recv, recv_var, node, act)
        if fnval.fn is None:
            raise MiniDynRuntimeError(node.loc, "call-of-non-function")
        args = [self.eval_expr(a, act) for a in node.args]
        return self.user_call(fnval, fn_var, recv, recv_var, args, node.loc, act)

    def _builtin_call(self, name: str, callee_var, recv, recv_var,
                      node: A.Call, act: Activation) -> tuple:
        args = [self.eval_expr(a, act) for a in node.args]
        fnobj = (self.natives.method_fn(name) if name in ARRAY_METHODS
                 else self.natives.global_obj.props[name])
        return self.natives.call_builtin(
            name, fnobj, callee_var, recv, recv_var,
            [v for v, _ in args], [var for _, var in args], act.frame, node.loc)

    def user_call(self, fnobj: MDObject, fn_var: TraceVar, recv, recv_var: TraceVar,
                  args: list, loc: SourceLoc, act: Activation) -> tuple:
        fn = fnobj.fn
        fname = fn.name or f"fnL{fn.decl_loc.line}C{fn.decl_loc.col}"
        self.recorder.emit(BeginCall(fn_var, recv_var, tuple(v for _, v in args), loc))
        frame = self.next_frame(fname)
        scope = Scope(parent=fn.env)
        inner = Activation(frame, scope)

        this = scope.declare("this", frame)
        this.value = recv
        this.var = frame.occ_var("this")
        self.recorder.emit_write(this.var, VarRead(recv_var), recv, fn.decl_loc)
        for i, p in enumerate(fn.params):
            cell = scope.declare(p, frame)
            if i < len(args):
                self.write_cell(cell, args[i][0], args[i][1], fn.decl_loc)
            else:
                self.write_cell(cell, UNDEF, None, fn.decl_loc)

        value, var = UNDEF, None
        try:
            self.exec_block(fn.body, inner)
        except _Return as r:
            value, var = r.value, r.var
        ret = TraceVar("ret", 0, frame.id)
        rhs = VarRead(var) if var is not None else UndefinedLit()
        self.recorder.emit_write(ret, rhs, value, fn.decl_loc)
        self.recorder.emit(EndCall(ret, loc))
        out = act.frame.temp()
        self.recorder.emit_write(out, VarRead(ret), value, loc)
        return value, out

    def eval_new(self, node: A.New, act: Activation) -> tuple:
        fnval, fn_var = self.eval_expr(node.callee, act)
        if not is_object(fnval) or fnval.fn is None:
            raise MiniDynRuntimeError(node.loc, "new-of-non-function")
        if "prototype" not in fnval.props:
            # created on demand: the prototype object only exists once a
            # constructor use forces it
            proto_obj = MDObject()
            ptmp = act.frame.temp()
            self.recorder.emit_allocate(ptmp, proto_obj, node.loc)
            self.recorder.emit(EndInit(ptmp, node.loc))
            self.recorder.emit(FieldWrite(fn_var, "prototype", ptmp, node.loc))
            fnval.props["prototype"] = proto_obj
        proto_obj = fnval.props["prototype"]
        ptmp2 = act.frame.temp()
        self.recorder.emit_write(ptmp2, FieldRead(fn_var, "prototype"), proto_obj, node.loc)

        inst = MDObject()
        itmp = act.frame.temp()
        self.recorder.emit_allocate(itmp, inst, node.loc)
        self.recorder.emit(FieldWrite(itmp, PROTO_PROP, ptmp2, node.loc))
        inst.proto = proto_obj if is_object(proto_obj) else None

        args = [self.eval_expr(a, act) for a in node.args]
        value, var = self.user_call(fnval, fn_var, inst, itmp, args, node.loc, act)
        self.recorder.emit(EndInit(itmp, node.loc))
        if is_object(value):
            return value, var
        return inst, itmp

    # -- assignment

    def eval_assign(self, node: A.Assign, act: Activation) -> tuple:
        target = node.target
        if isinstance(target, A.Ident):
            if target.builtin:
                raise MiniDynRuntimeError(node.loc, "assign-to-builtin", target.name)
            cell = act.scope.lookup(target.name)
            if cell is None:
                raise MiniDynRuntimeError(node.loc, "use-before-init", target.name)
            value, var = self.eval_expr(node.value, act)
            new = self.write_cell(cell, value, var, node.loc)
            return value, new
        base, base_var, name = self._prop_name(target, act)
        if not is_object(base):
            raise MiniDynRuntimeError(node.loc, "field-write-on-primitive", name)
        value, var = self.eval_expr(node.value, act)
        self.recorder.emit(FieldWrite(base_var, name, var, node.loc))
        base.props[name] = value
        if base.array and name.isdigit():
            base.array_len = max(base.array_len, int(name) + 1)
        return value, var

    # -- operators

    def ensure_bool(self, value, var: TraceVar, act: Activation, loc) -> tuple:
        if isinstance(value, bool):
            return value, var
        return self.emit_literal(to_boolean(value), act, loc)

    def ensure_number(self, value, var: TraceVar, act: Activation, loc) -> tuple:
        if isinstance(value, float):
            return value, var
        return self.emit_literal(to_number(value), act, loc)

    def ensure_string(self, value, var: TraceVar, act: Activation, loc) -> tuple:
        if isinstance(value, str):
            return value, var
        return self.emit_literal(to_string(value), act, loc)

    def eval_logical(self, node: A.Logical, act: Activation) -> tuple:
        lv, lvar = self.eval_expr(node.left, act)
        lb, _ = self.ensure_bool(lv, lvar, act, node.loc)
        take_right = lb if node.op == "&&" else not lb
        if not take_right:
            # the expression value is the uncoerced operand
            tmp = act.frame.temp()
            self.recorder.emit_write(tmp, VarRead(lvar), lv, node.loc)
            return lv, tmp
        rv, rvar = self.eval_expr(node.right, act)
        tmp = act.frame.temp()
        self.recorder.emit_write(tmp, VarRead(rvar), rv, node.loc)
        return rv, tmp

    def eval_unary(self, node: A.Unary, act: Activation) -> tuple:
        value, var = self.eval_expr(node.operand, act)
        if node.op == "typeof":
            return self.emit_literal(self._typeof(value), act, node.loc)
        if node.op == "!":
            b, _ = self.ensure_bool(value, var, act, node.loc)
            return self.emit_literal(not b, act, node.loc)
        n, _ = self.ensure_number(value, var, act, node.loc)
        return self.emit_literal(-n, act, node.loc)

    @staticmethod
    def _typeof(value) -> str:
        if value is UNDEF:
            return "undefined"
        if value is NULLV:
            return "object"
        if isinstance(value, bool):
            return "boolean"
        if isinstance(value, float):
            return "number"
        if isinstance(value, str):
            return "string"
        if isinstance(value, MDObject):
            return "function" if value.fn is not None or value.builtin else "object"
        raise TypeError(value)

    def eval_binary(self, node: A.Binary, act: Activation) -> tuple:
        op = node.op
        lv, lvar = self.eval_expr(node.left, act)
        if op == "instanceof":
            rv, _ = self.eval_expr(node.right, act)
            return self.emit_literal(self._instanceof(lv, rv, node.loc), act, node.loc)
        rv, rvar = self.eval_expr(node.right, act)
        loc = node.loc
        if op == "+":
            if isinstance(lv, str) or isinstance(rv, str) or \
                    is_object(lv) or is_object(rv):
                ls, _ = self.ensure_string(lv, lvar, act, loc)
                rs, _ = self.ensure_string(rv, rvar, act, loc)
                return self.emit_literal(ls + rs, act, loc)
            ln, _ = self.ensure_number(lv, lvar, act, loc)
            rn, _ = self.ensure_number(rv, rvar, act, loc)
            return self.emit_literal(ln + rn, act, loc)
        if op in ("-", "*", "/", "%"):
            ln, _ = self.ensure_number(lv, lvar, act, loc)
            rn, _ = self.ensure_number(rv, rvar, act, loc)
            return self.emit_literal(self._arith(op, ln, rn), act, loc)
        if op in ("<", "<=", ">", ">="):
            if isinstance(lv, str) and isinstance(rv, str):
                out = {"<": lv < rv, "<=": lv <= rv, ">": lv > rv, ">=": lv >= rv}[op]
                return self.emit_literal(out, act, loc)
            ln, _ = self.ensure_number(lv, lvar, act, loc)
            rn, _ = self.ensure_number(rv, rvar, act, loc)
            if math.isnan(ln) or math.isnan(rn):
                return self.emit_literal(False, act, loc)
            out = {"<": ln < rn, "<=": ln <= rn, ">": ln > rn, ">=": ln >= rn}[op]
            return self.emit_literal(out, act, loc)
        if op in ("===", "!=="):
            out = strict_equals(lv, rv)
            return self.emit_literal(out if op == "===" else not out, act, loc)
        if op in ("==", "!="):
            out = self._loose_equals(lv, lvar, rv, rvar, act, loc)
            return self.emit_literal(out if op == "==" else not out, act, loc)
        raise TypeError(f"unknown operator {op!r}")

    @staticmethod
    def _arith(op: str, a: float, b: float) -> float:
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0:
                if a == 0 or math.isnan(a):
                    return float("nan")
                return math.copysign(float("inf"), a) * math.copysign(1.0, b)
            return a / b
        if b == 0 or math.isnan(a) or math.isnan(b) or math.isinf(a):
            return float("nan")
        return math.fmod(a, b)

    def _loose_equals(self, lv, lvar, rv, rvar, act: Activation, loc) -> bool:
        nullish = (NULLV, UNDEF)
        if lv in nullish or rv in nullish:
            return lv in nullish and rv in nullish
        if isinstance(lv, bool):
            ln, _ = self.ensure_number(lv, lvar, act, loc)
            return self._loose_equals(ln, None, rv, rvar, act, loc)
        if isinstance(rv, bool):
            rn, _ = self.ensure_number(rv, rvar, act, loc)
            return self._loose_equals(lv, lvar, rn, None, act, loc)
        if isinstance(lv, float) and isinstance(rv, str):
            rn, _ = self.ensure_number(rv, rvar, act, loc)
            return lv == rn
        if isinstance(lv, str) and isinstance(rv, float):
            ln, _ = self.ensure_number(lv, lvar, act, loc)
            return ln == rv
        return strict_equals(lv, rv)

    def _instanceof(self, value, ctor, loc: SourceLoc) -> bool:
        if not is_object(ctor) or (ctor.fn is None and ctor.builtin is None):
            raise MiniDynRuntimeError(loc, "bad-instanceof-rhs")
        proto = ctor.props.get("prototype")
        if not is_object(value) or not is_object(proto):
            return False
        cur, seen = value.proto, set()
        while cur is not None and id(cur) not in seen:
            seen.add(id(cur))
            if cur is proto:
                return True
            cur = cur.proto
        return False


def run_and_record(program: A.Program | str, filename: str = "<input>") -> TraceProgram:
    """Execute a MiniDyn program and produce its trace.  On a runtime error
    the exception carries the trace up to the failure point."""
    if isinstance(program, str):
        program = parse_program(program, filename)
    interp = Interpreter(program.file)
    trace, _ = interp.run(program)
    return trace
