import random

import pytest

from tracetype.minidyn import (
    DuplicateModel, Interpreter, MiniDynRuntimeError, parse_program,
    run_and_record,
)
from tracetype.minidyn.parser import ParseError
from tracetype.tracelang import (
    BeginCall, Delete, EndCall, FieldWrite, NumberLit, TraceVar, VarWrite,
    serialize_trace,
)
from tracetype.traceval import (
    FuncRef, NumberV, ObjRef, StringV, evaluate_trace, value_equal,
)

GLOBAL_MODEL_LEN = 4  # global object, Array function, field read, field write


def record(src: str, filename: str = "t.mdyn"):
    program = parse_program(src, filename)
    interp = Interpreter(filename)
    return interp.run(program)


def user_statements(trace, filename="t.mdyn"):
    return [s for s in trace.statements
            if s.src is not None and s.src.file == filename]


def test_empty_program_is_just_the_global_model():
    trace, info = record("")
    assert len(trace.statements) == GLOBAL_MODEL_LEN
    names = [str(s.lhs) for s in trace.statements if isinstance(s, VarWrite)]
    assert names == ["esc0#0@N", "esc1#0@N", "tmp0#0@N"]


def test_var_decl_emits_temp_then_write():
    trace, _ = record("var x = 1;")
    stmts = user_statements(trace)
    assert len(stmts) == 2
    assert isinstance(stmts[0], VarWrite) and stmts[0].rhs == NumberLit(1.0)
    assert str(stmts[1].lhs) == "x#0@G"


def test_reads_get_fresh_occurrences():
    trace, _ = record("var x = 1;\nvar y = x;\nvar z = x;\n")
    writes = [str(s.lhs) for s in user_statements(trace) if isinstance(s, VarWrite)]
    assert "x#1@G" in writes and "x#2@G" in writes  # one occurrence per read


FIG1 = """\
function f(a) { a.p = 7; }
function g(b) { return b; }
var x = { p: 3 };
var y = { p: 4, q: "hi" };
var z = { q: "bye", r: false };
f(x);
f(y);
g(y);
var w = g(z);
w.r = true;
"""


def test_overview_program_trace_structure():
    trace, info = record(FIG1)
    begins = [s for s in trace.statements if isinstance(s, BeginCall)]
    ends = [s for s in trace.statements if isinstance(s, EndCall)]
    assert len(begins) == len(ends) == 4
    frames = {s.result.frame for s in ends}
    assert frames == {"f_1", "f_2", "g_1", "g_2"}
    # fresh temporaries inside each call to f hold the literal 7
    sevens = [s for s in trace.statements
              if isinstance(s, VarWrite) and s.rhs == NumberLit(7.0)]
    assert {s.lhs.frame for s in sevens} == {"f_1", "f_2"}
    assert info.statement_count == len(trace.statements)


def test_branch_program_has_occurrence_distinct_reads():
    src = """\
function A() {}
function f(x) {
  if (x instanceof A) {
    var u = x;
  }
  var v = x;
}
f(new A());
f(3);
"""
    trace, _ = record(src)
    ends = [s.result.frame for s in trace.statements if isinstance(s, EndCall)]
    assert "f_1" in ends and "f_2" in ends
    f1_x = [str(s.lhs) for s in trace.statements if isinstance(s, VarWrite)
            and s.lhs.frame == "f_1" and s.lhs.name == "x"]
    f2_x = [str(s.lhs) for s in trace.statements if isinstance(s, VarWrite)
            and s.lhs.frame == "f_2" and s.lhs.name == "x"]
    # branch taken in f_1 only: one extra read there
    assert len(f1_x) == len(f2_x) + 1


def test_replay_matches_interpreter_values():
    trace, info = record(FIG1)
    values, heap = evaluate_trace(trace)
    for var, expected in info.oracle:
        assert value_equal(values[var], expected), var


# --- coercions ---

def literal_writes(trace):
    return [s.rhs for s in trace.statements if isinstance(s, VarWrite)]


def test_plain_addition_has_no_coercions():
    trace, _ = record("var a = 1 + 2;")
    nums = [e.value for e in literal_writes(trace) if isinstance(e, NumberLit)]
    assert nums == [1.0, 2.0, 3.0]


def test_string_minus_number_coerces():
    # ECMAScript rules: Number("3") is 3, then 3 - 1 is 2
    trace, _ = record('var a = "3" - 1;')
    nums = [e.value for e in literal_writes(trace) if isinstance(e, NumberLit)]
    assert nums == [1.0, 3.0, 2.0]


def test_logical_and_keeps_uncoerced_operand():
    trace, info = record("var o = { p: 1 };\nvar b = o && 5;\n")
    values, _ = evaluate_trace(trace)
    b_vars = [v for v in values if v.name == "b"]
    assert values[b_vars[0]] == NumberV(5.0)
    # the truthy object was coerced to an explicit boolean temporary
    from tracetype.tracelang import BoolLit
    bools = [e.value for e in literal_writes(trace) if isinstance(e, BoolLit)]
    assert True in bools


def test_falsy_and_returns_left_operand():
    trace, _ = record("var a = 0 && 5;")
    values, _ = evaluate_trace(trace)
    a = [v for v in values if v.name == "a"][0]
    assert values[a] == NumberV(0.0)


# --- natives ---

def test_array_constructor_model_replays():
    src = "var a = Array({p: 1}, {p: 2});\nvar b = a[0];\n"
    trace, info = record(src)
    values, heap = evaluate_trace(trace)
    b = [v for v in values if v.name == "b"][0]
    a = [v for v in values if v.name == "a"][0]
    assert isinstance(values[a], ObjRef)
    arr = heap.objects[values[a].id]
    elems = [e.values for _, e in sorted(arr.visible.items())]
    assert [v.id for vs in elems for v in vs] == [values[b].id, values[b].id + 1]
    for var, expected in info.oracle:
        assert value_equal(values[var], expected), var


def test_pop_flows_value_from_element_property():
    src = "var a = [4, 10];\nvar b = a.pop();\n"
    trace, info = record(src)
    # the model reads the element property into the result, then deletes it
    reads = [s for s in trace.statements if isinstance(s, VarWrite)
             and s.lhs.name == "ret" and s.lhs.frame == "pop_1"]
    assert len(reads) == 1
    from tracetype.tracelang import FieldRead
    assert isinstance(reads[0].rhs, FieldRead) and reads[0].rhs.name == "1"
    deletes = [s for s in trace.statements if isinstance(s, Delete)]
    assert len(deletes) == 1 and deletes[0].name == "1"
    values, _ = evaluate_trace(trace)
    b = [v for v in values if v.name == "b"][0]
    assert values[b] == NumberV(10.0)
    for var, expected in info.oracle:
        assert value_equal(values[var], expected), var


def test_sort_manual_model_reads_pre_state_positions():
    src = "var a = [3, 1, 2];\na.sort();\nvar b = a[0];\n"
    trace, info = record(src)
    values, _ = evaluate_trace(trace)
    b = [v for v in values if v.name == "b"][0]
    assert values[b] == NumberV(1.0)
    for var, expected in info.oracle:
        assert value_equal(values[var], expected), var


def test_duplicate_manual_model_rejected():
    interp = Interpreter()
    with pytest.raises(DuplicateModel):
        interp.natives.register_manual_model("sort", lambda ctx: None)


def test_index_of_uses_inferred_model():
    interp = Interpreter("t.mdyn")
    assert interp.natives.model_for("indexOf").mode == "inferred"
    trace, info = record("var a = [4, 10];\nvar i = a.indexOf(10);\n")
    values, _ = evaluate_trace(trace)
    i = [v for v in values if v.name == "i"][0]
    assert values[i] == NumberV(1.0)


def test_escape_variable_per_object():
    src = "var a = [1];\na.push(2);\na.push(3);\n"
    trace, _ = record(src)
    esc_writes = [s.lhs for s in trace.statements if isinstance(s, VarWrite)
                  and s.lhs.name.startswith("esc") and s.lhs.frame == "N"]
    by_name = {}
    for v in esc_writes:
        by_name.setdefault(v.name, []).append(v.occ)
    for name, occs in by_name.items():
        assert occs == list(range(len(occs)))  # one variable, many occurrences


def test_runtime_error_keeps_partial_trace():
    with pytest.raises(MiniDynRuntimeError) as err:
        run_and_record("var x = 1;\nx();\n", "t.mdyn")
    assert err.value.kind == "call-of-non-function"
    assert err.value.partial_trace is not None
    assert len(err.value.partial_trace.statements) > GLOBAL_MODEL_LEN


def test_parser_rejects_undeclared_and_reserved():
    with pytest.raises(ParseError):
        parse_program("var x = missing;")
    with pytest.raises(ParseError):
        parse_program("var tmp3 = 1;")


def test_frame_discipline_and_single_assignment():
    rng = random.Random(11)
    trace, _ = record(FIG1)
    depth = 0
    for s in trace.statements:
        if isinstance(s, BeginCall):
            depth += 1
        elif isinstance(s, EndCall):
            depth -= 1
            assert depth >= 0
    assert depth == 0
    lhs = [s.lhs for s in trace.statements if isinstance(s, VarWrite)]
    assert len(lhs) == len(set(lhs))
    # the emitted text parses back identically
    from tracetype.tracelang import parse_trace
    assert parse_trace(serialize_trace(trace)) == trace
