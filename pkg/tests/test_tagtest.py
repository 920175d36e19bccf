import random

import pytest

from tracetype.framework import analyze
from tracetype.lattice import render_compact
from tracetype.minidyn import Interpreter, parse_program
from tracetype.systems import get_plugin, tagtest_plugin
from tracetype.tagtest import (
    ConfigError, TagTestCandidate, candidates_csv, dedupe_candidates,
    detect_tag_tests,
)
from tracetype.tracelang import (
    NullLit, TraceProgram, TraceVar, VarRead, VarWrite,
)


def record(src, filename="t.mdyn"):
    interp = Interpreter(filename)
    trace, _ = interp.run(parse_program(src, filename))
    return trace


GUARDED = """\
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


def test_guard_narrowing_single_candidate():
    trace = record(GUARDED)
    cands = detect_tag_tests(trace)
    assert len(cands) == 1
    c = cands[0]
    assert c.var == "x"
    assert render_compact(c.wide) == "A | int"
    assert render_compact(c.narrow) == "A"
    assert (c.wide_loc.line, c.narrow_loc.line) == (3, 4)
    assert not c.dup_hint


def test_straight_line_has_no_candidates():
    trace = record("var x = 1;\nvar y = x;\nvar z = x;\nvar w = x + y;\n")
    assert detect_tag_tests(trace) == []


def test_fi_config_rejected():
    trace = record("var x = 1;")
    with pytest.raises(ConfigError):
        detect_tag_tests(trace, plugin=get_plugin("sub/base"))
    bad = tagtest_plugin()
    bad.propagate_assignments = True
    with pytest.raises(ConfigError):
        detect_tag_tests(trace, plugin=bad)


SAVED_GUARD = """\
function A() {}
function f(x) {
  var y = x instanceof A;
  if (y) {
    var u = x;
  }
}
f(new A());
f(3);
"""


def test_saved_guard_still_detected():
    trace = record(SAVED_GUARD)
    cands = detect_tag_tests(trace)
    assert len(cands) == 1
    c = cands[0]
    # the first read is the use inside the saved guard expression
    assert (c.wide_loc.line, c.narrow_loc.line) == (3, 5)


CORRELATED = """\
function A() {}
function f(x, z) {
  var a = z;
  if (x instanceof A) {
    var v = x;
    var w = z;
  }
}
f(new A(), new A());
f(3, 3);
"""


def test_correlated_guards_get_duplicate_hint():
    trace = record(CORRELATED)
    cands = detect_tag_tests(trace)
    assert len(cands) == 2
    assert not cands[0].dup_hint
    assert cands[1].dup_hint
    csv = candidates_csv(cands)
    assert "possible-duplicate" in csv
    assert csv.strip().endswith("# raw=2 deduped=2")


def test_candidates_strict_narrowing_and_write_separation():
    rng = random.Random(55)
    from tracetype.lattice import is_subtype, type_equal
    bodies = []
    for _ in range(40):
        trace = record(_random_branchy_program(rng))
        cands = detect_tag_tests(trace)
        for c in cands:
            assert is_subtype(c.narrow, c.wide) and not type_equal(c.narrow, c.wide)
        bodies.append((trace, cands))
    # inserting a write between a candidate's reads removes that candidate
    checked = 0
    for trace, cands in bodies:
        for c in cands[:2]:
            mutated = _insert_write_before(trace, c)
            new = detect_tag_tests(mutated)
            assert not any(
                (n.var, str(n.wide_loc), str(n.narrow_loc)) ==
                (c.var, str(c.wide_loc), str(c.narrow_loc)) for n in new)
            checked += 1
    assert checked > 0


def _insert_write_before(trace: TraceProgram, cand: TagTestCandidate) -> TraceProgram:
    """Splice a fresh write occurrence of the candidate's variable right
    before its narrowing read (renumbering later occurrences)."""
    stmts = list(trace.statements)
    target = stmts[cand.index]
    assert isinstance(target, VarWrite)
    frame, name, occ = target.lhs.frame, target.lhs.name, target.lhs.occ

    def bump(v: TraceVar) -> TraceVar:
        if v.name == name and v.frame == frame and v.occ >= occ:
            return TraceVar(name, v.occ + 1, frame)
        return v

    renumbered = []
    for i, s in enumerate(stmts):
        if i >= cand.index and isinstance(s, VarWrite):
            rhs = s.rhs
            if isinstance(rhs, VarRead):
                rhs = VarRead(bump(rhs.var))
            s = VarWrite(bump(s.lhs), rhs, s.src)
        renumbered.append(s)
    write = VarWrite(TraceVar(name, occ, frame), NullLit(), target.src)
    return TraceProgram(tuple(renumbered[:cand.index] + [write] +
                              renumbered[cand.index:]))


def _random_branchy_program(rng: random.Random) -> str:
    lines = ["function A() {}", "function f(x) {"]
    lines.append("  var t = x;")
    if rng.random() < 0.7:
        lines.append("  if (x instanceof A) {")
        lines.append("    var u = x;")
        if rng.random() < 0.5:
            lines.append("    var u2 = x;")
        lines.append("  }")
    if rng.random() < 0.5:
        lines.append("  if (typeof x == \"number\") {")
        lines.append("    var n = x;")
        lines.append("  }")
    lines.append("  var v = x;")
    lines.append("}")
    calls = ["f(new A());", "f(3);", "f(\"s\");"]
    rng.shuffle(calls)
    for c in calls[: rng.randint(2, 3)]:
        lines.append(c)
    return "\n".join(lines) + "\n"


def test_completeness_every_narrowing_pair_reported_once():
    trace = record(GUARDED)
    analysis = analyze(trace, tagtest_plugin())
    cands = detect_tag_tests(trace, analysis=analysis)
    keys = [(c.var, c.frame, c.index) for c in cands]
    assert len(keys) == len(set(keys))
