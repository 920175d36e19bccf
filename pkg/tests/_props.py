"""Property suites shared between the per-module tests (small counts for
quick feedback) and the acceptance suite (full counts with a time budget).
Each function runs `n` seeded cases and raises AssertionError on failure.
"""
from __future__ import annotations

import itertools
import random

from tracetype import lattice as lt
from tracetype.framework import analyze, build_gamma_hat
from tracetype.lattice import (
    FuncSig, FunctionType, ObjectType, VarType, is_subtype, lub_subtyping,
    lub_union, render, type_equal,
)
from tracetype.minidyn import Interpreter, parse_program
from tracetype.systems import (
    NoMatch, get_plugin, make_lub_fn_poly, match_instantiation,
)
from tracetype.tagtest import detect_tag_tests
from tracetype.tracelang import (
    NullLit, TraceProgram, TraceVar, VarRead, VarWrite, parse_trace,
    serialize_trace,
)
from tracetype.traceval import evaluate_trace, value_equal

import _gen


def record(src: str, filename: str = "t.mdyn"):
    interp = Interpreter(filename)
    return interp.run(parse_program(src, filename))


# ---------------------------------------------------------------------------
# lattice

def prop_lattice_laws(n: int, seed: int = 701) -> None:
    rng = random.Random(seed)
    for _ in range(n):
        a, b, c = (_gen.random_type(rng) for _ in range(3))
        for lub in (lub_subtyping, lub_union):
            ab = lub(a, b)
            assert type_equal(ab, lub(b, a)), (render(a), render(b))
            assert type_equal(lub(a, lub(b, c)), lub(ab, c)), \
                (render(a), render(b), render(c))
            assert type_equal(lub(a, a), a)
            assert is_subtype(a, ab) and is_subtype(b, ab)


def prop_lub_monotone(n: int, seed: int = 4242) -> None:
    rng = random.Random(seed)
    for _ in range(n):
        a_hi = _gen.random_type(rng)
        a_lo = _gen.random_subtype(rng, a_hi)
        b = _gen.random_type(rng)
        for lub in (lub_subtyping, lub_union):
            assert is_subtype(lub(a_lo, b), lub(a_hi, b)), \
                (render(a_lo), render(a_hi), render(b))


def prop_subtype_partial_order(n: int, seed: int = 99) -> None:
    rng = random.Random(seed)
    for _ in range(n):
        a, b, c = (_gen.random_type(rng) for _ in range(3))
        assert is_subtype(a, a)
        if is_subtype(a, b) and is_subtype(b, c):
            assert is_subtype(a, c)
        if is_subtype(a, b) and is_subtype(b, a):
            assert type_equal(a, b)


# ---------------------------------------------------------------------------
# traces

def prop_roundtrip(n: int, seed: int = 31337) -> None:
    rng = random.Random(seed)
    for _ in range(n):
        t = _gen.random_trace(rng)
        data = serialize_trace(t)
        parsed = parse_trace(data)
        assert parsed == t
        assert serialize_trace(parsed) == data


def random_program(rng: random.Random) -> str:
    lines = ["function id(v) { return v; }"]
    declared = []
    literals = ['1', '2.5', '"s"', "true", "null", "undefined",
                "{ p: 1 }", "{ p: 2, q: \"x\" }", "[1, 2]"]
    for i in range(rng.randint(1, 8)):
        name = f"v{i}"
        roll = rng.random()
        if roll < 0.5 or not declared:
            lines.append(f"var {name} = {rng.choice(literals)};")
        elif roll < 0.7:
            lines.append(f"var {name} = {rng.choice(declared)};")
        elif roll < 0.85:
            lines.append(f"var {name} = id({rng.choice(declared)});")
        else:
            lines.append(f"var {name} = {rng.choice(declared)} && {rng.choice(declared)};")
        declared.append(name)
        if declared and rng.random() < 0.3:
            lines.append(f"{rng.choice(declared)} = {rng.choice(literals)};")
        if declared and rng.random() < 0.2:
            lines.append(f"if ({rng.choice(declared)}) {{ var b{i} = {rng.choice(declared)}; }}")
    return "\n".join(lines) + "\n"


def prop_replay_faithfulness(n: int, seed: int = 808) -> None:
    rng = random.Random(seed)
    for _ in range(n):
        trace, info = record(random_program(rng))
        values, heap = evaluate_trace(trace)
        for var, expected in info.oracle:
            assert value_equal(values[var], expected), str(var)
        lhs = [s.lhs for s in trace.statements if isinstance(s, VarWrite)]
        assert len(lhs) == len(set(lhs))  # single assignment
        from tracetype.tracelang import BeginCall, EndCall
        depth = 0
        for s in trace.statements:
            if isinstance(s, BeginCall):
                depth += 1
            elif isinstance(s, EndCall):
                depth -= 1
                assert depth >= 0
        assert depth == 0


# ---------------------------------------------------------------------------
# framework

def prop_gamma_dominates(n: int, seed: int = 1234) -> None:
    rng = random.Random(seed)
    plugins = ["sub/base", "union/base"]
    for i in range(n):
        trace, _ = record(random_program(rng))
        analysis = analyze(trace, get_plugin(plugins[i % 2]))
        for v, t0 in analysis.gamma0.mapping.items():
            assert is_subtype(t0, analysis.gamma_hat[v]), \
                (str(v), render(t0), render(analysis.gamma_hat[v]))


def prop_fixpoint_stable(n: int, seed: int = 4321) -> None:
    rng = random.Random(seed)
    for _ in range(n):
        trace, _ = record(random_program(rng))
        plugin = get_plugin("union/base")
        base = analyze(trace, plugin)
        again = build_gamma_hat(trace, base.gamma0, base.classes, plugin)
        for v in base.gamma_hat.mapping:
            assert type_equal(base.gamma_hat[v], again[v])
        order = list(base.classes.order)
        rng.shuffle(order)
        shuffled = build_gamma_hat(trace, base.gamma0, base.classes, plugin,
                                   order=order)
        for v in base.gamma_hat.mapping:
            assert type_equal(base.gamma_hat[v], shuffled[v]), str(v)


# ---------------------------------------------------------------------------
# poly vs exhaustive oracle

def prop_poly_oracle(n: int, seed: int = 2718) -> None:
    rng = random.Random(seed)
    pool = [lt.NUMBER, lt.BOOLEAN, lt.STRING, ObjectType((("p", lt.NUMBER),)),
            ObjectType((("q", lt.STRING),))]
    lub_fn = make_lub_fn_poly(lub_subtyping)
    recv = ObjectType(())
    for _ in range(n):
        arity = rng.randint(0, 2)
        invs = [FuncSig(recv, tuple(rng.choice(pool) for _ in range(arity)),
                        rng.choice(pool)) for _ in range(rng.randint(1, 3))]
        out = lub_fn(invs)
        got = out.sigs[0]
        if lt.free_vars(out):
            for inv in invs:
                match_instantiation(got, inv)
        else:
            for inv in invs:
                assert is_subtype(inv.ret, got.ret)
                for p, q in zip(inv.params, got.params):
                    assert is_subtype(p, q)
        positions = list(range(arity + 1))

        def apply(assignment):
            slots = []
            for i in positions:
                base = invs[0].params[i] if i < arity else invs[0].ret
                slots.append(VarType(assignment[i]) if assignment[i] >= 0 else base)
            return FuncSig(recv, tuple(slots[:arity]), slots[arity])

        got_score = _var_count(got)
        for assignment in itertools.product([-1, 0, 1, 2], repeat=len(positions)):
            counts = {}
            for a in assignment:
                if a >= 0:
                    counts[a] = counts.get(a, 0) + 1
            if any(k < 2 for k in counts.values()):
                continue
            cand = apply(dict(enumerate(assignment)))
            ok = True
            for inv in invs:
                try:
                    match_instantiation(cand, inv)
                except NoMatch:
                    ok = False
                    break
            if ok:
                assert _var_count(cand) <= got_score, \
                    (render(FunctionType((cand,))), render(out))


def _var_count(s: FuncSig) -> int:
    count = 0

    def walk(t):
        nonlocal count
        if isinstance(t, VarType):
            count += 1
        elif isinstance(t, ObjectType):
            for _, v in t.props:
                walk(v)

    walk(s.receiver)
    for p in s.params:
        walk(p)
    walk(s.ret)
    return count


# ---------------------------------------------------------------------------
# tag tests

def random_branchy_program(rng: random.Random) -> str:
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


def _insert_write_before(trace: TraceProgram, cand) -> TraceProgram:
    stmts = list(trace.statements)
    target = stmts[cand.index]
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


def prop_tagtest_invariants(n: int, seed: int = 55, separation_every: int = 5) -> None:
    rng = random.Random(seed)
    for i in range(n):
        trace, _ = record(random_branchy_program(rng))
        cands = detect_tag_tests(trace)
        for c in cands:
            assert is_subtype(c.narrow, c.wide) and not type_equal(c.narrow, c.wide)
        if i % separation_every == 0:
            for c in cands[:2]:
                mutated = _insert_write_before(trace, c)
                new = detect_tag_tests(mutated)
                assert not any(
                    (m.var, str(m.wide_loc), str(m.narrow_loc)) ==
                    (c.var, str(c.wide_loc), str(c.narrow_loc)) for m in new)
