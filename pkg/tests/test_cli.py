import io
import sys

import pytest

from tracetype.cli import main
from tracetype.tracelang import parse_trace

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


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write_program(tmp_path, src, name="prog.mdyn"):
    path = tmp_path / name
    path.write_text(src, encoding="utf-8")
    return str(path)


def record_to(tmp_path, src, capsys, name="prog.mdyn"):
    prog = write_program(tmp_path, src, name)
    out = str(tmp_path / (name + ".trace"))
    code, stdout, _ = run_cli(["record", prog, "-o", out], capsys)
    assert code == 0
    return prog, out, stdout


def test_record_reports_metrics(tmp_path, capsys):
    prog, trace_path, stdout = record_to(tmp_path, FIG1, capsys)
    trace = parse_trace(open(trace_path, "rb").read())
    assert f"statements={len(trace.statements)}" in stdout
    assert "lines_executed=10" in stdout


def test_record_empty_program_has_only_global_model(tmp_path, capsys):
    _, trace_path, stdout = record_to(tmp_path, "", capsys)
    trace = parse_trace(open(trace_path, "rb").read())
    assert len(trace.statements) == 4
    assert "statements=4" in stdout


def test_record_runtime_error_exit_codes(tmp_path, capsys):
    prog = write_program(tmp_path, "var x = 1;\nx();\n")
    out = str(tmp_path / "x.trace")
    code, _, err = run_cli(["record", prog, "-o", out], capsys)
    assert code == 1 and "call-of-non-function" in err
    import os
    assert not os.path.exists(out)
    code, _, _ = run_cli(["record", prog, "-o", out, "--keep-partial"], capsys)
    assert code == 1
    assert len(parse_trace(open(out, "rb").read()).statements) > 0


def test_type_fig1_sub_base(tmp_path, capsys):
    prog, trace_path, _ = record_to(tmp_path, FIG1, capsys)
    code, out, _ = run_cli(["type", trace_path, "--config", "sub/base"], capsys)
    assert code == 0
    assert "sub/base,1,1" in out
    assert f"{prog}:10" in out


def test_type_fig1_poly_clean(tmp_path, capsys):
    _, trace_path, _ = record_to(tmp_path, FIG1, capsys)
    code, out, _ = run_cli(["type", trace_path, "--config", "sub/poly"], capsys)
    assert code == 0
    assert "sub/poly,0,0" in out


def test_type_unknown_config_is_usage_error(tmp_path, capsys):
    _, trace_path, _ = record_to(tmp_path, FIG1, capsys)
    code, _, err = run_cli(["type", trace_path, "--config", "nope"], capsys)
    assert code == 2 and "unknown configuration" in err


def test_type_bad_trace_is_input_error(tmp_path, capsys):
    bad = tmp_path / "bad.trace"
    bad.write_text("x#0@G = y#0@G\n", encoding="utf-8")
    code, _, err = run_cli(["type", str(bad), "--config", "sub/base"], capsys)
    assert code == 1


def test_type_deterministic(tmp_path, capsys):
    _, trace_path, _ = record_to(tmp_path, FIG1, capsys)
    _, out1, _ = run_cli(["type", trace_path, "--config", "union/base", "--types"], capsys)
    _, out2, _ = run_cli(["type", trace_path, "--config", "union/base", "--types"], capsys)
    assert out1 == out2


def test_compare_matches_individual_runs(tmp_path, capsys):
    _, trace_path, _ = record_to(tmp_path, FIG1, capsys)
    configs = "sub/base,union/base,sub/poly,sub/intersect"
    code, out, _ = run_cli(["compare", trace_path, "--configs", configs,
                            "--no-wall"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "config,error_locations,total_errors"
    table = {row.split(",")[0]: row for row in lines[1:]}
    for config in configs.split(","):
        code2, single, _ = run_cli(["type", trace_path, "--config", config], capsys)
        summary = single.strip().splitlines()[-1]
        assert table[config] == summary


def test_compare_single_config_is_usage_error(tmp_path, capsys):
    _, trace_path, _ = record_to(tmp_path, FIG1, capsys)
    code, _, _ = run_cli(["compare", trace_path, "--configs", "sub/base"], capsys)
    assert code == 2


def test_compare_fixed_layout_table(tmp_path, capsys):
    layout = ("var o1 = {a: 3, m: function(x) { this.a = x; }};\n"
              "var o2 = {b: 5} proto o1;\n"
              "o2.a = o2.b;\n")
    _, trace_path, _ = record_to(tmp_path, layout, capsys, "layout.mdyn")
    code, out, _ = run_cli(["compare", trace_path, "--configs",
                            "sub/base,fixed-layout", "--no-wall"], capsys)
    assert code == 0
    assert "config,ro_rw,prototypal,inheritance" in out
    assert "fixed-layout,1/5,0/1,0/1" in out


def test_tagtest_guarded_program(tmp_path, capsys):
    _, trace_path, _ = record_to(tmp_path, GUARDED, capsys, "guard.mdyn")
    code, out, _ = run_cli(["tagtest", trace_path], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "var,frame,wide_loc,narrow_loc,wide_type,narrow_type,dup_hint"
    rows = [l for l in lines[1:] if not l.startswith("#")]
    assert len(rows) == 1
    assert rows[0].startswith("x,f_1,")
    assert "A | int" in rows[0] and ",A," in rows[0]


def test_tagtest_fig1_empty(tmp_path, capsys):
    _, trace_path, _ = record_to(tmp_path, FIG1, capsys)
    code, out, _ = run_cli(["tagtest", trace_path], capsys)
    rows = [l for l in out.strip().splitlines()[1:] if not l.startswith("#")]
    assert rows == []


def test_config_file_replaces_flags(tmp_path, capsys):
    _, trace_path, _ = record_to(tmp_path, FIG1, capsys)
    cfg = tmp_path / "run.cfg"
    cfg.write_text("config=sub/base\n", encoding="utf-8")
    code, out, _ = run_cli(["type", trace_path, "--config-file", str(cfg)], capsys)
    assert code == 0 and "sub/base,1,1" in out


def test_all_commands_deterministic(tmp_path, capsys):
    prog, trace_path, _ = record_to(tmp_path, GUARDED, capsys, "guard.mdyn")
    for argv in (
        ["type", trace_path, "--config", "union/base", "--types"],
        ["type", trace_path, "--config", "fixed-layout"],
        ["compare", trace_path, "--configs", "sub/base,union/poly", "--no-wall"],
        ["tagtest", trace_path],
    ):
        _, out1, _ = run_cli(argv, capsys)
        _, out2, _ = run_cli(argv, capsys)
        assert out1 == out2, argv
    out2a = str(tmp_path / "again.trace")
    run_cli(["record", prog, "-o", out2a], capsys)
    out2b = str(tmp_path / "again2.trace")
    run_cli(["record", prog, "-o", out2b], capsys)
    assert open(out2a, "rb").read() == open(out2b, "rb").read()
