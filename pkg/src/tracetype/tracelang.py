"""The trace language TL: straight-line statements over single-assignment
variables, plus its textual file format.

One statement per line; `#` starts a comment line; an optional
`; src=<file>:<line>:<col>` trailer carries the source mapping.  Variables
render as `name#occurrence@frame` where the frame is the global frame `G`,
the native frame `N`, or `<function>_<k>` for the k-th dynamic call.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional


@dataclass(frozen=True)
class SourceLoc:
    file: str
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}"


@dataclass(frozen=True)
class TraceVar:
    name: str
    occ: int
    frame: str

    def __str__(self) -> str:
        return f"{self.name}#{self.occ}@{self.frame}"


PROTO_PROP = "__proto__"  # reserved property recording prototype links


# --- expressions (right-hand sides of variable writes) ---

class TraceExpr:
    __slots__ = ()


@dataclass(frozen=True)
class VarRead(TraceExpr):
    var: TraceVar


@dataclass(frozen=True)
class FieldRead(TraceExpr):
    base: TraceVar
    name: str


@dataclass(frozen=True)
class Allocate(TraceExpr):
    pass


@dataclass(frozen=True)
class NullLit(TraceExpr):
    pass


@dataclass(frozen=True)
class UndefinedLit(TraceExpr):
    pass


@dataclass(frozen=True)
class BoolLit(TraceExpr):
    value: bool


@dataclass(frozen=True, eq=False)
class NumberLit(TraceExpr):
    value: float

    # literal identity: NaN equals NaN, signed zeros stay distinct
    def __eq__(self, other):
        if not isinstance(other, NumberLit):
            return NotImplemented
        a, b = self.value, other.value
        if math.isnan(a) and math.isnan(b):
            return True
        return a == b and math.copysign(1.0, a) == math.copysign(1.0, b)

    def __hash__(self):
        return hash(("num", repr(self.value)))


@dataclass(frozen=True)
class StringLit(TraceExpr):
    value: str


# --- statements ---

class TraceStatement:
    __slots__ = ()


@dataclass(frozen=True)
class VarWrite(TraceStatement):
    lhs: TraceVar
    rhs: TraceExpr
    src: Optional[SourceLoc] = None


@dataclass(frozen=True)
class FieldWrite(TraceStatement):
    base: TraceVar
    name: str
    rhs: TraceVar
    src: Optional[SourceLoc] = None


@dataclass(frozen=True)
class Delete(TraceStatement):
    base: TraceVar
    name: str
    src: Optional[SourceLoc] = None


@dataclass(frozen=True)
class BeginCall(TraceStatement):
    callee: TraceVar
    receiver: TraceVar
    args: tuple[TraceVar, ...]
    src: Optional[SourceLoc] = None


@dataclass(frozen=True)
class EndCall(TraceStatement):
    result: TraceVar
    src: Optional[SourceLoc] = None


@dataclass(frozen=True)
class EndInit(TraceStatement):
    obj: TraceVar
    src: Optional[SourceLoc] = None


@dataclass(frozen=True)
class TraceProgram:
    statements: tuple[TraceStatement, ...] = ()

    def __len__(self) -> int:
        return len(self.statements)

    def __iter__(self):
        return iter(self.statements)


# --- errors ---

class TraceSyntaxError(Exception):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class UseBeforeDef(Exception):
    def __init__(self, var: TraceVar, line: int):
        super().__init__(f"line {line}: use of {var} before definition")
        self.var = var
        self.line = line


class DoubleAssignment(Exception):
    def __init__(self, var: TraceVar, line: int):
        super().__init__(f"line {line}: second assignment to {var}")
        self.var = var
        self.line = line


# ---------------------------------------------------------------------------
# parsing

_IDENT = r"[A-Za-z_$][A-Za-z0-9_$]*"
_VAR_RE = re.compile(rf"({_IDENT})#(\d+)@({_IDENT})$")
_FRAME_RE = re.compile(rf"^(G|N|{_IDENT}_[1-9]\d*)$")
_PROP = r"[A-Za-z0-9_$]+"
_NUM_RE = re.compile(r"-?(\d+(\.\d+)?([eE][+-]?\d+)?|inf|nan)$")

_STMT_RES = {
    "field_write": re.compile(rf"^(\S+)\.({_PROP}) = (\S+)$"),
    "delete": re.compile(rf"^delete (\S+)\.({_PROP})$"),
    "begin": re.compile(r"^begin-call (.+)$"),
    "end_call": re.compile(r"^end-call (\S+)$"),
    "end_init": re.compile(r"^end-initialization (\S+)$"),
    "var_write": re.compile(r"^(\S+) = (.+)$"),
}


def _parse_var(tok: str, line: int) -> TraceVar:
    m = _VAR_RE.match(tok)
    if not m:
        raise TraceSyntaxError(line, f"malformed variable {tok!r}")
    name, occ, frame = m.group(1), int(m.group(2)), m.group(3)
    if not _FRAME_RE.match(frame):
        raise TraceSyntaxError(line, f"malformed frame id {frame!r} in {tok!r}")
    return TraceVar(name, occ, frame)


def _parse_string(tok: str, line: int) -> str:
    if len(tok) < 2 or tok[-1] != '"':
        raise TraceSyntaxError(line, f"unterminated string {tok!r}")
    out = []
    i = 1
    while i < len(tok) - 1:
        c = tok[i]
        if c == "\\":
            i += 1
            if i >= len(tok) - 1:
                raise TraceSyntaxError(line, "dangling escape in string")
            esc = tok[i]
            mapped = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}.get(esc)
            if mapped is None:
                raise TraceSyntaxError(line, f"bad escape \\{esc}")
            out.append(mapped)
        elif c == '"':
            raise TraceSyntaxError(line, "unescaped quote inside string")
        else:
            out.append(c)
        i += 1
    return "".join(out)


def _parse_expr(text: str, line: int) -> TraceExpr:
    text = text.strip()
    if text == "allocate":
        return Allocate()
    if text == "null":
        return NullLit()
    if text == "undefined":
        return UndefinedLit()
    if text == "true":
        return BoolLit(True)
    if text == "false":
        return BoolLit(False)
    if text.startswith('"'):
        return StringLit(_parse_string(text, line))
    if _NUM_RE.match(text):
        return NumberLit(float(text))
    if "." in text:
        base_tok, _, prop = text.rpartition(".")
        if re.fullmatch(_PROP, prop) and "#" in base_tok:
            return FieldRead(_parse_var(base_tok, line), prop)
    return VarRead(_parse_var(text, line))


def _split_src(raw: str, line: int) -> tuple[str, Optional[SourceLoc]]:
    if " ; src=" not in raw:
        return raw, None
    body, _, srctext = raw.rpartition(" ; src=")
    parts = srctext.rsplit(":", 2)
    if len(parts) != 3 or not (parts[1].isdigit() and parts[2].isdigit()):
        raise TraceSyntaxError(line, f"malformed source trailer {srctext!r}")
    return body, SourceLoc(parts[0], int(parts[1]), int(parts[2]))


def parse_trace(data: bytes | str) -> TraceProgram:
    """Parse trace text, checking single assignment and def-before-use."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    statements: list[TraceStatement] = []
    assigned: set[TraceVar] = set()

    def need(var: TraceVar, line: int) -> TraceVar:
        if var not in assigned:
            raise UseBeforeDef(var, line)
        return var

    for lineno, raw in enumerate(text.split("\n"), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        body, src = _split_src(stripped, lineno)

        m = _STMT_RES["delete"].match(body)
        if m:
            statements.append(Delete(need(_parse_var(m.group(1), lineno), lineno),
                                     m.group(2), src))
            continue
        m = _STMT_RES["begin"].match(body)
        if m:
            toks = m.group(1).split()
            if len(toks) < 2:
                raise TraceSyntaxError(lineno, "begin-call needs callee and receiver")
            vs = [need(_parse_var(t, lineno), lineno) for t in toks]
            statements.append(BeginCall(vs[0], vs[1], tuple(vs[2:]), src))
            continue
        m = _STMT_RES["end_call"].match(body)
        if m:
            statements.append(EndCall(need(_parse_var(m.group(1), lineno), lineno), src))
            continue
        m = _STMT_RES["end_init"].match(body)
        if m:
            statements.append(EndInit(need(_parse_var(m.group(1), lineno), lineno), src))
            continue
        m = _STMT_RES["field_write"].match(body)
        if m and "#" in m.group(1) and not m.group(1).startswith('"'):
            base = need(_parse_var(m.group(1), lineno), lineno)
            rhs = need(_parse_var(m.group(3), lineno), lineno)
            statements.append(FieldWrite(base, m.group(2), rhs, src))
            continue
        m = _STMT_RES["var_write"].match(body)
        if m:
            lhs = _parse_var(m.group(1), lineno)
            rhs = _parse_expr(m.group(2), lineno)
            if isinstance(rhs, VarRead):
                need(rhs.var, lineno)
            elif isinstance(rhs, FieldRead):
                need(rhs.base, lineno)
            if lhs in assigned:
                raise DoubleAssignment(lhs, lineno)
            assigned.add(lhs)
            statements.append(VarWrite(lhs, rhs, src))
            continue
        raise TraceSyntaxError(lineno, f"unrecognized statement {body!r}")
    return TraceProgram(tuple(statements))


# ---------------------------------------------------------------------------
# serialization

def format_number(n: float) -> str:
    if math.isnan(n):
        return "nan"
    if math.isinf(n):
        return "inf" if n > 0 else "-inf"
    if n == 0 and math.copysign(1.0, n) < 0:
        return "-0.0"
    if n.is_integer() and abs(n) < 2 ** 53:
        return str(int(n))
    return repr(n)


def format_string(s: str) -> str:
    out = ['"']
    for c in s:
        out.append({'"': '\\"', "\\": "\\\\", "\n": "\\n", "\t": "\\t",
                    "\r": "\\r"}.get(c, c))
    out.append('"')
    return "".join(out)


def _format_expr(e: TraceExpr) -> str:
    if isinstance(e, VarRead):
        return str(e.var)
    if isinstance(e, FieldRead):
        return f"{e.base}.{e.name}"
    if isinstance(e, Allocate):
        return "allocate"
    if isinstance(e, NullLit):
        return "null"
    if isinstance(e, UndefinedLit):
        return "undefined"
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, NumberLit):
        return format_number(e.value)
    if isinstance(e, StringLit):
        return format_string(e.value)
    raise TypeError(f"unknown expression {e!r}")


def format_statement(s: TraceStatement) -> str:
    if isinstance(s, VarWrite):
        body = f"{s.lhs} = {_format_expr(s.rhs)}"
    elif isinstance(s, FieldWrite):
        body = f"{s.base}.{s.name} = {s.rhs}"
    elif isinstance(s, Delete):
        body = f"delete {s.base}.{s.name}"
    elif isinstance(s, BeginCall):
        body = " ".join(["begin-call", str(s.callee), str(s.receiver),
                         *(str(a) for a in s.args)])
    elif isinstance(s, EndCall):
        body = f"end-call {s.result}"
    elif isinstance(s, EndInit):
        body = f"end-initialization {s.obj}"
    else:
        raise TypeError(f"unknown statement {s!r}")
    if s.src is not None:
        body += f" ; src={s.src}"
    return body


def serialize_trace(t: TraceProgram) -> bytes:
    lines = [format_statement(s) for s in t.statements]
    return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")
