"""Tag-test candidate detection: pairs of consecutive reads of a source
variable, with no intervening write, where the merged type at the second
read strictly narrows the first.

Detection needs per-occurrence types, so it runs flow-sensitively with the
union-producing merge, plain subtype generalization for functions, and
assignment propagation disabled; occurrences of the same static read still
merge across invocations, which is what makes the narrowing observable.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .framework import Analysis, TypeSystemPlugin, analyze, is_temp_name
from .lattice import Type, is_subtype, render_compact, type_equal
from .systems import tagtest_plugin
from .tracelang import SourceLoc, TraceProgram, TraceVar, VarRead, VarWrite


class ConfigError(Exception):
    """Detection invoked with a merge policy it cannot work under."""


@dataclass
class TagTestCandidate:
    var: str
    frame: str
    wide_loc: Optional[SourceLoc]
    narrow_loc: Optional[SourceLoc]
    wide: Type
    narrow: Type
    index: int  # trace index of the narrowing read
    dup_hint: bool = False


def _is_read(stmt: VarWrite) -> bool:
    """A read occurrence copies the previous occurrence of the same source
    variable; anything else writing the variable is a write event."""
    return (isinstance(stmt.rhs, VarRead)
            and stmt.rhs.var.name == stmt.lhs.name
            and stmt.rhs.var.frame == stmt.lhs.frame
            and stmt.rhs.var.occ == stmt.lhs.occ - 1)


def detect_tag_tests(trace: TraceProgram,
                     plugin: Optional[TypeSystemPlugin] = None,
                     analysis: Optional[Analysis] = None) -> list[TagTestCandidate]:
    if plugin is None:
        plugin = tagtest_plugin()
    if plugin.flow != "FS":
        raise ConfigError("tag-test detection requires the FS merge setting")
    if plugin.propagate_assignments:
        raise ConfigError("tag-test detection requires assignment propagation off")
    if analysis is None:
        analysis = analyze(trace, plugin)
    ghat = analysis.gamma_hat

    events: dict = {}  # (frame, name) -> [(index, kind, var, loc)]
    for index, stmt in enumerate(trace.statements):
        if not isinstance(stmt, VarWrite):
            continue
        v = stmt.lhs
        if is_temp_name(v.name) or v.name.startswith("esc") or v.frame == "N":
            continue
        kind = "read" if _is_read(stmt) else "write"
        events.setdefault((v.frame, v.name), []).append((index, kind, v, stmt.src))

    raw: list[TagTestCandidate] = []
    for (frame, name), log in events.items():
        for (i1, k1, v1, loc1), (i2, k2, v2, loc2) in zip(log, log[1:]):
            if k1 != "read" or k2 != "read":
                continue
            wide, narrow = ghat[v1], ghat[v2]
            if is_subtype(narrow, wide) and not type_equal(narrow, wide):
                raw.append(TagTestCandidate(name, frame, loc1, loc2,
                                            wide, narrow, index=i2))
    raw.sort(key=lambda c: c.index)

    # a wide/narrow pair recurring within two statements is likely the same
    # guard observed twice (e.g. a saved guard expression)
    for i, cand in enumerate(raw):
        key = (render_compact(cand.wide), render_compact(cand.narrow))
        for prev in raw[:i]:
            if (render_compact(prev.wide), render_compact(prev.narrow)) == key \
                    and abs(cand.index - prev.index) <= 2:
                cand.dup_hint = True
                break
    return raw


def dedupe_candidates(raw: list[TagTestCandidate]) -> list[TagTestCandidate]:
    """One row per source-location pair for the human-facing list."""
    seen: set = set()
    out = []
    for c in raw:
        key = (str(c.wide_loc), str(c.narrow_loc), c.var)
        if key not in seen:
            seen.add(key)
            out.append(c)
    return out


def candidates_csv(raw: list[TagTestCandidate]) -> str:
    rows = ["var,frame,wide_loc,narrow_loc,wide_type,narrow_type,dup_hint"]
    deduped = dedupe_candidates(raw)
    for c in deduped:
        rows.append(",".join([
            c.var, c.frame, str(c.wide_loc), str(c.narrow_loc),
            render_compact(c.wide).replace(",", ";"),
            render_compact(c.narrow).replace(",", ";"),
            "possible-duplicate" if c.dup_hint else "",
        ]))
    rows.append(f"# raw={len(raw)} deduped={len(deduped)}")
    return "\n".join(rows) + "\n"
