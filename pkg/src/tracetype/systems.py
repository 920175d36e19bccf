"""The concrete type-system configurations: `sub|union` crossed with
`base|poly|intersect`, plus the fixed-object-layout system.

`poly` generalizes function signatures by enumerating type-parameter
replacements per invocation and intersecting the candidate sets; checking
uses context keys derived from each invocation's instantiation, so merging
keeps variables from differently-instantiated calls apart.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

from . import lattice as lt
from .lattice import (
    BOTTOM, FuncSig, FunctionType, ObjectType, Type, UNDEFINED, VarType,
    canonical_key, lub_subtyping, lub_union, type_equal,
)
from .framework import InvocationRecord, TypeSystemPlugin

ARITY_CAP = 4
VAR_CAP = 3
GROUP_POSITIONS_CAP = 6
CANDIDATE_CAP = 4096


class NoMatch(Exception):
    """An invocation does not instantiate the generalized signature."""


# ---------------------------------------------------------------------------
# base function merge: pointwise covariant lub

def make_lub_fn_base(lub: Callable[[Type, Type], Type]) -> Callable:
    def lub_fn_base(sigs: list[FuncSig]) -> Type:
        arity = max(len(s.params) for s in sigs)
        receiver: Type = BOTTOM
        params: list[Type] = [BOTTOM] * arity
        ret: Type = BOTTOM
        for s in sigs:
            receiver = lub(receiver, s.receiver)
            for i in range(arity):
                # absent trailing arguments were seen as undefined
                params[i] = lub(params[i], s.params[i] if i < len(s.params) else UNDEFINED)
            ret = lub(ret, s.ret)
        return FunctionType((FuncSig(receiver, tuple(params), ret),))
    return lub_fn_base


# ---------------------------------------------------------------------------
# intersections

def lub_fn_intersect(sigs: list[FuncSig]) -> Type:
    kept: list[FuncSig] = []
    for s in sigs:
        if not any(_sig_equal(s, k) for k in kept):
            kept.append(s)
    return FunctionType(tuple(kept))


def _sig_equal(a: FuncSig, b: FuncSig) -> bool:
    return (len(a.params) == len(b.params)
            and type_equal(a.receiver, b.receiver)
            and all(type_equal(p, q) for p, q in zip(a.params, b.params))
            and type_equal(a.ret, b.ret))


# ---------------------------------------------------------------------------
# parametric polymorphism by enumeration

@dataclass(frozen=True)
class PolyCandidate:
    sig: FuncSig
    score: int   # total type-variable occurrences
    nvars: int   # distinct type variables


# Positions are paths into a signature: ('param', i) and ('ret',) at the
# top level, plus one nesting level into object-typed arguments, returns,
# and the receiver ('recv' has no top-level position).

def _positions(sig: FuncSig) -> list[tuple[tuple, Type, bool]]:
    out: list[tuple[tuple, Type, bool]] = []

    def nested(path_head: tuple, t: Type, is_recv: bool) -> None:
        if isinstance(t, ObjectType):
            for p, v in t.props:
                out.append((path_head + (p,), v, is_recv))

    for i, p in enumerate(sig.params):
        out.append((("param", i), p, False))
        nested(("param", i), p, False)
    out.append((("ret",), sig.ret, False))
    nested(("ret",), sig.ret, False)
    nested(("recv",), sig.receiver, True)
    return out


def _conflicts(paths: set) -> bool:
    # a path nested under a replaced top-level position is unavailable
    return any(p[:2] in paths for p in paths if len(p) > 2)


def _rebuild(sig: FuncSig, assignment: dict) -> FuncSig:
    def rebuild_slot(head: tuple, t: Type) -> Type:
        if head in assignment:
            return VarType(assignment[head])
        if isinstance(t, ObjectType):
            props = tuple((p, VarType(assignment[head + (p,)])
                           if head + (p,) in assignment else v)
                          for p, v in t.props)
            if any(head + (p,) in assignment for p, _ in t.props):
                return ObjectType(props, t.precise, t.rw, t.ro, t.name_hint)
        return t

    params = tuple(rebuild_slot(("param", i), p) for i, p in enumerate(sig.params))
    ret = rebuild_slot(("ret",), sig.ret)
    recv = rebuild_slot(("recv",), sig.receiver)
    return FuncSig(recv, params, ret)


def enumerate_candidates(sig: FuncSig) -> Optional[list[PolyCandidate]]:
    """All type-parameter replacements of one invocation signature: for each
    concrete type, every subset of its occurrences may be replaced by one
    fresh variable.  Subsets lying entirely inside the receiver are skipped
    (a parameter that never shows in the signature proper cannot be
    observed).  Returns None when the enumeration would exceed the caps."""
    groups: dict[str, list[tuple[tuple, bool]]] = {}
    for path, t, is_recv in _positions(sig):
        groups.setdefault(canonical_key(t), []).append((path, is_recv))

    per_group: list[list[tuple[tuple, ...]]] = []
    for positions in groups.values():
        non_recv = [p for p, r in positions if not r]
        if len(positions) > GROUP_POSITIONS_CAP:
            subsets = [(), tuple(p for p, _ in positions), tuple(non_recv)]
            subsets = [s for i, s in enumerate(subsets) if s not in subsets[:i]]
        else:
            subsets = [()]
            paths = [p for p, _ in positions]
            for n in range(1, len(paths) + 1):
                subsets += list(itertools.combinations(paths, n))
        valid = [s for s in subsets
                 if not s or any(p in non_recv for p in s)]
        per_group.append(valid)

    total = 1
    for v in per_group:
        total *= len(v)
        if total > CANDIDATE_CAP:
            return None

    out: list[PolyCandidate] = []
    for combo in itertools.product(*per_group):
        chosen = [s for s in combo if s]
        if len(chosen) > VAR_CAP:
            continue
        all_paths = {p for s in chosen for p in s}
        if _conflicts(all_paths):
            continue
        assignment = {p: vid for vid, s in enumerate(chosen) for p in s}
        out.append(PolyCandidate(_canonical_sig(_rebuild(sig, assignment)),
                                 score=len(all_paths), nvars=len(chosen)))
    return out


def _canonical_sig(sig: FuncSig) -> FuncSig:
    """Renumber variables by first occurrence: parameters left to right,
    then the return type, then the receiver."""
    mapping: dict[int, int] = {}

    def walk(t: Type) -> None:
        if isinstance(t, VarType):
            mapping.setdefault(t.id, len(mapping))
        elif isinstance(t, ObjectType):
            for _, v in t.props:
                walk(v)

    for p in sig.params:
        walk(p)
    walk(sig.ret)
    walk(sig.receiver)

    def sub(t: Type) -> Type:
        for old in sorted(lt.free_vars(t), reverse=True):
            t = lt.subst_var(t, old, VarType(mapping[old] - 10_000))
        for old in sorted(lt.free_vars(t)):
            t = lt.subst_var(t, old, VarType(old + 10_000))
        return t

    return FuncSig(sub(sig.receiver), tuple(sub(p) for p in sig.params), sub(sig.ret))


def _candidate_key(c: PolyCandidate) -> str:
    s = c.sig
    return (canonical_key(s.receiver) + "|" +
            "|".join(canonical_key(p) for p in s.params) + "->" +
            canonical_key(s.ret))


def _var_occurrence_counts(sig: FuncSig) -> dict[int, int]:
    counts: dict[int, int] = {}

    def walk(t: Type) -> None:
        if isinstance(t, VarType):
            counts[t.id] = counts.get(t.id, 0) + 1
        elif isinstance(t, ObjectType):
            for _, v in t.props:
                walk(v)

    walk(sig.receiver)
    for p in sig.params:
        walk(p)
    walk(sig.ret)
    return counts


def make_lub_fn_poly(lub: Callable[[Type, Type], Type]) -> Callable:
    base = make_lub_fn_base(lub)

    def lub_fn_poly(sigs: list[FuncSig]) -> Type:
        if any(len(s.params) > ARITY_CAP for s in sigs):
            return base(sigs)
        survivor_keys: Optional[dict[str, PolyCandidate]] = None
        for s in sigs:
            cands = enumerate_candidates(s)
            if cands is None:
                return base(sigs)
            table = {}
            for c in cands:
                table.setdefault(_candidate_key(c), c)
            if survivor_keys is None:
                survivor_keys = table
            else:
                survivor_keys = {k: v for k, v in survivor_keys.items() if k in table}
        assert survivor_keys is not None
        # a variable observed only once is not more general than the
        # concrete type it replaces
        winners = [c for c in survivor_keys.values()
                   if all(n >= 2 for n in _var_occurrence_counts(c.sig).values())]
        polymorphic = [c for c in winners if c.nvars > 0]
        if not polymorphic:
            return base(sigs)
        best = min(polymorphic, key=lambda c: (-c.score, c.nvars, _candidate_key(c)))
        return FunctionType((best.sig,))

    return lub_fn_poly


def match_instantiation(general: FuncSig, concrete: FuncSig) -> dict:
    """The instantiation map taking the generalized signature to one
    invocation's concrete signature.  Raises NoMatch when impossible."""
    inst: dict[int, Type] = {}

    def walk(g: Type, c: Type) -> None:
        if isinstance(g, VarType):
            if g.id in inst:
                if not type_equal(inst[g.id], c):
                    raise NoMatch(f"variable bound to two types: "
                                  f"{lt.render(inst[g.id])} vs {lt.render(c)}")
            else:
                inst[g.id] = c
            return
        if isinstance(g, ObjectType) and isinstance(c, ObjectType):
            cn = dict(c.props)
            if set(cn) != {p for p, _ in g.props}:
                raise NoMatch("object shapes differ")
            for p, v in g.props:
                walk(v, cn[p])
            return
        if not type_equal(g, c):
            raise NoMatch(f"{lt.render(g)} does not match {lt.render(c)}")

    if len(general.params) != len(concrete.params):
        raise NoMatch("arity differs")
    walk(general.receiver, concrete.receiver)
    for g, c in zip(general.params, concrete.params):
        walk(g, c)
    walk(general.ret, concrete.ret)
    return inst


def poly_context_key(inst: dict) -> str:
    parts = [f"{vid}:{canonical_key(t)}" for vid, t in sorted(inst.items())]
    return "{" + ",".join(parts) + "}"


def poly_assign_context_keys(fn_type: Type, recs: list[InvocationRecord]) -> None:
    winner = None
    if (isinstance(fn_type, FunctionType) and len(fn_type.sigs) == 1
            and lt.free_vars(fn_type)):
        winner = fn_type.sigs[0]
    for rec in recs:
        if winner is None or rec.sig is None:
            rec.key, rec.inst = "{}", {}
        else:
            rec.inst = match_instantiation(winner, rec.sig)
            rec.key = poly_context_key(rec.inst)


# ---------------------------------------------------------------------------
# the named configurations

CONFIG_NAMES = ("sub/base", "union/base", "sub/poly", "union/poly",
                "sub/intersect", "union/intersect", "fixed-layout")


def get_plugin(name: str) -> TypeSystemPlugin:
    if name == "fixed-layout":
        return TypeSystemPlugin(
            name=name, lub=lub_subtyping,
            lub_fn=make_lub_fn_base(lub_subtyping),
            flow="FI", context="CI",
            checker="fixed", fixed_layout=True,
        )
    try:
        lub_name, fn_name = name.split("/")
        lub = {"sub": lub_subtyping, "union": lub_union}[lub_name]
    except (ValueError, KeyError):
        raise KeyError(f"unknown configuration {name!r}") from None
    if fn_name == "base":
        return TypeSystemPlugin(name=name, lub=lub, lub_fn=make_lub_fn_base(lub),
                                flow="FI", context="CI")
    if fn_name == "poly":
        return TypeSystemPlugin(name=name, lub=lub, lub_fn=make_lub_fn_poly(lub),
                                flow="FI", context="CS",
                                assign_context_keys=poly_assign_context_keys)
    if fn_name == "intersect":
        return TypeSystemPlugin(name=name, lub=lub, lub_fn=lub_fn_intersect,
                                flow="FI", context="CS")
    raise KeyError(f"unknown configuration {name!r}")


def tagtest_plugin(lub=lub_union) -> TypeSystemPlugin:
    """The configuration mandated for tag-test detection: flow-sensitive,
    context-insensitive, union-producing merge, base function merge, and
    assignment propagation disabled."""
    return TypeSystemPlugin(name="tagtest", lub=lub,
                            lub_fn=make_lub_fn_base(lub_subtyping),
                            flow="FS", context="CI",
                            propagate_assignments=False)
