"""Structural type lattice shared by every analysis configuration.

Types are immutable values: primitives, width-subtyped object types,
function types (plain or intersection of signatures), flat unions, type
variables, and equi-recursive types.  Equality and subtyping are decided
coinductively; the two least-upper-bound operators (`lub_subtyping`,
`lub_union`) are the merge strategies the configurations choose from.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

UNION_CAP = 8  # beyond this many members a union collapses to Top


class Type:
    __slots__ = ()


@dataclass(frozen=True)
class TopType(Type):
    pass


@dataclass(frozen=True)
class BottomType(Type):
    pass


@dataclass(frozen=True)
class PrimType(Type):
    kind: str  # number | boolean | string | null | undefined


@dataclass(frozen=True)
class VarType(Type):
    """A type variable: either a generalization parameter of a function
    signature or the bound variable of a recursive type."""

    id: int


@dataclass(frozen=True)
class ObjectType(Type):
    """Structural object type.  `props` keeps insertion order for rendering;
    semantic comparisons ignore the order and all metadata fields.

    `precise` marks types that originate from a literal/constructor and were
    never widened.  `rw`/`ro`, when set, partition the property domain into
    locally-writable and inherited read-only names (fixed-layout systems).
    `name_hint` carries a constructor name used only for rendering.
    """

    props: tuple[tuple[str, "Type"], ...]
    precise: bool = False
    rw: Optional[frozenset] = None
    ro: Optional[frozenset] = None
    name_hint: Optional[str] = None

    def prop(self, name: str) -> Optional["Type"]:
        for p, t in self.props:
            if p == name:
                return t
        return None

    def prop_names(self) -> tuple[str, ...]:
        return tuple(p for p, _ in self.props)


@dataclass(frozen=True)
class FuncSig:
    receiver: Type
    params: tuple[Type, ...]
    ret: Type


@dataclass(frozen=True)
class FunctionType(Type):
    """One plain signature, or an intersection of several."""

    sigs: tuple[FuncSig, ...]
    uncalled: bool = False

    @property
    def is_intersection(self) -> bool:
        return len(self.sigs) > 1


@dataclass(frozen=True)
class UnionType(Type):
    """Flat union; >= 2 pairwise non-equal members, no nested unions."""

    members: tuple[Type, ...]


@dataclass(frozen=True)
class RecType(Type):
    """Equi-recursive type binding `binder` in `body` (mu binder . body)."""

    binder: int
    body: Type


TOP = TopType()
BOTTOM = BottomType()
NUMBER = PrimType("number")
BOOLEAN = PrimType("boolean")
STRING = PrimType("string")
NULL = PrimType("null")
UNDEFINED = PrimType("undefined")

_rec_binder_counter = 0


def fresh_binder() -> int:
    global _rec_binder_counter
    _rec_binder_counter += 1
    return 1_000_000 + _rec_binder_counter


def obj(*props: tuple, **kw) -> ObjectType:
    return ObjectType(tuple(props), **kw)


# ---------------------------------------------------------------------------
# substitution / recursion helpers

def subst_var(t: Type, var_id: int, replacement: Type) -> Type:
    if isinstance(t, VarType):
        return replacement if t.id == var_id else t
    if isinstance(t, ObjectType):
        new = tuple((p, subst_var(v, var_id, replacement)) for p, v in t.props)
        if all(a is b for (_, a), (_, b) in zip(new, t.props)):
            return t
        return ObjectType(new, t.precise, t.rw, t.ro, t.name_hint)
    if isinstance(t, FunctionType):
        sigs = tuple(
            FuncSig(
                subst_var(s.receiver, var_id, replacement),
                tuple(subst_var(p, var_id, replacement) for p in s.params),
                subst_var(s.ret, var_id, replacement),
            )
            for s in t.sigs
        )
        return FunctionType(sigs, t.uncalled)
    if isinstance(t, UnionType):
        return UnionType(tuple(subst_var(m, var_id, replacement) for m in t.members))
    if isinstance(t, RecType):
        if t.binder == var_id:  # shadowed
            return t
        return RecType(t.binder, subst_var(t.body, var_id, replacement))
    return t


def unroll(t: RecType) -> Type:
    """One-step unrolling: substitute the whole mu-type for its binder."""
    return subst_var(t.body, t.binder, t)


def free_vars(t: Type, acc: Optional[set] = None) -> set:
    if acc is None:
        acc = set()
    if isinstance(t, VarType):
        acc.add(t.id)
    elif isinstance(t, ObjectType):
        for _, v in t.props:
            free_vars(v, acc)
    elif isinstance(t, FunctionType):
        for s in t.sigs:
            free_vars(s.receiver, acc)
            for p in s.params:
                free_vars(p, acc)
            free_vars(s.ret, acc)
    elif isinstance(t, UnionType):
        for m in t.members:
            free_vars(m, acc)
    elif isinstance(t, RecType):
        inner = free_vars(t.body, set())
        inner.discard(t.binder)
        acc |= inner
    return acc


def fold_rec(binder: int, body: Type) -> Type:
    """Close a cycle discovered during ascription.  Acyclic bodies (binder
    unused) come back unchanged; otherwise wrap in a RecType."""
    if binder in free_vars(body):
        return RecType(binder, body)
    return body


# ---------------------------------------------------------------------------
# equality and subtyping (coinductive over Rec unrollings)

def type_equal(a: Type, b: Type) -> bool:
    return _equal(a, b, set())


def _equal(a: Type, b: Type, assumed: set) -> bool:
    if a is b:
        return True
    if isinstance(a, RecType) or isinstance(b, RecType):
        key = (id(a), id(b))
        if key in assumed:
            return True
        assumed.add(key)
        a2 = unroll(a) if isinstance(a, RecType) else a
        b2 = unroll(b) if isinstance(b, RecType) else b
        return _equal(a2, b2, assumed)
    if type(a) is not type(b):
        return False
    if isinstance(a, (TopType, BottomType)):
        return True
    if isinstance(a, PrimType):
        return a.kind == b.kind
    if isinstance(a, VarType):
        return a.id == b.id
    if isinstance(a, ObjectType):
        an, bn = dict(a.props), dict(b.props)
        if set(an) != set(bn):
            return False
        return all(_equal(an[p], bn[p], assumed) for p in an)
    if isinstance(a, FunctionType):
        if a.uncalled != b.uncalled or len(a.sigs) != len(b.sigs):
            return False
        return _sig_set_equal(a.sigs, b.sigs, assumed)
    if isinstance(a, UnionType):
        return _member_set_equal(a.members, b.members, assumed)
    raise TypeError(f"unknown type node {a!r}")


def _sig_equal(a: FuncSig, b: FuncSig, assumed: set) -> bool:
    return (
        len(a.params) == len(b.params)
        and _equal(a.receiver, b.receiver, assumed)
        and all(_equal(p, q, assumed) for p, q in zip(a.params, b.params))
        and _equal(a.ret, b.ret, assumed)
    )


def _sig_set_equal(xs, ys, assumed) -> bool:
    remaining = list(ys)
    for x in xs:
        for i, y in enumerate(remaining):
            if _sig_equal(x, y, assumed):
                del remaining[i]
                break
        else:
            return False
    return not remaining


def _member_set_equal(xs, ys, assumed) -> bool:
    if len(xs) != len(ys):
        return False
    remaining = list(ys)
    for x in xs:
        for i, y in enumerate(remaining):
            if _equal(x, y, assumed):
                del remaining[i]
                break
        else:
            return False
    return True


def is_subtype(a: Type, b: Type) -> bool:
    return _subtype(a, b, set())


def _subtype(a: Type, b: Type, assumed: set) -> bool:
    if a is b or isinstance(b, TopType) or isinstance(a, BottomType):
        return True
    if isinstance(a, RecType) or isinstance(b, RecType):
        key = (id(a), id(b))
        if key in assumed:
            return True
        assumed.add(key)
        a2 = unroll(a) if isinstance(a, RecType) else a
        b2 = unroll(b) if isinstance(b, RecType) else b
        return _subtype(a2, b2, assumed)
    # A union on the left must fit as a whole; on the right one member
    # suffices.  Left rule first so union <= union means member-wise cover.
    if isinstance(a, UnionType):
        return all(_subtype(m, b, assumed) for m in a.members)
    if isinstance(b, UnionType):
        return any(_subtype(a, m, assumed) for m in b.members)
    if isinstance(b, BottomType) or isinstance(a, TopType):
        return False
    if isinstance(a, PrimType):
        return isinstance(b, PrimType) and a.kind == b.kind
    if isinstance(a, VarType):
        return isinstance(b, VarType) and a.id == b.id
    if isinstance(a, ObjectType):
        if not isinstance(b, ObjectType):
            return False
        # width subtyping only: every property of b must exist in a with an
        # identical type (no depth).
        an = dict(a.props)
        return all(p in an and _equal(an[p], t, set()) for p, t in b.props)
    if isinstance(a, FunctionType):
        # signatures are invariant in this lattice; covariant generalization
        # happens in the function-merge operators instead.
        return isinstance(b, FunctionType) and _equal(a, b, set())
    raise TypeError(f"unknown type node {a!r}")


# ---------------------------------------------------------------------------
# least upper bounds

def _object_view(t: Type) -> Optional[ObjectType]:
    """The object structure of t, unrolling a recursive type one step."""
    if isinstance(t, ObjectType):
        return t
    if isinstance(t, RecType):
        u = unroll(t)
        if isinstance(u, ObjectType):
            return u
    return None


def _lub_objects(a: Type, b: Type) -> ObjectType:
    """Width lub: keep common properties whose types are identical.  The
    result is never precise (the inputs differ when this is called)."""
    ao, bo = _object_view(a), _object_view(b)
    assert ao is not None and bo is not None
    bn = dict(bo.props)
    props = tuple((p, t) for p, t in ao.props if p in bn and type_equal(t, bn[p]))
    rw = ro = None
    if ao.rw is not None and bo.rw is not None:
        names = frozenset(p for p, _ in props)
        rw = ao.rw & bo.rw & names
        ro = names - rw
    hint = ao.name_hint if ao.name_hint == bo.name_hint else None
    return ObjectType(props, precise=False, rw=rw, ro=ro, name_hint=hint)


def _is_objectish(t: Type) -> bool:
    return _object_view(t) is not None


def lub_subtyping(a: Type, b: Type) -> Type:
    """Merge operator of the plain width-subtyping lattice: identical types
    are kept, two object types keep their common identically-typed
    properties, everything else goes to Top."""
    if type_equal(a, b):
        return a
    if isinstance(a, BottomType):
        return b
    if isinstance(b, BottomType):
        return a
    if isinstance(a, TopType) or isinstance(b, TopType):
        return TOP
    if _is_objectish(a) and _is_objectish(b):
        return _lub_objects(a, b)
    return TOP


def lub_union(a: Type, b: Type) -> Type:
    """Union-introducing merge: like lub_subtyping on two object types, but
    values of different sorts combine into a flat union.  Within the union,
    object members are merged pairwise so at most one remains."""
    if type_equal(a, b):
        return a
    if isinstance(a, BottomType):
        return b
    if isinstance(b, BottomType):
        return a
    if isinstance(a, TopType) or isinstance(b, TopType):
        return TOP
    members: list[Type] = []
    for t in _members(a) + _members(b):
        if isinstance(t, TopType):
            return TOP
        if isinstance(t, BottomType):
            continue
        if _is_objectish(t):
            for i, m in enumerate(members):
                if _is_objectish(m):
                    members[i] = m if type_equal(m, t) else _lub_objects(m, t)
                    break
            else:
                members.append(t)
        elif isinstance(t, FunctionType):
            for m in members:
                if isinstance(m, FunctionType):
                    if not type_equal(m, t):
                        return TOP  # two distinct function types do not merge
                    break
            else:
                members.append(t)
        else:
            if not any(type_equal(m, t) for m in members):
                members.append(t)
    if len(members) > UNION_CAP:
        return TOP
    if len(members) == 1:
        return members[0]
    return UnionType(tuple(members))


def _members(t: Type) -> list[Type]:
    return list(t.members) if isinstance(t, UnionType) else [t]


# ---------------------------------------------------------------------------
# rendering

_FREE_NAMES = "EFGH"
_BOUND_NAMES = "XYZW"


def render(t: Type) -> str:
    """Canonical display form: `{p: Number}`, `<({p: Number}) -> Undefined>`,
    `(E) -> E`, `Number | {f: Number}`, `muX.{next: X}`."""
    return _render(t, {}, [0])


def _var_name(names: str, index: int) -> str:
    return names[index] if index < len(names) else f"{names[0]}{index}"


def _render(t: Type, bound: dict, free_counter: list) -> str:
    if isinstance(t, TopType):
        return "Top"
    if isinstance(t, BottomType):
        return "Bottom"
    if isinstance(t, PrimType):
        return {"number": "Number", "boolean": "Boolean", "string": "String",
                "null": "Null", "undefined": "Undefined"}[t.kind]
    if isinstance(t, VarType):
        if t.id in bound:
            return bound[t.id]
        # free variables are generalization parameters: E, F, G, ...
        key = ("free", t.id)
        if key not in bound:
            bound[key] = _var_name(_FREE_NAMES, free_counter[0])
            free_counter[0] += 1
        return bound[key]
    if isinstance(t, ObjectType):
        if t.name_hint:
            return t.name_hint
        inner = ", ".join(f"{p}: {_render(v, bound, free_counter)}" for p, v in t.props)
        return "{" + inner + "}"
    if isinstance(t, FunctionType):
        if t.uncalled:
            return "<uncalled>"
        rendered = [_render_sig(s, bound, free_counter) for s in t.sigs]
        if len(rendered) == 1:
            # polymorphic signatures read naturally bare: (E) -> E
            if free_vars(t):
                return rendered[0]
            return f"<{rendered[0]}>"
        return "<" + " ^ ".join(rendered) + ">"
    if isinstance(t, UnionType):
        return " | ".join(_render(m, bound, free_counter) for m in t.members)
    if isinstance(t, RecType):
        name = _var_name(_BOUND_NAMES, len([k for k in bound if isinstance(k, int)]))
        bound2 = dict(bound)
        bound2[t.binder] = name
        return f"mu{name}.{_render(t.body, bound2, free_counter)}"
    raise TypeError(f"unknown type node {t!r}")


def _render_sig(s: FuncSig, bound: dict, free_counter: list) -> str:
    params = ", ".join(_render(p, bound, free_counter) for p in s.params)
    return f"({params}) -> {_render(s.ret, bound, free_counter)}"


_COMPACT_PRIMS = {"number": "int", "boolean": "bool", "string": "string",
                  "null": "null", "undefined": "undefined"}


def render_compact(t: Type) -> str:
    """Short notation used by the tag-test report: named object types render
    by constructor name and primitives use lowercase tags (`A | int`)."""
    if isinstance(t, PrimType):
        return _COMPACT_PRIMS[t.kind]
    if isinstance(t, ObjectType):
        if t.name_hint:
            return t.name_hint
        inner = ", ".join(f"{p}: {render_compact(v)}" for p, v in t.props)
        return "{" + inner + "}"
    if isinstance(t, UnionType):
        return " | ".join(render_compact(m) for m in t.members)
    if isinstance(t, TopType):
        return "top"
    if isinstance(t, BottomType):
        return "bottom"
    return render(t)


def canonical_key(t: Type) -> str:
    """Deterministic structural key usable for dedup tables.  Property and
    member order are normalized so semantically equal types rarely disagree;
    exact comparisons still go through type_equal."""
    return _ckey(t, {})


def _ckey(t: Type, bound: dict) -> str:
    if isinstance(t, TopType):
        return "T"
    if isinstance(t, BottomType):
        return "B"
    if isinstance(t, PrimType):
        return t.kind
    if isinstance(t, VarType):
        return f"v{bound.get(t.id, t.id)}"
    if isinstance(t, ObjectType):
        inner = ",".join(f"{p}:{_ckey(v, bound)}" for p, v in sorted(t.props))
        return "{" + inner + "}"
    if isinstance(t, FunctionType):
        sigs = sorted(
            "[" + _ckey(s.receiver, bound) + "](" +
            ",".join(_ckey(p, bound) for p in s.params) + ")->" + _ckey(s.ret, bound)
            for s in t.sigs
        )
        return ("uncalled" if t.uncalled else "") + "&".join(sigs)
    if isinstance(t, UnionType):
        return "|".join(sorted(_ckey(m, bound) for m in t.members))
    if isinstance(t, RecType):
        bound2 = dict(bound)
        bound2[t.binder] = f"mu{len(bound)}"
        return f"mu.{_ckey(t.body, bound2)}"
    raise TypeError(f"unknown type node {t!r}")
