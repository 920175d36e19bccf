import random

from tracetype.lattice import (
    BOOLEAN, BOTTOM, NULL, NUMBER, STRING, TOP, UNDEFINED, FuncSig,
    FunctionType, ObjectType, RecType, UnionType, VarType, fold_rec,
    fresh_binder, is_subtype, lub_subtyping, lub_union, render,
    render_compact, type_equal, unroll,
)

import _gen

PN = ObjectType((("p", NUMBER),))
PNQS = ObjectType((("p", NUMBER), ("q", STRING)))
QSRB = ObjectType((("q", STRING), ("r", BOOLEAN)))


def test_equal_rec_unrolling():
    b = fresh_binder()
    mu = RecType(b, ObjectType((("next", VarType(b)),)))
    assert type_equal(mu, unroll(mu))
    assert type_equal(unroll(mu), mu)


def test_equal_alpha_invariant():
    b1, b2 = fresh_binder(), fresh_binder()
    m1 = RecType(b1, ObjectType((("next", VarType(b1)), ("v", NUMBER))))
    m2 = RecType(b2, ObjectType((("v", NUMBER), ("next", VarType(b2)))))
    assert type_equal(m1, m2)


def test_equal_distinguishes_objects():
    assert not type_equal(PN, PNQS)
    assert type_equal(PN, ObjectType((("p", NUMBER),), precise=True))  # metadata ignored


def test_subtype_width():
    assert is_subtype(PNQS, PN)
    assert not is_subtype(PN, PNQS)
    # common properties must be identical, no depth subtyping
    deep_a = ObjectType((("o", PNQS),))
    deep_b = ObjectType((("o", PN),))
    assert not is_subtype(deep_a, deep_b)


def test_subtype_union():
    u = UnionType((NUMBER, PN))
    assert is_subtype(NUMBER, u)
    assert is_subtype(PN, u)
    assert not is_subtype(STRING, u)
    assert is_subtype(u, TOP)
    assert not is_subtype(u, NUMBER)


def test_lub_subtyping_objects():
    assert type_equal(lub_subtyping(PN, PNQS), PN)
    assert lub_subtyping(PN, PNQS).precise is False
    assert type_equal(lub_subtyping(NUMBER, PN), TOP)
    assert type_equal(lub_subtyping(NUMBER, STRING), TOP)
    assert lub_subtyping(PN, PN) is PN


def test_lub_union_mixed_sorts():
    u = lub_union(NUMBER, ObjectType((("f", NUMBER),)))
    assert isinstance(u, UnionType)
    assert render(u) == "Number | {f: Number}"
    # object members merge pairwise so at most one remains
    u2 = lub_union(u, PNQS)
    assert isinstance(u2, UnionType)
    objs = [m for m in u2.members if isinstance(m, ObjectType)]
    assert len(objs) == 1 and objs[0].props == ()


def test_lub_union_absorption():
    u = UnionType((NUMBER, STRING))
    assert type_equal(lub_union(u, STRING), u)


def test_lub_rec_alignment():
    b1 = fresh_binder()
    mu = RecType(b1, ObjectType((("next", VarType(b1)), ("v", NUMBER))))
    plain = ObjectType((("next", mu), ("w", STRING)))
    merged = lub_subtyping(mu, plain)
    assert isinstance(merged, ObjectType)
    assert merged.prop_names() == ("next",)
    assert type_equal(merged.prop("next"), mu)
    # structurally disagreeing cycles keep only identically-typed properties
    b2 = fresh_binder()
    other = RecType(b2, ObjectType((("next", VarType(b2)), ("w", STRING))))
    merged2 = lub_subtyping(mu, other)
    assert isinstance(merged2, ObjectType) and merged2.props == ()


def test_fold_rec_acyclic_has_no_rec():
    b = fresh_binder()
    assert fold_rec(b, ObjectType((("a", NUMBER),))) == ObjectType((("a", NUMBER),))
    cyc = fold_rec(b, ObjectType((("self", VarType(b)),)))
    assert isinstance(cyc, RecType)


def test_render_forms():
    assert render(NUMBER) == "Number"
    assert render(PNQS) == "{p: Number, q: String}"
    sig = FuncSig(TOP, (PN,), UNDEFINED)
    assert render(FunctionType((sig,))) == "<({p: Number}) -> Undefined>"
    v = VarType(0)
    assert render(FunctionType((FuncSig(TOP, (v,), v),))) == "(E) -> E"
    b = fresh_binder()
    assert render(RecType(b, ObjectType((("self", VarType(b)), ("v", NUMBER))))) == \
        "muX.{self: X, v: Number}"
    assert render_compact(UnionType((ObjectType((), name_hint="A"), NUMBER))) == "A | int"
    assert render_compact(ObjectType((), name_hint="A")) == "A"


def test_intersection_render():
    s1 = FuncSig(TOP, (PNQS,), NUMBER)
    s2 = FuncSig(TOP, (QSRB,), NUMBER)
    out = render(FunctionType((s1, s2)))
    assert out == "<({p: Number, q: String}) -> Number ^ ({q: String, r: Boolean}) -> Number>"


# ---------------------------------------------------------------------------
# property suites (seeded; part of the acceptance property budget)

N_CASES = 1000


def test_lattice_laws_subtyping_lub():
    rng = random.Random(701)
    for _ in range(N_CASES):
        a = _gen.random_type(rng)
        b = _gen.random_type(rng)
        c = _gen.random_type(rng)
        for lub in (lub_subtyping, lub_union):
            ab = lub(a, b)
            assert type_equal(ab, lub(b, a)), (render(a), render(b))
            assert type_equal(lub(a, lub(b, c)), lub(ab, c)), \
                (render(a), render(b), render(c))
            assert type_equal(lub(a, a), a)
            assert is_subtype(a, ab) and is_subtype(b, ab)


def test_lub_monotone():
    rng = random.Random(4242)
    for _ in range(N_CASES):
        a_hi = _gen.random_type(rng)
        a_lo = _gen.random_subtype(rng, a_hi)
        b = _gen.random_type(rng)
        for lub in (lub_subtyping, lub_union):
            assert is_subtype(lub(a_lo, b), lub(a_hi, b)), \
                (render(a_lo), render(a_hi), render(b))


def test_subtype_partial_order():
    rng = random.Random(99)
    for _ in range(N_CASES):
        a = _gen.random_type(rng)
        b = _gen.random_type(rng)
        c = _gen.random_type(rng)
        assert is_subtype(a, a)
        if is_subtype(a, b) and is_subtype(b, c):
            assert is_subtype(a, c)
        if is_subtype(a, b) and is_subtype(b, a):
            assert type_equal(a, b)


def test_equal_is_equivalence():
    rng = random.Random(512)
    for _ in range(N_CASES):
        a = _gen.random_type(rng)
        b = _gen.random_type(rng)
        assert type_equal(a, a)
        if type_equal(a, b):
            assert type_equal(b, a)


def test_lub_chains_stabilize():
    rng = random.Random(2024)
    # repeated joins must reach a fixed point within the lattice height bound
    bound = len(_gen.PROP_POOL) + 7 + 2
    for _ in range(200):
        acc = _gen.random_type(rng)
        for lub in (lub_subtyping, lub_union):
            steps = 0
            while True:
                nxt = lub(acc, _gen.random_type(rng))
                if type_equal(nxt, acc):
                    break
                acc = nxt
                steps += 1
                assert steps <= bound
