"""Term algebra: stores, updates, canonical forms and ordering."""

import pytest

from carma.errors import ModelError
from carma.terms import (
    ActionKind,
    ActionPrefix,
    Agent,
    Choice,
    Collective,
    Const,
    KILL,
    make_component,
    make_update,
    NIL,
    NULL_COMPONENT,
    Parallel,
    Prefix,
    process_has_toplevel_kill,
    Ref,
    Store,
    Symbol,
    term_key,
    TOP,
    UniformChoice,
    UNIT,
    Unit,
    value_key,
)


def test_store_lookup_and_update():
    s = Store.of(x=1, zone=Symbol("u"))
    assert s.get("x") == 1
    assert "zone" in s and "w" not in s
    assert s.get("w") is None
    t = s.updated({"x": 5, "w": 0})
    assert t.get("x") == 5 and t.get("w") == 0
    assert s.get("x") == 1  # original untouched


def test_store_rejects_this():
    with pytest.raises(ModelError):
        Store.of(this=1)


def test_store_is_order_insensitive():
    assert Store.of(a=1, b=2) == Store.of(b=2, a=1)


def test_unit_is_singleton():
    assert Unit() is UNIT


def test_value_key_orders_across_kinds():
    values = [Symbol("z"), 2, True, UNIT, (1, 2)]
    ordered = sorted(values, key=value_key)
    assert sorted(ordered, key=value_key) == ordered
    assert value_key(1) != value_key(True)


def test_make_update_expands_uniform_choice():
    u = make_update([("x", UniformChoice((Const(0), Const(1)))),
                     ("y", Const(7))])
    assert len(u.branches) == 2
    assert all(abs(b.weight - 0.5) < 1e-12 for b in u.branches)
    assert all(("y", Const(7)) in b.assignments for b in u.branches)


def test_make_update_rejects_duplicate_targets():
    with pytest.raises(ModelError):
        make_update([("x", Const(0)), ("x", Const(1))])


def test_make_update_normalises_branch_weights():
    u = make_update(None, branches=[(2.0, ()), (6.0, ())])
    assert [b.weight for b in u.branches] == [0.25, 0.75]


def test_identity_update_detection():
    assert make_update([]).is_identity()
    assert not make_update([("x", Const(0))]).is_identity()


def _prefix(name="a"):
    return Prefix(
        ActionPrefix(ActionKind.OUT, name, TOP), NIL
    )


def test_canonical_component_sorts_parallel_operands():
    p, q = _prefix("a"), _prefix("b")
    left = make_component(Parallel(p, q), Store())
    right = make_component(Parallel(q, p), Store())
    assert left == right


def test_canonical_form_keeps_choice_order():
    p, q = _prefix("a"), _prefix("b")
    assert make_component(Choice(p, q), Store()) != \
        make_component(Choice(q, p), Store())


def test_collective_drops_inactive_and_sorts():
    a = Agent(NIL, Store.of(x=1))
    b = Agent(NIL, Store.of(x=2))
    c1 = Collective.of([b, NULL_COMPONENT, a])
    c2 = Collective.of([a, b])
    assert c1 == c2
    assert len(c1) == 2


def test_term_key_is_total_on_processes():
    terms = [NIL, KILL, Ref("A"), _prefix(), Parallel(NIL, KILL)]
    keys = [term_key(t) for t in terms]
    assert sorted(keys) == sorted(keys, key=lambda k: k)
    assert len(set(keys)) == len(terms)


def test_toplevel_kill_detection():
    assert process_has_toplevel_kill(Parallel(NIL, KILL))
    assert not process_has_toplevel_kill(Prefix(
        ActionPrefix(ActionKind.OUT, "a", TOP), KILL
    ))


def test_output_prefix_rejects_binders():
    with pytest.raises(ModelError):
        ActionPrefix(ActionKind.OUT, "a", TOP, binders=("x",))
    with pytest.raises(ModelError):
        ActionPrefix(ActionKind.IN, "a", TOP, payload=(Const(1),))
