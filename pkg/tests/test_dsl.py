"""Concrete syntax: parsing, printing, and parse-print round trips."""

import pathlib
import random

import pytest

from carma.dsl import format_model, format_process, parse_model
from carma.errors import ParseError
from carma.terms import (
    ActionKind,
    BinOp,
    Choice,
    Cmp,
    Const,
    Guarded,
    KILL,
    Name,
    NIL,
    Parallel,
    Prefix,
    Ref,
    SelfAttr,
    Store,
    Symbol,
    TOP,
    BOTTOM,
)

from genmodels import rt_process

MODELS = pathlib.Path(__file__).resolve().parent.parent / "models"


def parse_body(text):
    """Parse a process in isolation (A/B/Sys are dummy targets for refs)."""
    model = parse_model(f"A := nil; B := nil; Sys := nil; X := {text};")
    return model.definitions["X"]


def test_nil_and_kill():
    assert parse_body("nil") == NIL
    p = parse_body("a[true]<>.kill")
    assert p.continuation == KILL


def test_output_prefix():
    p = parse_body("send*[x > 1]<x + 1, 'tag'>.A")
    a = p.action
    assert a.kind == ActionKind.BROADCAST_OUT
    assert a.action == "send"
    assert a.predicate == Cmp(">", Name("x"), Const(1))
    assert a.payload == (BinOp("+", Name("x"), Const(1)), Const(Symbol("tag")))
    assert p.continuation == Ref("A")


def test_input_prefix_with_update():
    p = parse_body("recv(p, q){x := p}.nil")
    a = p.action
    assert a.kind == ActionKind.IN
    assert a.binders == ("p", "q")
    assert a.predicate == TOP  # omitted predicate defaults to true
    assert a.update.branches[0].assignments == (("x", Name("p")),)


def test_output_shorthand_without_payload():
    # an action followed by '.' or an update block is an output of arity 0
    p = parse_body("tick*[false].A")
    assert p.action.kind == ActionKind.BROADCAST_OUT
    assert p.action.payload == ()
    q = parse_body("tock{x := 1}.A")
    assert q.action.kind == ActionKind.OUT


def test_operator_precedence():
    p = parse_body("a[true]<>.nil + b[true]<>.nil | c[true]<>.nil")
    assert isinstance(p, Choice)
    assert isinstance(p.right, Parallel)


def test_guard_binds_prefix():
    p = parse_body("[x > 0] a[true]<>.nil + A")
    assert isinstance(p, Choice)
    assert isinstance(p.left, Guarded)
    assert p.right == Ref("A")


def test_this_references():
    p = parse_body("a[zone == this.zone]<>.nil")
    assert p.action.predicate == Cmp("==", Name("zone"), SelfAttr("zone"))


def test_uniform_choice_sugar():
    p = parse_body("a[true]{x := U(1, 2)}.nil")
    branches = p.action.update.branches
    assert [b.weight for b in branches] == [0.5, 0.5]


def test_weighted_update_branches():
    p = parse_body("a[true]{0.25 :: x := 1; 0.75 :: x := 2}.nil")
    weights = [b.weight for b in p.action.update.branches]
    assert weights == [0.25, 0.75]


def test_comments_and_whitespace():
    model = parse_model("# heading\nA := nil; # trailing\n")
    assert model.definitions["A"] == NIL


def test_parse_errors_carry_positions():
    with pytest.raises(ParseError) as err:
        parse_model("A := nil\nB := nil;")
    assert "2:1" in str(err.value)
    with pytest.raises(ParseError):
        parse_model("A := a[true<>.nil;")


def test_undefined_constant_rejected():
    with pytest.raises(Exception) as err:
        parse_model("A := B;")
    assert "B" in str(err.value)


def test_duplicate_definition_rejected():
    with pytest.raises(ParseError):
        parse_model("A := nil; A := nil;")


def test_kill_outside_prefix_rejected():
    with pytest.raises(Exception) as err:
        parse_model("A := kill;")
    assert "kill" in str(err.value)


def test_component_and_system():
    model = parse_model("""
        A := nil;
        component C { store { x = 1, zone = 'u' } behaviour A }
        system { C; C { x = 5 } * 2; }
    """)
    assert model.components["C"].store == Store.of(x=1, zone=Symbol("u"))
    state = model.initial_state()
    assert len(state.collective) == 3
    assert sum(1 for c in state.collective.components
               if c.store.get("x") == 5) == 2


def test_environment_block():
    model = parse_model("""
        A := nil;
        component C { store { x = 0 } behaviour A }
        system { C; }
        env {
          global { total = 0 }
          rate a* = 2.0;
          rate b [sender.x > 0] = 0.5;
          prob b = 0.25;
          update b = { global.total := global.total + 1 } install C;
        }
    """)
    env = model.environment
    assert env.global_store == Store.of(total=0)
    assert env.rate_rules[0].pattern.name == "a"
    assert env.rate_rules[0].pattern.broadcast
    assert env.rate_rules[1].guard is not None
    assert env.prob_rules[0].value == Const(0.25)
    assert len(env.update_rules[0].install) == 1


def test_measure_declaration():
    model = parse_model("""
        A := nil;
        component C { store { x = 0 } behaviour A }
        system { C; }
        measure m = avg[x > 0](x) @ [0 : 10 : 11];
    """)
    m = model.measures[0]
    assert m.kind == "avg" and m.attribute == "x"
    assert m.grid.times()[:3] == [0.0, 1.0, 2.0]


def test_shipped_models_round_trip():
    for path in sorted(MODELS.glob("*.carma")):
        source = path.read_text()
        model = parse_model(source)
        reparsed = parse_model(format_model(model))
        assert reparsed == model, f"round trip failed for {path.name}"


def test_generated_terms_round_trip():
    rng = random.Random(2024)
    for _ in range(300):
        p = rt_process(rng)
        assert parse_body(format_process(p)) == p
