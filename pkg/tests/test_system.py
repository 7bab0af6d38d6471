"""System-level transitions: environment mediation, state-space
exploration and the plain-text CTMC export."""

import pathlib

import pytest

from carma import exhaustive_ctmc, export_ctmc, parse_model, system_transitions

MODELS = pathlib.Path(__file__).resolve().parent.parent / "models"


def load(name):
    return parse_model((MODELS / name).read_text())


def small(source):
    return parse_model(source)


def test_transition_rates_use_environment():
    model = small("""
        A := tick*[false]<>.A;
        component C { store { x = 0 } behaviour A }
        system { C; }
        env { rate tick* = 2.5; }
    """)
    (tr,), = [system_transitions(model.initial_state(), model.definitions)]
    assert tr.rate == pytest.approx(2.5)
    assert tr.label.action_name() == "tick*"


def test_guarded_rate_rules_first_match_wins():
    model = small("""
        A := tick*[false]<>.A;
        component C { store { x = 5 } behaviour A }
        system { C; }
        env {
          rate tick* [sender.x > 3] = 4.0;
          rate tick* = 1.0;
        }
    """)
    (tr,) = system_transitions(model.initial_state(), model.definitions)
    assert tr.rate == pytest.approx(4.0)


def test_broadcast_rate_sums_over_senders():
    model = small("""
        A := tick*[false]<>.nil;
        component C { store { x = 0 } behaviour A }
        system { C * 3; }
        env { rate tick* = 2.0; }
    """)
    trs = system_transitions(model.initial_state(), model.definitions)
    assert sum(t.rate for t in trs) == pytest.approx(6.0)


def test_global_update_rule_rewrites_store():
    model = small("""
        A := tick*[false]<>.nil;
        component C { store { x = 0 } behaviour A }
        system { C; }
        env {
          global { total = 0 }
          update tick* = { total := global.total + 1 };
        }
    """)
    (tr,) = system_transitions(model.initial_state(), model.definitions)
    assert tr.target.global_store.get("total") == 1


def test_install_rule_adds_components():
    model = small("""
        A := spawn*[false]<>.nil;
        B := nil;
        component C { store { x = 0 } behaviour A }
        component Fresh { store { x = 9 } behaviour B }
        system { C; }
        env { update spawn* = {} install Fresh; }
    """)
    (tr,) = system_transitions(model.initial_state(), model.definitions)
    assert len(tr.target.collective) == 2
    assert any(c.store.get("x") == 9 for c in tr.target.collective.components)


def test_kill_removes_component_from_collective():
    model = small("""
        A := die*[false]<>.kill;
        component C { store { x = 0 } behaviour A }
        system { C; }
    """)
    (tr,) = system_transitions(model.initial_state(), model.definitions)
    assert len(tr.target.collective) == 0


def test_transitions_are_deterministically_ordered():
    model = load("tiny.carma")
    state = model.initial_state()
    first = [(t.label, t.rate) for t in system_transitions(state, model.definitions)]
    second = [(t.label, t.rate) for t in system_transitions(state, model.definitions)]
    assert first == second


def test_tiny_model_state_space():
    model = load("tiny.carma")
    ctmc = exhaustive_ctmc(model.initial_state(), model.definitions)
    assert not ctmc.truncated
    assert len(ctmc.states) == 6
    # rates out of every state are positive and finite
    for _, _, rate, _ in ctmc.transitions:
        assert 0 < rate < float("inf")
    # the reset broadcast appears with its configured rate
    resets = [t for t in ctmc.transitions if t[1] == "reset*"]
    assert resets and all(r == pytest.approx(0.5) for _, _, r, _ in resets)


def test_exhaustive_ctmc_truncates_at_cap():
    model = load("tiny.carma")
    ctmc = exhaustive_ctmc(model.initial_state(), model.definitions, max_states=2)
    assert ctmc.truncated
    assert len(ctmc.states) == 2


def test_export_format():
    model = load("tiny.carma")
    ctmc = exhaustive_ctmc(model.initial_state(), model.definitions)
    text = export_ctmc(ctmc)
    lines = text.splitlines()
    assert lines[0] == "STATES"
    assert "TRANSITIONS" in lines
    split = lines.index("TRANSITIONS")
    assert len(lines[:split]) == len(ctmc.states) + 1
    for line in lines[split + 1:]:
        src, rate, action, dst = line.split("\t")
        assert int(src) < len(ctmc.states) and int(dst) < len(ctmc.states)
        assert float(rate) > 0
