"""System-level transitions and exhaustive state-space exploration.

A system steps only through broadcast outputs and unicast synchronisations.
For each such label the collective-level function is combined with the
environment's global-store update and installed collective, yielding rated
transitions to canonical successor states."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from ..environment import (
    EnvironmentDefinition,
    evaluation_context,
    global_update_scope,
)
from ..evaluator import apply_update
from ..terms import Collective, Store, SystemState, term_key
from ..weighted import WeightedFunction
from .collective import (
    collective_broadcast_output,
    collective_unicast_sync,
    output_labels,
)
from .labels import Action, Label, LabelKind

RATE_TOL = 0.0  # emitted rates are computed products; exact zero cut-off


@dataclass(frozen=True)
class SystemTransition:
    label: Label
    rate: float
    target: SystemState


def system_transitions(state: SystemState, defs=None) -> List[SystemTransition]:
    """All rated transitions out of a state, deterministically ordered."""
    env: EnvironmentDefinition = state.environment
    collective = state.collective
    eps = evaluation_context(env, state.global_store, collective, defs)

    transitions: Dict[Tuple, SystemTransition] = {}
    for label in output_labels(collective, defs, eps):
        if label.kind is LabelKind.BROADCAST_OUT:
            fn = collective_broadcast_output(collective, label, defs, eps)
            step_label = label
            action = Action(label.action, True)
        else:
            step_label = label.with_kind(LabelKind.SYNC)
            fn = collective_unicast_sync(collective, step_label, defs, eps)
            action = Action(label.action, False)
        if fn.is_empty():
            continue
        update, installed = eps.global_update(label.store, action)
        scope = global_update_scope(state.global_store, label.store, collective)
        store_dist = apply_update(update, state.global_store, scope)
        for target_col, w in fn.items():
            merged = target_col.parallel(installed)
            for g_store, q in store_dist.items():
                rate = w * q
                if rate <= RATE_TOL:
                    continue
                target = SystemState(merged, g_store, env)
                key = (term_key(step_label), term_key(target))
                prev = transitions.get(key)
                if prev is not None:
                    rate += prev.rate
                transitions[key] = SystemTransition(step_label, rate, target)

    return [transitions[k] for k in sorted(transitions)]


@dataclass
class CTMC:
    """Explicit action-labelled Markov chain over canonical system states."""

    states: List[SystemState]
    transitions: List[Tuple[int, str, float, int]]  # (src, action, rate, dst)
    truncated: bool = False
    index: Dict = field(default_factory=dict)


def exhaustive_ctmc(initial: SystemState, defs=None, max_states: int = 10000) -> CTMC:
    """Breadth-first closure of the transition relation, capped at
    `max_states` (the cap is reported via the `truncated` flag)."""
    if max_states < 1:
        raise ValueError("max_states must be at least 1")
    states = [initial]
    index = {_state_key(initial): 0}
    edges: List[Tuple[int, str, float, int]] = []
    frontier = deque([0])
    truncated = False
    while frontier:
        src = frontier.popleft()
        for tr in system_transitions(states[src], defs):
            key = _state_key(tr.target)
            dst = index.get(key)
            if dst is None:
                if len(states) >= max_states:
                    truncated = True
                    continue
                dst = len(states)
                index[key] = dst
                states.append(tr.target)
                frontier.append(dst)
            edges.append((src, tr.label.action_name(), tr.rate, dst))
    return CTMC(states=states, transitions=edges, truncated=truncated, index=index)


def _state_key(state: SystemState):
    return term_key((state.collective, state.global_store))


def format_state(state: SystemState) -> str:
    """Deterministic one-line print of a system state."""
    from ..dsl import format_process
    from ..terms import format_value

    comps = " || ".join(
        f"({format_process(c.process)}, {c.store!r})"
        for c in state.collective.components
    )
    if not comps:
        comps = "<empty>"
    return f"{comps} @ global {state.global_store!r}"


def export_ctmc(ctmc: CTMC) -> str:
    """Plain-text export: a state table mapping ids to canonical prints,
    then the rated edge list."""
    lines = ["STATES"]
    for i, st in enumerate(ctmc.states):
        lines.append(f"{i}\t{format_state(st)}")
    if ctmc.truncated:
        lines.append("# exploration truncated at state cap")
    lines.append("TRANSITIONS")
    for src, action, rate, dst in ctmc.transitions:
        lines.append(f"{src}\t{rate!r}\t{action}\t{dst}")
    return "\n".join(lines) + "\n"
