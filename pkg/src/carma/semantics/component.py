"""Component-level transition derivation.

Given a component and an evaluation context this module produces, per
transition label, the weighted function over successor components: output
derivations (with their generated labels), broadcast/unicast input
responses, and broadcast refusal weights.

Derivation is driven by syntactically enabled outputs only: the label
alphabet is infinite, but labels not generated by some output prefix can
never contribute a system-level transition.  Refusal derivatives never move
a component to a different term (refusing a broadcast preserves choices,
guards and parallel structure unchanged), so the refusal function is
represented by its weight alone.
"""

from __future__ import annotations

from typing import Dict, List, Tuple

from ..errors import ModelError
from ..evaluator import (
    EvalScope,
    apply_update,
    close_predicate,
    eval_expr,
    satisfies,
    substitute,
    substitute_pred,
    substitute_update,
)
from ..terms import (
    ActionKind,
    Agent,
    Choice,
    Component,
    Guarded,
    Inactive,
    Kill,
    Nil,
    NULL_COMPONENT,
    Parallel,
    Prefix,
    Process,
    Ref,
    Store,
    make_component,
    process_has_toplevel_kill,
)
from ..weighted import EMPTY, WeightedFunction, point
from .labels import Action, EvaluationContext, Label, LabelKind

_MAX_UNFOLD = 1000


def lift_continuation(process: Process, store_dist) -> WeightedFunction:
    """Distribution over components after an action: all mass goes to the
    inactive component when `kill` sits at the top level of the
    continuation, otherwise the store distribution is paired with the
    continuation process."""
    if process_has_toplevel_kill(process):
        return point(NULL_COMPONENT, 1.0)
    return WeightedFunction(
        {make_component(process, store): pr for store, pr in store_dist.items()}
    )


def _attach_parallel(wf: WeightedFunction, side_process: Process, left: bool):
    """Wrap every component of `wf` with the untouched sibling process
    (the C|Q construction); the inactive component absorbs the sibling."""

    def wrap(comp: Component) -> Component:
        if isinstance(comp, Inactive):
            return comp
        if left:
            return make_component(Parallel(comp.process, side_process), comp.store)
        return make_component(Parallel(side_process, comp.process), comp.store)

    return wf.map_terms(wrap)


def _self_scope(store: Store) -> EvalScope:
    # Inside guards, payloads and updates `this.a` means the component's own
    # attribute, same as a bare reference.
    return EvalScope(local=store, sender=store)


class _Deriver:
    """One derivation pass over a component, with constant unfolding."""

    def __init__(self, defs, eps: EvaluationContext):
        self.defs = defs or {}
        self.eps = eps
        self._unfolds = 0

    def _resolve(self, name: str) -> Process:
        try:
            body = self.defs[name]
        except KeyError:
            raise ModelError(f"undefined process constant '{name}'")
        self._unfolds += 1
        if self._unfolds > _MAX_UNFOLD:
            raise ModelError(
                f"unguarded recursion while unfolding process constant '{name}'"
            )
        return body

    # -- outputs -----------------------------------------------------------

    def outputs(self, process: Process, store: Store) -> Dict[Label, WeightedFunction]:
        if isinstance(process, (Nil, Kill)):
            return {}
        if isinstance(process, Prefix):
            act = process.action
            if not act.kind.is_output:
                return {}
            scope = _self_scope(store)
            closed = close_predicate(act.predicate, store)
            values = tuple(eval_expr(e, scope) for e in act.payload)
            broadcast = act.kind is ActionKind.BROADCAST_OUT
            rate = self.eps.action_rate(store, Action(act.action, broadcast))
            if rate < 0:
                raise ModelError(
                    f"environment returned negative rate {rate} for '{act.action}'"
                )
            if rate == 0:
                return {}
            kind = LabelKind.BROADCAST_OUT if broadcast else LabelKind.OUT
            label = Label(kind, act.action, closed, values, store)
            dist = apply_update(act.update, store, scope)
            return {label: lift_continuation(process.continuation, dist).scale(rate)}
        if isinstance(process, Choice):
            out = self.outputs(process.left, store)
            for label, wf in self.outputs(process.right, store).items():
                out[label] = out.get(label, EMPTY).add(wf)
            return out
        if isinstance(process, Parallel):
            out = {}
            for label, wf in self.outputs(process.left, store).items():
                out[label] = _attach_parallel(wf, process.right, left=True)
            for label, wf in self.outputs(process.right, store).items():
                wrapped = _attach_parallel(wf, process.left, left=False)
                out[label] = out.get(label, EMPTY).add(wrapped)
            return out
        if isinstance(process, Guarded):
            if satisfies(store, process.predicate):
                return self.outputs(process.body, store)
            return {}
        if isinstance(process, Ref):
            return self.outputs(self._resolve(process.name), store)
        raise ModelError(f"cannot derive outputs of {process!r}")

    # -- broadcast input and refusal --------------------------------------

    def broadcast_input(
        self, process: Process, store: Store, label: Label
    ) -> WeightedFunction:
        if isinstance(process, (Nil, Kill)):
            return EMPTY
        if isinstance(process, Prefix):
            act = process.action
            if act.kind is not ActionKind.BROADCAST_IN or act.action != label.action:
                return EMPTY
            return self._receive(process, store, label, broadcast=True)
        if isinstance(process, Choice):
            return self.broadcast_input(process.left, store, label).add(
                self.broadcast_input(process.right, store, label)
            )
        if isinstance(process, Parallel):
            left = _attach_parallel(
                self.broadcast_input(process.left, store, label),
                process.right,
                left=True,
            )
            right = _attach_parallel(
                self.broadcast_input(process.right, store, label),
                process.left,
                left=False,
            )
            return left.add(right)
        if isinstance(process, Guarded):
            if satisfies(store, process.predicate):
                return self.broadcast_input(process.body, store, label)
            return EMPTY
        if isinstance(process, Ref):
            return self.broadcast_input(self._resolve(process.name), store, label)
        raise ModelError(f"cannot derive broadcast input of {process!r}")

    def refusal_weight(self, process: Process, store: Store, label: Label) -> float:
        if isinstance(process, (Nil, Kill)):
            return 1.0
        if isinstance(process, Prefix):
            act = process.action
            if act.kind is not ActionKind.BROADCAST_IN or act.action != label.action:
                return 1.0
            match = self._input_match(act, store, label)
            if match is None:
                return 1.0
            return 1.0 - match
        if isinstance(process, Choice):
            return self.refusal_weight(
                process.left, store, label
            ) * self.refusal_weight(process.right, store, label)
        if isinstance(process, Parallel):
            return self.refusal_weight(
                process.left, store, label
            ) * self.refusal_weight(process.right, store, label)
        if isinstance(process, Guarded):
            if satisfies(store, process.predicate):
                return self.refusal_weight(process.body, store, label)
            return 1.0
        if isinstance(process, Ref):
            return self.refusal_weight(self._resolve(process.name), store, label)
        raise ModelError(f"cannot derive refusal of {process!r}")

    def refusal_target(self, process: Process, store: Store, label: Label) -> Process:
        """Shape of the term left behind by a refusal.  Dynamic operators
        (choice, guard) survive, but constants are resolved on the way, so
        a refusing `A` steps to the body of `A` with its outermost
        constants unfolded."""
        if isinstance(process, (Nil, Kill, Prefix)):
            return process
        if isinstance(process, Choice):
            return Choice(
                self.refusal_target(process.left, store, label),
                self.refusal_target(process.right, store, label),
            )
        if isinstance(process, Parallel):
            return Parallel(
                self.refusal_target(process.left, store, label),
                self.refusal_target(process.right, store, label),
            )
        if isinstance(process, Guarded):
            if satisfies(store, process.predicate):
                return Guarded(
                    process.predicate,
                    self.refusal_target(process.body, store, label),
                )
            return process
        if isinstance(process, Ref):
            return self.refusal_target(self._resolve(process.name), store, label)
        raise ModelError(f"cannot derive refusal of {process!r}")

    # -- unicast input -----------------------------------------------------

    def unicast_input(
        self, process: Process, store: Store, label: Label
    ) -> WeightedFunction:
        if isinstance(process, (Nil, Kill)):
            return EMPTY
        if isinstance(process, Prefix):
            act = process.action
            if act.kind is not ActionKind.IN or act.action != label.action:
                return EMPTY
            return self._receive(process, store, label, broadcast=False)
        if isinstance(process, Choice):
            return self.unicast_input(process.left, store, label).add(
                self.unicast_input(process.right, store, label)
            )
        if isinstance(process, Parallel):
            left = _attach_parallel(
                self.unicast_input(process.left, store, label),
                process.right,
                left=True,
            )
            right = _attach_parallel(
                self.unicast_input(process.right, store, label),
                process.left,
                left=False,
            )
            return left.add(right)
        if isinstance(process, Guarded):
            if satisfies(store, process.predicate):
                return self.unicast_input(process.body, store, label)
            return EMPTY
        if isinstance(process, Ref):
            return self.unicast_input(self._resolve(process.name), store, label)
        raise ModelError(f"cannot derive unicast input of {process!r}")

    # -- shared input machinery -------------------------------------------

    def _input_match(self, act, store: Store, label: Label):
        """Receive probability when the input prefix matches the label and
        both side predicates hold; None otherwise."""
        if len(act.binders) != len(label.values):
            return None
        own_pred = substitute_pred(act.predicate, act.binders, label.values)
        own_closed = close_predicate(own_pred, store)
        if not satisfies(label.store, own_closed):
            return None
        if not satisfies(store, label.predicate):
            return None
        prob = self.eps.receive_prob(
            label.store, store, Action(act.action, label.is_broadcast)
        )
        if prob < 0 or prob > 1:
            raise ModelError(
                f"environment returned probability {prob} for '{act.action}'"
            )
        return prob

    def _receive(self, process: Prefix, store: Store, label: Label, broadcast: bool):
        act = process.action
        prob = self._input_match(act, store, label)
        if prob is None or prob == 0:
            return EMPTY
        continuation = substitute(process.continuation, act.binders, label.values)
        update = substitute_update(act.update, act.binders, label.values)
        scope = EvalScope(local=store, sender=label.store)
        dist = apply_update(update, store, scope)
        return lift_continuation(continuation, dist).scale(prob)


# ---------------------------------------------------------------------------
# Public component-level API


def component_outputs(
    component: Component, defs, eps: EvaluationContext
) -> List[Tuple[Label, WeightedFunction]]:
    """All output transitions of a component: one (label, function) pair per
    generated label, sorted deterministically."""
    if isinstance(component, Inactive):
        return []
    deriver = _Deriver(defs, eps)
    out = deriver.outputs(component.process, component.store)
    from ..terms import term_key

    return sorted(out.items(), key=lambda kv: term_key(kv[0]))


def component_broadcast_input(
    component: Component, label: Label, defs, eps: EvaluationContext
) -> WeightedFunction:
    """Response of a component to a broadcast output label (may be
    sub-stochastic; the missing mass is the refusal weight)."""
    if isinstance(component, Inactive):
        return EMPTY
    return _Deriver(defs, eps).broadcast_input(
        component.process, component.store, label
    )


def component_refusal(
    component: Component, label: Label, defs, eps: EvaluationContext
) -> WeightedFunction:
    """Refusal of a broadcast: a point mass on the component with its store
    untouched and its outermost constants resolved."""
    if isinstance(component, Inactive):
        return EMPTY
    deriver = _Deriver(defs, eps)
    w = deriver.refusal_weight(component.process, component.store, label)
    if w == 0:
        return EMPTY
    target = deriver.refusal_target(component.process, component.store, label)
    return point(make_component(target, component.store), w)


def component_refusal_weight(
    component: Component, label: Label, defs, eps: EvaluationContext
) -> float:
    if isinstance(component, Inactive):
        return 0.0
    return _Deriver(defs, eps).refusal_weight(component.process, component.store, label)


def component_unicast_input(
    component: Component, label: Label, defs, eps: EvaluationContext
) -> WeightedFunction:
    if isinstance(component, Inactive):
        return EMPTY
    return _Deriver(defs, eps).unicast_input(component.process, component.store, label)
