"""Environment definitions: global store plus declarative rule lists that
realise the evolution rule.

Rate, probability and update rules are matched first-to-last against the
acting action; unmatched actions fall back to rate 1, probability 1 and the
identity update with nothing installed.  Rule expressions may reference
`sender.a`, `receiver.a`, `global.a` and `count(pi)` (the number of
components whose store satisfies `pi`)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from .errors import ModelError
from .evaluator import EvalScope, eval_expr, eval_pred, satisfies
from .terms import (
    BinOp,
    Call,
    Cmp,
    Collective,
    CountExpr,
    EMPTY_COLLECTIVE,
    EnvRef,
    Expression,
    IDENTITY_UPDATE,
    Not,
    And,
    Or,
    Predicate,
    Process,
    Store,
    UnOp,
    Update,
    make_component,
)
from .semantics.labels import Action, EvaluationContext


@dataclass(frozen=True)
class ActionPattern:
    """Matches an action type, distinguishing broadcast-marked actions."""

    name: str
    broadcast: bool

    def matches(self, action: Action) -> bool:
        return self.name == action.name and self.broadcast == action.broadcast

    def __repr__(self):
        return self.name + ("*" if self.broadcast else "")


@dataclass(frozen=True)
class RateRule:
    pattern: ActionPattern
    guard: Optional[Predicate]  # over sender./global./count
    value: Expression


@dataclass(frozen=True)
class ProbRule:
    pattern: ActionPattern
    guard: Optional[Predicate]  # over sender./receiver./global./count
    value: Expression


@dataclass(frozen=True)
class InstallTemplate:
    """Collective template instantiated when an update rule fires; store
    expressions are evaluated under the global store."""

    process: Process
    store_exprs: Tuple[Tuple[str, Expression], ...]
    count: int = 1


@dataclass(frozen=True)
class UpdateRule:
    pattern: ActionPattern
    update: Update  # assignments target global attributes
    install: Tuple[InstallTemplate, ...] = ()


@dataclass(frozen=True)
class EnvironmentDefinition:
    global_store: Store = Store()
    rate_rules: Tuple[RateRule, ...] = ()
    prob_rules: Tuple[ProbRule, ...] = ()
    update_rules: Tuple[UpdateRule, ...] = ()


DEFAULT_ENVIRONMENT = EnvironmentDefinition()


def _expr_reads_state(e) -> bool:
    """True when an expression depends on the collective (component counts).
    Global-store reads are fine in a rule set without update rules: the
    store can never change along a run."""
    if isinstance(e, CountExpr):
        return True
    if isinstance(e, BinOp):
        return _expr_reads_state(e.left) or _expr_reads_state(e.right)
    if isinstance(e, UnOp):
        return _expr_reads_state(e.operand)
    if isinstance(e, Call):
        return any(_expr_reads_state(a) for a in e.args)
    if isinstance(e, Cmp):
        return _expr_reads_state(e.left) or _expr_reads_state(e.right)
    if isinstance(e, Not):
        return _expr_reads_state(e.operand)
    if isinstance(e, (And, Or)):
        return _expr_reads_state(e.left) or _expr_reads_state(e.right)
    return False


def environment_is_static(env: EnvironmentDefinition) -> bool:
    """True when the evaluation context never changes along a run: no update
    rules, and no rate/probability rule reads the global store or component
    concentrations.  Static environments admit cross-state caching of
    component derivations."""
    if env.update_rules:
        return False
    for rule in env.rate_rules + env.prob_rules:
        if rule.guard is not None and _expr_reads_state(rule.guard):
            return False
        if _expr_reads_state(rule.value):
            return False
    return True


def evaluation_context(
    env: EnvironmentDefinition,
    global_store: Store,
    collective: Collective,
    defs=None,
) -> EvaluationContext:
    """Instantiate the evaluation context for the current state: closures
    evaluating the first matching rule of each family."""

    def scope(sender=None, receiver=None):
        named = {"global": global_store}
        if sender is not None:
            named["sender"] = sender
        if receiver is not None:
            named["receiver"] = receiver
        return EvalScope(
            local=sender, sender=sender, named=named, collective=collective
        )

    def action_rate(sender: Store, action: Action) -> float:
        for rule in env.rate_rules:
            if not rule.pattern.matches(action):
                continue
            sc = scope(sender=sender)
            if rule.guard is not None and not _guard_holds(rule.guard, sc):
                continue
            value = eval_expr(rule.value, sc)
            return _as_rate(value, action)
        return 1.0

    def receive_prob(sender: Store, receiver: Store, action: Action) -> float:
        for rule in env.prob_rules:
            if not rule.pattern.matches(action):
                continue
            sc = scope(sender=sender, receiver=receiver)
            if rule.guard is not None and not _guard_holds(rule.guard, sc):
                continue
            value = eval_expr(rule.value, sc)
            return _as_prob(value, action)
        return 1.0

    def global_update(sender: Store, action: Action):
        for rule in env.update_rules:
            if not rule.pattern.matches(action):
                continue
            installed = _instantiate(rule.install, global_store, sender, collective)
            return rule.update, installed
        return IDENTITY_UPDATE, EMPTY_COLLECTIVE

    return EvaluationContext(
        receive_prob=receive_prob,
        action_rate=action_rate,
        global_update=global_update,
    )


def _guard_holds(guard, sc) -> bool:
    from .errors import UnboundNameError

    try:
        return eval_pred(guard, sc)
    except UnboundNameError:
        return False


def _as_rate(value, action) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelError(f"rate rule for '{action}' produced non-number {value!r}")
    if value < 0:
        raise ModelError(f"rate rule for '{action}' produced negative rate {value}")
    return float(value)


def _as_prob(value, action) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelError(
            f"probability rule for '{action}' produced non-number {value!r}"
        )
    if value < 0 or value > 1:
        raise ModelError(
            f"probability rule for '{action}' produced {value}, outside [0, 1]"
        )
    return float(value)


def _instantiate(templates, global_store, sender, collective) -> Collective:
    comps = []
    sc = EvalScope(
        local=global_store,
        named={"global": global_store, "sender": sender} if sender else {"global": global_store},
        collective=collective,
    )
    for tpl in templates:
        bindings = {name: eval_expr(expr, sc) for name, expr in tpl.store_exprs}
        comp = make_component(tpl.process, Store.of(bindings))
        comps.extend([comp] * tpl.count)
    return Collective.of(comps)


def global_update_scope(
    env_global: Store, sender: Store, collective: Collective
) -> EvalScope:
    """Scope for applying a global-store update after an action."""
    return EvalScope(
        local=env_global,
        sender=sender,
        named={"global": env_global, "sender": sender},
        collective=collective,
    )
