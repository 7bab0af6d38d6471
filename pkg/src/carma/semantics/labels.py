"""Transition labels and the evaluation context supplied by the environment."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Tuple

from ..terms import EMPTY_COLLECTIVE, IDENTITY_UPDATE, Predicate, Store, Value


class LabelKind(enum.Enum):
    BROADCAST_OUT = "b-out"
    BROADCAST_IN = "b-in"
    OUT = "out"
    IN = "in"
    SYNC = "sync"
    REFUSAL = "refusal"


@dataclass(frozen=True)
class Label:
    """Transition label: action type, closed target predicate, transmitted
    values and the store of the originating component."""

    kind: LabelKind
    action: str
    predicate: Predicate  # closed: no `this.` references
    values: Tuple[Value, ...]
    store: Store

    def with_kind(self, kind: LabelKind) -> "Label":
        return Label(kind, self.action, self.predicate, self.values, self.store)

    @property
    def is_broadcast(self) -> bool:
        return self.kind in (
            LabelKind.BROADCAST_OUT,
            LabelKind.BROADCAST_IN,
            LabelKind.REFUSAL,
        )

    def action_name(self) -> str:
        return self.action + ("*" if self.is_broadcast else "")


@dataclass(frozen=True)
class Action:
    """An action type together with its broadcast mark (alpha vs alpha*)."""

    name: str
    broadcast: bool

    def __repr__(self):
        return self.name + ("*" if self.broadcast else "")


@dataclass
class EvaluationContext:
    """The triple of functions the environment supplies per state.

    - receive_prob(sender_store, receiver_store, action) -> [0, 1]
    - action_rate(sender_store, action) -> rate >= 0
    - global_update(sender_store, action) -> (Update, Collective to install)

    The rate function takes the sender store and the action alone: nothing
    else can influence the capacity of an output.
    """

    receive_prob: Callable
    action_rate: Callable
    global_update: Callable


def _default_update(store, action):
    return IDENTITY_UPDATE, EMPTY_COLLECTIVE


DEFAULT_CONTEXT = EvaluationContext(
    receive_prob=lambda sender, receiver, action: 1.0,
    action_rate=lambda sender, action: 1.0,
    global_update=_default_update,
)
