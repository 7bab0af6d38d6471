"""Term algebra: values, stores, expressions, predicates, updates, processes,
components, collectives and system states.

All terms are immutable, hashable and admit a deterministic total order via
:func:`term_key`, which makes canonical forms (sorted multisets for parallel
composition) well defined and lets weighted functions use terms as keys.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple, Union

from .errors import ModelError

# ---------------------------------------------------------------------------
# Values


class Unit:
    """The unit value (a single, shared instance: UNIT)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "unit"

    def __reduce__(self):
        return (Unit, ())


UNIT = Unit()


@dataclass(frozen=True, order=True)
class Symbol:
    """Symbolic identifier value (e.g. zone names), distinct from strings."""

    name: str

    def __repr__(self):
        return f"'{self.name}'"


#: A basic value: integer, real, boolean, unit, symbol or tuple of values.
Value = Union[bool, int, float, Unit, Symbol, Tuple["Value", ...]]


def value_key(v: Value):
    """Total-order sort key over values, grouping by kind first."""
    if isinstance(v, bool):
        return ("bool", v)
    if isinstance(v, (int, float)):
        return ("num", v)
    if isinstance(v, Unit):
        return ("unit",)
    if isinstance(v, Symbol):
        return ("sym", v.name)
    if isinstance(v, tuple):
        return ("tuple", len(v)) + tuple(value_key(x) for x in v)
    raise TypeError(f"not a value: {v!r}")


def format_value(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (int, Symbol, Unit)):
        return repr(v)
    if isinstance(v, tuple):
        return "(" + ", ".join(format_value(x) for x in v) + ")"
    raise TypeError(f"not a value: {v!r}")


# ---------------------------------------------------------------------------
# Stores


@dataclass(frozen=True)
class Store:
    """Finite map from attribute names to values, kept sorted by name."""

    bindings: Tuple[Tuple[str, Value], ...] = ()

    @staticmethod
    def of(mapping=None, **kwargs) -> "Store":
        items = dict(mapping or {})
        items.update(kwargs)
        for name in items:
            if name == "this":
                raise ModelError("'this' is reserved and cannot be an attribute name")
        return Store(tuple(sorted(items.items())))

    def get(self, name: str) -> Optional[Value]:
        for k, v in self.bindings:
            if k == name:
                return v
        return None

    def __contains__(self, name: str) -> bool:
        return any(k == name for k, _ in self.bindings)

    def as_dict(self) -> dict:
        return dict(self.bindings)

    def updated(self, changes) -> "Store":
        items = dict(self.bindings)
        items.update(changes)
        return Store(tuple(sorted(items.items())))

    def __repr__(self):
        inner = ", ".join(f"{k}={format_value(v)}" for k, v in self.bindings)
        return "{" + inner + "}"


EMPTY_STORE = Store()


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class Const:
    value: Value


@dataclass(frozen=True)
class Name:
    """Bare identifier: a bound variable or a local attribute reference."""

    ident: str


@dataclass(frozen=True)
class SelfAttr:
    """Attribute reference prefixed by `this.` (sender-side scope)."""

    attr: str


@dataclass(frozen=True)
class EnvRef:
    """Qualified attribute reference used in environment rules."""

    scope: str  # "sender" | "receiver" | "global"
    attr: str


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * / %
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class UnOp:
    op: str  # -
    operand: "Expression"


@dataclass(frozen=True)
class Call:
    """Built-in function call (abs, min, max)."""

    fn: str
    args: Tuple["Expression", ...]


@dataclass(frozen=True)
class CountExpr:
    """count(pi): number of components whose store satisfies pi.

    Only meaningful inside environment rule expressions.
    """

    predicate: "Predicate"


Expression = Union[Const, Name, SelfAttr, EnvRef, BinOp, UnOp, Call, CountExpr]


# ---------------------------------------------------------------------------
# Predicates


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Bottom:
    pass


TOP = Top()
BOTTOM = Bottom()


@dataclass(frozen=True)
class Cmp:
    op: str  # == != < <= > >=
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Not:
    operand: "Predicate"


@dataclass(frozen=True)
class And:
    left: "Predicate"
    right: "Predicate"


@dataclass(frozen=True)
class Or:
    left: "Predicate"
    right: "Predicate"


Predicate = Union[Top, Bottom, Cmp, Not, And, Or]


# ---------------------------------------------------------------------------
# Updates


@dataclass(frozen=True)
class UniformChoice:
    """Right-hand side drawing uniformly from a list of expressions."""

    options: Tuple[Expression, ...]


@dataclass(frozen=True)
class UpdateBranch:
    weight: float
    assignments: Tuple[Tuple[str, Expression], ...]


@dataclass(frozen=True)
class Update:
    """Finite probabilistic store update: weighted branches of assignments.

    Branch weights must sum to 1 (within 1e-9); `make_update` normalises.
    """

    branches: Tuple[UpdateBranch, ...]

    def is_identity(self) -> bool:
        return all(not b.assignments for b in self.branches)


IDENTITY_UPDATE = Update((UpdateBranch(1.0, ()),))

WEIGHT_TOL = 1e-9


def make_update(assignments, branches=None) -> Update:
    """Build an update from plain assignments, expanding uniform choices.

    `assignments` is a sequence of (attr, Expression | UniformChoice); a
    uniform choice over k options multiplies the branch list by k equal
    weights.  `branches` may instead give explicit (weight, assignments)
    pairs.
    """
    if branches is not None:
        total = sum(w for w, _ in branches)
        if total <= 0:
            raise ModelError("update branch weights must sum to a positive value")
        out = tuple(
            UpdateBranch(w / total, tuple(assigns)) for w, assigns in branches
        )
        return Update(out)

    expanded = [(1.0, [])]
    seen = set()
    for attr, rhs in assignments:
        if attr in seen:
            raise ModelError(f"duplicate assignment to attribute '{attr}' in update")
        seen.add(attr)
        if isinstance(rhs, UniformChoice):
            if not rhs.options:
                raise ModelError("uniform choice needs at least one option")
            k = len(rhs.options)
            expanded = [
                (w / k, assigns + [(attr, opt)])
                for w, assigns in expanded
                for opt in rhs.options
            ]
        else:
            expanded = [(w, assigns + [(attr, rhs)]) for w, assigns in expanded]
    return Update(tuple(UpdateBranch(w, tuple(a)) for w, a in expanded))


# ---------------------------------------------------------------------------
# Actions and processes


class ActionKind(enum.Enum):
    BROADCAST_OUT = "broadcast-out"
    BROADCAST_IN = "broadcast-in"
    OUT = "out"
    IN = "in"

    @property
    def is_output(self) -> bool:
        return self in (ActionKind.BROADCAST_OUT, ActionKind.OUT)

    @property
    def is_broadcast(self) -> bool:
        return self in (ActionKind.BROADCAST_OUT, ActionKind.BROADCAST_IN)


@dataclass(frozen=True)
class ActionPrefix:
    kind: ActionKind
    action: str
    predicate: Predicate
    payload: Tuple[Expression, ...] = ()  # outputs: expressions to send
    binders: Tuple[str, ...] = ()  # inputs: variables to bind
    update: Update = IDENTITY_UPDATE

    def __post_init__(self):
        if self.kind.is_output and self.binders:
            raise ModelError("output action cannot bind variables")
        if not self.kind.is_output:
            if self.payload:
                raise ModelError("input action cannot carry payload expressions")
            if len(set(self.binders)) != len(self.binders):
                raise ModelError("input variables must be pairwise distinct")


@dataclass(frozen=True)
class Nil:
    pass


@dataclass(frozen=True)
class Kill:
    pass


NIL = Nil()
KILL = Kill()


@dataclass(frozen=True)
class Prefix:
    action: ActionPrefix
    continuation: "Process"


@dataclass(frozen=True)
class Choice:
    left: "Process"
    right: "Process"


@dataclass(frozen=True)
class Parallel:
    left: "Process"
    right: "Process"


@dataclass(frozen=True)
class Guarded:
    predicate: Predicate
    body: "Process"


@dataclass(frozen=True)
class Ref:
    """Reference to a named process constant (A := P)."""

    name: str


Process = Union[Nil, Kill, Prefix, Choice, Parallel, Guarded, Ref]


# ---------------------------------------------------------------------------
# Components, collectives, systems


@dataclass(frozen=True)
class Inactive:
    """The inactive component 0."""


NULL_COMPONENT = Inactive()


@dataclass(frozen=True)
class Agent:
    """An active component: a process paired with a local store."""

    process: Process
    store: Store


Component = Union[Inactive, Agent]


@dataclass(frozen=True)
class Collective:
    """Canonical parallel composition: sorted multiset of active components.

    Inactive components are dropped (0 is a unit for parallel composition
    here; see the decisions ledger for the rationale).
    """

    components: Tuple[Agent, ...] = ()

    @staticmethod
    def of(comps: Iterable[Component]) -> "Collective":
        active = [c for c in comps if not isinstance(c, Inactive)]
        return Collective(tuple(sorted(active, key=term_key)))

    def parallel(self, other: "Collective") -> "Collective":
        return Collective.of(self.components + other.components)

    def __len__(self):
        return len(self.components)


EMPTY_COLLECTIVE = Collective()


@dataclass(frozen=True)
class SystemState:
    """A collective together with the global store; the environment rules are
    carried alongside but do not take part in equality/hashing (they are
    fixed per model)."""

    collective: Collective
    global_store: Store
    environment: object = field(compare=False, default=None)


# ---------------------------------------------------------------------------
# Canonical ordering and canonicalisation


def term_key(t):
    """Deterministic total-order key over terms (and nested plain data)."""
    if isinstance(t, bool):
        return ("b", t)
    if isinstance(t, (int, float)):
        return ("f", t)
    if isinstance(t, str):
        return ("s", t)
    if isinstance(t, enum.Enum):
        return ("e", t.value)
    if isinstance(t, tuple):
        return ("t", len(t)) + tuple(term_key(x) for x in t)
    if isinstance(t, Unit):
        return ("unit",)
    if dataclasses.is_dataclass(t):
        parts = [type(t).__name__]
        for f in dataclasses.fields(t):
            if not f.compare:
                continue
            parts.append(term_key(getattr(t, f.name)))
        return tuple(parts)
    raise TypeError(f"cannot order term: {t!r}")


def flatten_parallel(p: Process) -> list:
    """Top-level parallel operands of a process, left to right."""
    if isinstance(p, Parallel):
        return flatten_parallel(p.left) + flatten_parallel(p.right)
    return [p]


def parallel_of(parts) -> Process:
    """Left-associated parallel composition of a non-empty part list."""
    out = parts[0]
    for p in parts[1:]:
        out = Parallel(out, p)
    return out


def canonical_process(p: Process) -> Process:
    """Sort the top-level parallel multiset; leave other structure intact.

    Choice operand order is preserved (the refusal combinator for + keys on
    the syntactic shape of the choice).
    """
    parts = flatten_parallel(p)
    if len(parts) == 1:
        return p
    return parallel_of(sorted(parts, key=term_key))


def make_component(process: Process, store: Store) -> Agent:
    return Agent(canonical_process(process), store)


def canonicalize(term):
    """Canonical form of a process, component or collective (idempotent)."""
    if isinstance(term, Collective):
        return Collective.of(
            canonicalize(c) for c in term.components
        )
    if isinstance(term, Inactive):
        return term
    if isinstance(term, Agent):
        return make_component(term.process, term.store)
    return canonical_process(term)


def process_has_toplevel_kill(p: Process) -> bool:
    """True when `kill` is a member of the flattened top-level parallel."""
    return any(isinstance(q, Kill) for q in flatten_parallel(p))
