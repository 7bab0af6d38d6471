"""Model container: constant definitions, component templates, the system
composition, the environment and the measures, plus load-time validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from .environment import DEFAULT_ENVIRONMENT, EnvironmentDefinition
from .errors import ModelError
from .terms import (
    Choice,
    Collective,
    Guarded,
    Kill,
    Nil,
    Parallel,
    Predicate,
    Prefix,
    Process,
    Ref,
    Store,
    SystemState,
    TOP,
    make_component,
)

MEASURE_KINDS = ("count", "min", "max", "sum", "avg")


@dataclass(frozen=True)
class MeasureGrid:
    start: float
    end: float
    points: int

    def __post_init__(self):
        if self.points < 2:
            raise ModelError("measure grid needs at least 2 points")
        if not self.end > self.start:
            raise ModelError("measure grid end must exceed its start")

    def times(self):
        step = (self.end - self.start) / (self.points - 1)
        return [self.start + i * step for i in range(self.points)]


@dataclass(frozen=True)
class Measure:
    """A component aggregate sampled on a time grid."""

    name: str
    kind: str  # count | min | max | sum | avg
    predicate: Predicate = TOP
    attribute: Optional[str] = None
    grid: MeasureGrid = MeasureGrid(0.0, 100.0, 101)

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise ModelError(f"unknown measure kind '{self.kind}'")
        if self.kind != "count" and self.attribute is None:
            raise ModelError(
                f"measure '{self.name}' of kind '{self.kind}' needs an attribute"
            )


@dataclass(frozen=True)
class ComponentDef:
    name: str
    store: Store
    behaviour: Process


@dataclass(frozen=True)
class Instance:
    component: str
    overrides: Store = Store()
    count: int = 1


@dataclass
class Model:
    definitions: Dict[str, Process] = field(default_factory=dict)
    components: Dict[str, ComponentDef] = field(default_factory=dict)
    system: Tuple[Instance, ...] = ()
    environment: EnvironmentDefinition = DEFAULT_ENVIRONMENT
    measures: Tuple[Measure, ...] = ()

    def initial_state(self) -> SystemState:
        comps = []
        for inst in self.system:
            cdef = self.components.get(inst.component)
            if cdef is None:
                raise ModelError(f"undeclared component '{inst.component}' in system")
            store = cdef.store.updated(dict(inst.overrides.bindings))
            comps.extend(
                make_component(cdef.behaviour, store) for _ in range(inst.count)
            )
        return SystemState(Collective.of(comps), self.environment.global_store,
                           self.environment)

    def validate(self) -> None:
        for name, body in self.definitions.items():
            _check_kill_guarded(body, self.definitions, f"constant '{name}'")
            _check_refs(body, self.definitions, f"constant '{name}'")
        for cdef in self.components.values():
            _check_kill_guarded(
                cdef.behaviour, self.definitions, f"component '{cdef.name}'"
            )
            _check_refs(cdef.behaviour, self.definitions, f"component '{cdef.name}'")
        for inst in self.system:
            if inst.component not in self.components:
                raise ModelError(f"undeclared component '{inst.component}' in system")
            if inst.count < 1:
                raise ModelError(
                    f"instance multiplicity must be positive for '{inst.component}'"
                )
        seen = set()
        for m in self.measures:
            if m.name in seen:
                raise ModelError(f"duplicate measure '{m.name}'")
            seen.add(m.name)


def _check_kill_guarded(p: Process, defs, where: str) -> None:
    """`kill` must only occur under an action prefix."""
    if isinstance(p, Kill):
        raise ModelError(f"kill outside the scope of an action prefix in {where}")
    if isinstance(p, (Choice, Parallel)):
        _check_kill_guarded(p.left, defs, where)
        _check_kill_guarded(p.right, defs, where)
    elif isinstance(p, Guarded):
        _check_kill_guarded(p.body, defs, where)
    # Prefix continuations may contain kill (that is the point); nothing to
    # check below a prefix.


def _check_refs(p: Process, defs, where: str) -> None:
    if isinstance(p, Ref):
        if p.name not in defs:
            raise ModelError(f"undefined process constant '{p.name}' in {where}")
    elif isinstance(p, (Choice, Parallel)):
        _check_refs(p.left, defs, where)
        _check_refs(p.right, defs, where)
    elif isinstance(p, Guarded):
        _check_refs(p.body, defs, where)
    elif isinstance(p, Prefix):
        _check_refs(p.continuation, defs, where)
    elif isinstance(p, (Nil, Kill)):
        pass
