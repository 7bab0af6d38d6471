"""Stochastic simulation over system states.

A step races the exponential transitions of the current state: with total
exit rate R, the delay is Exponential(R) and the successor is chosen with
probability rate/R.  Every step consumes exactly two uniform draws, delay
first, selection second, so trajectories are reproducible from the seed
alone.  Replications run on independent substreams spawned from a single
`numpy.random.SeedSequence(seed)`; aggregation is a one-pass mean and
variance per measure and grid point, in replication order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import IO, List, Optional, Sequence, Tuple

import numpy as np

from .environment import environment_is_static
from .errors import CarmaError, ModelError
from .evaluator import satisfies
from .fastsim import FastRunner
from .model import Measure, Model
from .semantics.system import system_transitions
from .terms import Inactive, SystemState

log = logging.getLogger("carma.simulator")


def step(state: SystemState, rng, defs=None):
    """One jump from an explicit state: (delay, next state, action name),
    or None when the state is absorbing.  Two rng draws, delay first."""
    u1 = rng.random()
    u2 = rng.random()
    transitions = system_transitions(state, defs)
    total = sum(t.rate for t in transitions)
    if total == 0.0:
        return None
    delay = -math.log1p(-u1) / total
    x = u2 * total
    acc = 0.0
    chosen = transitions[-1]
    for tr in transitions:
        if x < acc + tr.rate:
            chosen = tr
            break
        acc += tr.rate
    return delay, chosen.target, chosen.label.action_name()


class _StateRunner:
    """Fallback stepping that re-derives the transition list every step;
    needed when environment rules rewrite the global store or install
    components."""

    def __init__(self, model: Model):
        self._initial = model.initial_state()
        self.defs = model.definitions
        self.state = self._initial

    def reset(self):
        self.state = self._initial

    def begin_step(self, rng):
        """Draw one jump without applying it: (delay, action, token)."""
        result = step(self.state, rng, self.defs)
        if result is None:
            return None
        delay, target, action = result
        return delay, action, target

    def commit(self, token):
        self.state = token

    def step(self, rng):
        result = self.begin_step(rng)
        if result is None:
            return None
        delay, action, token = result
        self.commit(token)
        return delay, action

    def measure_stores(self):
        return [
            (comp.store, 1)
            for comp in self.state.collective.components
            if not isinstance(comp, Inactive)
        ]


def evaluate_measure(measure: Measure, stores) -> float:
    """Value of one measure over (store, multiplicity) pairs.  Components
    that lack the measured attribute do not contribute."""
    if measure.kind == "count":
        return float(
            sum(n for store, n in stores if satisfies(store, measure.predicate))
        )
    values = []
    for store, n in stores:
        if measure.attribute not in store:
            continue
        if not satisfies(store, measure.predicate):
            continue
        v = store.get(measure.attribute)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ModelError(
                f"measure '{measure.name}' reads non-numeric attribute "
                f"'{measure.attribute}'"
            )
        values.append((float(v), n))
    if measure.kind == "sum":
        return sum(v * n for v, n in values)
    if not values:
        return math.nan
    if measure.kind == "min":
        return min(v for v, _ in values)
    if measure.kind == "max":
        return max(v for v, _ in values)
    total = sum(n for _, n in values)
    return sum(v * n for v, n in values) / total  # avg


@dataclass
class SimulationResult:
    """Aggregated trajectories on the shared sampling grid."""

    times: np.ndarray
    measures: List[str]
    mean: np.ndarray  # (grid points, measures)
    variance: np.ndarray  # sample variance across replications
    replications: int
    raw: Optional[np.ndarray] = None  # (replications, grid points, measures)
    steps: int = 0


def _shared_grid(measures: Sequence[Measure]) -> np.ndarray:
    grids = {m.grid for m in measures}
    if len(grids) != 1:
        raise ModelError(
            "all measures must share one sampling grid: the report has a "
            "single time column"
        )
    return np.asarray(next(iter(grids)).times(), dtype=float)


def simulate(
    model: Model,
    seed: int,
    replications: int = 1,
    stop_time: Optional[float] = None,
    keep_raw: bool = False,
    max_steps: Optional[int] = None,
) -> SimulationResult:
    """Run independent replications and aggregate the measures."""
    if replications < 1:
        raise ModelError("replications must be at least 1")
    if not model.measures:
        raise ModelError("the model declares no measures to sample")
    times = _shared_grid(model.measures)
    horizon = float(times[-1]) if stop_time is None else float(stop_time)
    if horizon <= 0:
        raise ModelError("stop time must be positive")
    times = times[times <= horizon]
    if len(times) == 0:
        raise ModelError("stop time excludes every grid point")

    if environment_is_static(model.environment):
        runner = FastRunner(model)
        log.info("static environment: grouped stepping enabled")
    else:
        runner = _StateRunner(model)
        log.info("dynamic environment: per-step transition enumeration")

    points = len(times)
    names = [m.name for m in model.measures]
    cols = len(names)
    mean = np.zeros((points, cols))
    m2 = np.zeros((points, cols))
    raw = np.zeros((replications, points, cols)) if keep_raw else None
    streams = np.random.SeedSequence(seed).spawn(replications)
    total_steps = 0

    for rep in range(replications):
        rng = np.random.Generator(np.random.PCG64(streams[rep]))
        runner.reset()
        try:
            row, steps = _one_replication(
                runner, model.measures, times, horizon, rng, max_steps
            )
        except CarmaError as exc:
            raise ModelError(f"replication {rep} failed: {exc}") from exc
        total_steps += steps
        if raw is not None:
            raw[rep] = row
        delta = row - mean
        mean += delta / (rep + 1)
        m2 += delta * (row - mean)

    variance = m2 / (replications - 1) if replications > 1 else np.zeros_like(m2)
    return SimulationResult(
        times=times,
        measures=names,
        mean=mean,
        variance=variance,
        replications=replications,
        raw=raw,
        steps=total_steps,
    )


def _one_replication(runner, measures, times, horizon, rng, max_steps):
    points = len(times)
    values = np.empty((points, len(measures)))
    now = 0.0
    idx = 0
    steps = 0
    while idx < points:
        jump = runner.begin_step(rng)
        if jump is None:
            break  # absorbing: the state holds forever
        delay, _action, token = jump
        nxt = now + delay
        if times[idx] < nxt:
            # grid points inside the holding interval see the pre-jump state
            current = [
                evaluate_measure(m, runner.measure_stores()) for m in measures
            ]
            while idx < points and times[idx] < nxt:
                values[idx] = current
                idx += 1
            if idx >= points:
                break
        runner.commit(token)
        now = nxt
        steps += 1
        if now > horizon:
            break
        if max_steps is not None and steps >= max_steps:
            break
    if idx < points:
        current = [evaluate_measure(m, runner.measure_stores()) for m in measures]
        while idx < points:
            values[idx] = current
            idx += 1
    return values, steps


# ---------------------------------------------------------------------------
# Delimited output


def _fmt(x: float) -> str:
    return "%.9g" % x


def write_csv(result: SimulationResult, out: IO[str]):
    """Aggregate report: one row per grid point, 9 significant digits."""
    header = ["time"]
    for name in result.measures:
        header.append(f"{name}_mean")
        header.append(f"{name}_var")
    out.write(",".join(header) + "\n")
    for i, t in enumerate(result.times):
        row = [_fmt(t)]
        for j in range(len(result.measures)):
            row.append(_fmt(result.mean[i, j]))
            row.append(_fmt(result.variance[i, j]))
        out.write(",".join(row) + "\n")


def write_raw_csv(result: SimulationResult, out: IO[str]):
    """Per-replication samples; requires simulate(..., keep_raw=True)."""
    if result.raw is None:
        raise ModelError("raw trajectories were not recorded")
    header = ["replication", "time"] + list(result.measures)
    out.write(",".join(header) + "\n")
    for rep in range(result.replications):
        for i, t in enumerate(result.times):
            row = [str(rep), _fmt(t)]
            row.extend(_fmt(result.raw[rep, i, j]) for j in range(len(result.measures)))
            out.write(",".join(row) + "\n")
