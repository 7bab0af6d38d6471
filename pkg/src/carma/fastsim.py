"""Grouped-state stochastic stepping for static environments.

When the rule set never changes along a run (no update rules, no
component-count reads), per-component derivations can be cached across
steps and identical components can be tracked as one group with a count.
A step then races whole groups instead of materialising every system
transition, selecting the concrete successor by progressively narrowing
a single uniform draw.  The step distribution is exactly the race over
`system_transitions`; the equivalence is covered by tests that expand
the grouped caches back into explicit transition lists.

Components and labels are interned to small integers so the hot loop
hashes ints, not process trees.  Per-label receiver masses are kept
incrementally and refreshed periodically to cancel float drift.
"""

from __future__ import annotations

from bisect import insort
from math import log1p
from typing import Dict, List, Optional, Tuple

from .environment import environment_is_static, evaluation_context
from .errors import ModelError
from .semantics.component import (
    component_broadcast_input,
    component_outputs,
    component_refusal,
    component_unicast_input,
)
from .terms import Collective, Inactive, SystemState, term_key
from .weighted import WeightedFunction

_MASS_EPS = 1e-9  # below this a receiver mass counts as absent
_REFRESH_PERIOD = 4096  # steps between exact mass recomputations


class _Output:
    __slots__ = ("label", "lid", "rate", "outcomes", "broadcast")

    def __init__(self, label, lid, rate, outcomes, broadcast):
        self.label = label
        self.lid = lid
        self.rate = rate
        self.outcomes = outcomes  # [(component id or None, probability)]
        self.broadcast = broadcast


class FastRunner:
    """Simulation state and cached derivations for one model."""

    def __init__(self, model):
        initial = model.initial_state()
        if not environment_is_static(initial.environment):
            raise ModelError("fast stepping requires a static environment")
        self.defs = model.definitions
        self.env = initial.environment
        self.global_store = initial.global_store
        self.eps = evaluation_context(
            self.env, self.global_store, initial.collective, self.defs
        )
        # interning tables
        self._comp_ids: Dict = {}
        self._comps: List = []
        self._sort_keys: List = []
        self._label_ids: Dict = {}
        self._labels: List = []
        self._ulabels: List[int] = []  # unicast label ids seen so far
        # derivation caches, keyed by ints
        self._outputs: Dict[int, List[_Output]] = {}
        self._bin: Dict[Tuple[int, int], List] = {}
        self._uin: Dict[Tuple[int, int], Tuple[float, List]] = {}
        # per component, the unicast labels it responds to with mass > 0
        self._nz: Dict[int, Tuple[List[Tuple[int, float]], int]] = {}

        self._initial: Dict[int, int] = {}
        for comp in initial.collective.components:
            if isinstance(comp, Inactive):
                continue
            cid = self._intern(comp)
            self._initial[cid] = self._initial.get(cid, 0) + 1
        self.reset()

    def reset(self):
        self.groups: Dict[int, int] = dict(self._initial)
        self._order: List[Tuple] = sorted(
            (self._sort_keys[cid], cid) for cid in self.groups
        )
        self._masses: Dict[int, float] = {}
        for lid in self._ulabels:
            self._masses[lid] = self._exact_mass(lid)
        self._steps_since_refresh = 0

    # -- interning ---------------------------------------------------------

    def _intern(self, comp) -> int:
        cid = self._comp_ids.get(comp)
        if cid is None:
            cid = len(self._comps)
            self._comp_ids[comp] = cid
            self._comps.append(comp)
            self._sort_keys.append(term_key(comp))
        return cid

    def _intern_label(self, label) -> int:
        key = term_key(label)
        lid = self._label_ids.get(key)
        if lid is None:
            lid = len(self._labels)
            self._label_ids[key] = lid
            self._labels.append(label)
            if not label.is_broadcast:
                self._ulabels.append(lid)
                self._masses[lid] = self._exact_mass(lid)
        return lid

    # -- cached derivations ------------------------------------------------

    def outputs_of(self, cid: int) -> List[_Output]:
        cached = self._outputs.get(cid)
        if cached is None:
            comp = self._comps[cid]
            cached = []
            for label, wf in component_outputs(comp, self.defs, self.eps):
                rate = wf.total()
                if rate <= 0:
                    continue
                outcomes = [
                    (None if isinstance(c, Inactive) else self._intern(c), w / rate)
                    for c, w in wf.items()
                ]
                cached.append(
                    _Output(
                        label,
                        self._intern_label(label),
                        rate,
                        outcomes,
                        label.is_broadcast,
                    )
                )
            self._outputs[cid] = cached
        return cached

    def bin_response(self, cid: int, lid: int):
        key = (cid, lid)
        cached = self._bin.get(key)
        if cached is None:
            comp = self._comps[cid]
            label = self._labels[lid]
            wf = component_broadcast_input(comp, label, self.defs, self.eps).add(
                component_refusal(comp, label, self.defs, self.eps)
            )
            total = wf.total()
            if total == 0:
                raise ModelError(
                    f"component has no broadcast response for '{label.action}'"
                )
            cached = [
                (None if isinstance(c, Inactive) else self._intern(c), w / total)
                for c, w in wf.items()
            ]
            self._bin[key] = cached
        return cached

    def uin_response(self, cid: int, lid: int):
        key = (cid, lid)
        cached = self._uin.get(key)
        if cached is None:
            comp = self._comps[cid]
            label = self._labels[lid]
            wf = component_unicast_input(comp, label, self.defs, self.eps)
            mass = wf.total()
            outs = [
                (None if isinstance(c, Inactive) else self._intern(c), w)
                for c, w in wf.items()
            ]
            cached = (mass, outs)
            self._uin[key] = cached
        return cached

    # -- receiver masses ---------------------------------------------------

    def _nz_masses(self, cid: int):
        """Unicast labels this component can actually receive, with their
        masses, extended lazily as new labels are interned."""
        lst, upto = self._nz.get(cid, ([], 0))
        total = len(self._ulabels)
        if upto < total:
            for lid in self._ulabels[upto:]:
                m = self.uin_response(cid, lid)[0]
                if m != 0.0:
                    lst.append((lid, m))
            self._nz[cid] = (lst, total)
        return lst

    def _exact_mass(self, lid: int) -> float:
        return sum(
            count * self.uin_response(cid, lid)[0]
            for cid, count in self.groups.items()
        )

    def _shift_group(self, cid: int, delta: int):
        """Adjust one group count, keeping order and masses in sync."""
        if delta == 0:
            return
        old = self.groups.get(cid, 0)
        new = old + delta
        if new < 0:
            raise ModelError("internal accounting error: negative group count")
        if new == 0:
            del self.groups[cid]
            self._order.remove((self._sort_keys[cid], cid))
        else:
            self.groups[cid] = new
            if old == 0:
                insort(self._order, (self._sort_keys[cid], cid))
                self.outputs_of(cid)  # may register new unicast labels
        masses = self._masses
        for lid, m in self._nz_masses(cid):
            masses[lid] += delta * m

    # -- stepping ----------------------------------------------------------

    def total_rate(self) -> float:
        return self._bundles()[0]

    def _bundles(self):
        groups = self.groups
        masses = self._masses
        bundles = []
        total = 0.0
        for _, cid in self._order:
            count = groups[cid]
            for entry in self.outputs_of(cid):
                if not entry.broadcast:
                    own = self.uin_response(cid, entry.lid)[0]
                    if masses[entry.lid] - own <= _MASS_EPS:
                        continue  # no receiver besides the sender itself
                weight = count * entry.rate
                bundles.append((weight, cid, entry))
                total += weight
        return total, bundles

    def begin_step(self, rng):
        """Draw one jump without applying it: (delay, action name, token),
        or None when absorbing.  Exactly two rng draws, delay first."""
        u1 = rng.random()
        u2 = rng.random()
        total, bundles = self._bundles()
        if total == 0.0:
            return None
        delay = -log1p(-u1) / total
        x = u2 * total
        acc = 0.0
        chosen = bundles[-1]
        for bundle in bundles:
            if x < acc + bundle[0]:
                chosen = bundle
                break
            acc += bundle[0]
        weight, sender, entry = chosen
        u = min(max((x - acc) / weight, 0.0), 1.0)
        return delay, entry.label.action_name(), (sender, entry, u)

    def commit(self, token):
        sender, entry, u = token
        if entry.broadcast:
            self._apply_broadcast(sender, entry, u)
        else:
            self._apply_unicast(sender, entry, u)
        self._steps_since_refresh += 1
        if self._steps_since_refresh >= _REFRESH_PERIOD:
            for lid in self._ulabels:
                self._masses[lid] = self._exact_mass(lid)
            self._steps_since_refresh = 0

    def step(self, rng):
        """One jump: returns (delay, action name) or None when absorbing."""
        result = self.begin_step(rng)
        if result is None:
            return None
        delay, action, token = result
        self.commit(token)
        return delay, action

    @staticmethod
    def _pick(outcomes, u):
        """Select from a normalised outcome list, returning the residual
        uniform for subsequent selections."""
        acc = 0.0
        for item, p in outcomes[:-1]:
            if u < acc + p:
                return item, (u - acc) / p if p > 0 else 0.0
            acc += p
        item, p = outcomes[-1]
        return item, min((u - acc) / p, 1.0) if p > 0 else 0.0

    def _apply_broadcast(self, sender: int, entry: _Output, u: float):
        deltas: Dict[Optional[int], int] = {}
        for _, cid in list(self._order):
            count = self.groups[cid] - (1 if cid == sender else 0)
            if count == 0:
                continue
            outs = self.bin_response(cid, entry.lid)
            if len(outs) == 1:
                target = outs[0][0]
                if target == cid:
                    continue  # refused in place, nothing moves
                deltas[cid] = deltas.get(cid, 0) - count
                deltas[target] = deltas.get(target, 0) + count
            else:
                deltas[cid] = deltas.get(cid, 0) - count
                for _ in range(count):
                    target, u = self._pick(outs, u)
                    deltas[target] = deltas.get(target, 0) + 1
        target, u = self._pick(entry.outcomes, u)
        deltas[sender] = deltas.get(sender, 0) - 1
        deltas[target] = deltas.get(target, 0) + 1
        deltas.pop(None, None)
        for cid, delta in deltas.items():
            self._shift_group(cid, delta)

    def _apply_unicast(self, sender: int, entry: _Output, u: float):
        starget, u = self._pick(entry.outcomes, u)
        choices = []
        mass = 0.0
        for _, cid in self._order:
            count = self.groups[cid] - (1 if cid == sender else 0)
            if count == 0:
                continue
            m, outs = self.uin_response(cid, entry.lid)
            if m == 0.0:
                continue
            choices.append((cid, count * m, outs, m))
            mass += count * m
        if not choices:
            raise ModelError(
                f"unicast '{entry.label.action}' selected with no receiver"
            )
        receiver = None
        rtarget = None
        acc = 0.0
        last = choices[-1]
        for choice in choices:
            cid, w, outs, m = choice
            if u < (acc + w) / mass or choice is last:
                receiver = cid
                u = min(max((u - acc / mass) * mass / w, 0.0), 1.0)
                rtarget, u = self._pick([(c, wt / m) for c, wt in outs], u)
                break
            acc += w
        self._shift_group(sender, -1)
        self._shift_group(receiver, -1)
        if starget is not None:
            self._shift_group(starget, 1)
        if rtarget is not None:
            self._shift_group(rtarget, 1)

    # -- observation -------------------------------------------------------

    def measure_stores(self):
        """(store, multiplicity) pairs for measure evaluation."""
        return [
            (self._comps[cid].store, self.groups[cid]) for _, cid in self._order
        ]

    def as_state(self) -> SystemState:
        comps = []
        for cid, count in self.groups.items():
            comps.extend([self._comps[cid]] * count)
        return SystemState(Collective.of(comps), self.global_store, self.env)
