"""Collective-level transition derivation.

Collectives are canonical sorted multisets of components; the binary
parallel rules are applied over a fixed left-to-right association of that
multiset.  Associativity and permutation invariance of the results is a
tested property, not an assumption.

Where the rules renormalise (broadcast input, unicast synchronisation) a
zero denominator yields the empty function: no input mass means no possible
partner, which operationally is a blocked interaction, never an error.
"""

from __future__ import annotations

from typing import List, Tuple

from ..terms import Agent, Collective, Component, Inactive
from ..weighted import EMPTY, WeightedFunction, point
from .component import (
    component_broadcast_input,
    component_outputs,
    component_refusal,
    component_refusal_weight,
    component_unicast_input,
)
from .labels import EvaluationContext, Label, LabelKind

# Internally collective-level functions are keyed by tuples of components;
# they are re-keyed to canonical Collective terms at the public boundary.


def _to_collective(wf: WeightedFunction) -> WeightedFunction:
    return wf.map_terms(lambda comps: Collective.of(comps))


def _as_tuple(comp: Component):
    if isinstance(comp, Inactive):
        return ()
    return (comp,)


def _concat(t1, t2):
    return t1 + t2


def _single_input_distribution(
    comp: Agent, label: Label, defs, eps: EvaluationContext
) -> WeightedFunction:
    """Comp-B-In: input plus refusal, renormalised to a distribution over
    component tuples."""
    received = component_broadcast_input(comp, label, defs, eps)
    refused = component_refusal(comp, label, defs, eps)
    combined = received.map_terms(_as_tuple).add(refused.map_terms(_as_tuple))
    return combined.normalized()


def _inputs_product(
    comps, label: Label, defs, eps: EvaluationContext
) -> WeightedFunction:
    """B-In-Sync over the whole multiset: product of per-component input
    distributions (a probability distribution over component tuples)."""
    acc = point((), 1.0)
    for comp in comps:
        dist = _single_input_distribution(comp, label, defs, eps)
        if dist.is_empty():
            return EMPTY
        acc = acc.compose(dist, _concat)
    return acc


def collective_broadcast_input(
    collective: Collective, label: Label, defs, eps: EvaluationContext
) -> WeightedFunction:
    """Distribution over collectives after a broadcast input (total 1 for
    non-empty collectives; the empty collective passes through unchanged)."""
    acc = _inputs_product(collective.components, label, defs, eps)
    return _to_collective(acc)


def collective_broadcast_output(
    collective: Collective, label: Label, defs, eps: EvaluationContext
) -> WeightedFunction:
    """B-Sync race over every component able to emit the label, each sender
    composed with the input distribution of all the others."""
    comps = collective.components
    acc = EMPTY
    for i, comp in enumerate(comps):
        out = dict(component_outputs(comp, defs, eps)).get(label)
        if not out:
            continue
        others_in = _inputs_product(comps[:i] + comps[i + 1 :], label, defs, eps)
        acc = acc.add(out.map_terms(_as_tuple).compose(others_in, _concat))
    return _to_collective(acc)


def _unicast_side(
    comps, label: Label, defs, eps: EvaluationContext, output: bool
) -> WeightedFunction:
    """Out-Sync / In-Sync interleaving over the multiset (tuple-keyed)."""
    acc = EMPTY
    for i, comp in enumerate(comps):
        if output:
            f = dict(component_outputs(comp, defs, eps)).get(label, EMPTY)
        else:
            f = component_unicast_input(comp, label, defs, eps)
        if f.is_empty():
            continue
        rest = comps[:i] + comps[i + 1 :]
        acc = acc.add(f.map_terms(lambda c, rest=rest: _as_tuple(c) + rest))
    return acc


def collective_unicast_output(
    collective: Collective, label: Label, defs, eps: EvaluationContext
) -> WeightedFunction:
    return _to_collective(
        _unicast_side(collective.components, label, defs, eps, output=True)
    )


def collective_unicast_input(
    collective: Collective, label: Label, defs, eps: EvaluationContext
) -> WeightedFunction:
    return _to_collective(
        _unicast_side(collective.components, label, defs, eps, output=False)
    )


def _sync_tuple(
    comps, out_label: Label, defs, eps: EvaluationContext
) -> Tuple[WeightedFunction, WeightedFunction, WeightedFunction]:
    """Returns (sync, output, input) functions over component tuples for the
    given multiset, applying the renormalised synchronisation rule at each
    split."""
    if not comps:
        return EMPTY, EMPTY, EMPTY
    if len(comps) == 1:
        comp = comps[0]
        out = dict(component_outputs(comp, defs, eps)).get(out_label, EMPTY)
        inp = component_unicast_input(comp, out_label, defs, eps)
        return (
            EMPTY,
            out.map_terms(_as_tuple),
            inp.map_terms(_as_tuple),
        )
    head, rest = comps[:1], comps[1:]
    s1, o1, i1 = _sync_tuple(head, out_label, defs, eps)
    s2, o2, i2 = _sync_tuple(rest, out_label, defs, eps)

    out = o1.map_terms(lambda t, rest=rest: t + rest).add(
        o2.map_terms(lambda t, head=head: head + t)
    )
    inp = i1.map_terms(lambda t, rest=rest: t + rest).add(
        i2.map_terms(lambda t, head=head: head + t)
    )

    m1, m2 = i1.total(), i2.total()
    denom = m1 + m2
    if denom == 0:
        sync = EMPTY
    else:
        sync = EMPTY
        if s1:
            sync = sync.add(s1.map_terms(lambda t, rest=rest: t + rest).scale(m1 / denom))
        if s2:
            sync = sync.add(s2.map_terms(lambda t, head=head: head + t).scale(m2 / denom))
        if o1 and i2:
            sync = sync.add(o1.compose(i2, _concat).scale(1.0 / denom))
        if i1 and o2:
            sync = sync.add(i1.compose(o2, _concat).scale(1.0 / denom))
    return sync, out, inp


def collective_unicast_sync(
    collective: Collective, label: Label, defs, eps: EvaluationContext
) -> WeightedFunction:
    """Renormalised unicast synchronisation for a sync label; empty when no
    eligible receiver exists anywhere (unicast output blocks)."""
    out_label = label.with_kind(LabelKind.OUT)
    sync, _, _ = _sync_tuple(collective.components, out_label, defs, eps)
    return _to_collective(sync)


def output_labels(
    collective: Collective, defs, eps: EvaluationContext
) -> List[Label]:
    """All labels generated by output prefixes in the collective, sorted."""
    from ..terms import term_key

    seen = {}
    for comp in collective.components:
        for label, _ in component_outputs(comp, defs, eps):
            seen[label] = True
    return sorted(seen, key=term_key)
