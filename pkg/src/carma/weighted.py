"""Finitely-supported non-negative weighted functions over terms.

This is the continuation object of the semantics: every derivation step
produces one of these, mapping each reachable term to a rate or probability.
Only the support is stored; absent terms have weight zero.
"""

from __future__ import annotations

from .terms import term_key

_ZERO_TOL = 0.0  # weights are computed, never cancelled; exact-zero cut-off


class WeightedFunction:
    """Immutable-by-convention map from hashable terms to positive weights."""

    __slots__ = ("_m",)

    def __init__(self, items=None):
        m = {}
        if items:
            for t, w in items.items() if isinstance(items, dict) else items:
                if w < 0:
                    raise ValueError(f"negative weight {w} for {t!r}")
                if w > _ZERO_TOL:
                    m[t] = m.get(t, 0.0) + w
        self._m = m

    # -- queries ----------------------------------------------------------
    def get(self, term) -> float:
        return self._m.get(term, 0.0)

    def items(self):
        return self._m.items()

    def support(self):
        return self._m.keys()

    def total(self) -> float:
        return sum(self._m.values())

    def is_empty(self) -> bool:
        return not self._m

    def __len__(self):
        return len(self._m)

    def __bool__(self):
        return bool(self._m)

    # -- algebra ----------------------------------------------------------
    def add(self, other: "WeightedFunction") -> "WeightedFunction":
        """Pointwise sum of two weighted functions."""
        if not self._m:
            return other
        if not other._m:
            return self
        m = dict(self._m)
        for t, w in other._m.items():
            m[t] = m.get(t, 0.0) + w
        out = WeightedFunction()
        out._m = m
        return out

    __add__ = add

    def scale(self, r: float) -> "WeightedFunction":
        if r < 0:
            raise ValueError(f"negative scale factor {r}")
        if r == 0 or not self._m:
            return EMPTY
        out = WeightedFunction()
        out._m = {t: w * r for t, w in self._m.items()}
        return out

    def normalized(self) -> "WeightedFunction":
        """Scale so that the total is one; empty stays empty."""
        tot = self.total()
        if tot == 0:
            return EMPTY
        return self.scale(1.0 / tot)

    def map_terms(self, fn) -> "WeightedFunction":
        """Re-key through `fn`, summing collisions."""
        m = {}
        for t, w in self._m.items():
            t2 = fn(t)
            m[t2] = m.get(t2, 0.0) + w
        out = WeightedFunction()
        out._m = m
        return out

    def compose(self, other: "WeightedFunction", combine) -> "WeightedFunction":
        """Product composition: weight product on combined terms, collisions
        summed.  Empty on either side annihilates."""
        m = {}
        for t1, w1 in self._m.items():
            for t2, w2 in other._m.items():
                t = combine(t1, t2)
                m[t] = m.get(t, 0.0) + w1 * w2
        out = WeightedFunction()
        out._m = m
        return out

    # -- comparison and display -------------------------------------------
    def approx_eq(self, other: "WeightedFunction", tol: float = 1e-9) -> bool:
        keys = set(self._m) | set(other._m)
        return all(abs(self.get(k) - other.get(k)) <= tol for k in keys)

    def __eq__(self, other):
        return isinstance(other, WeightedFunction) and self._m == other._m

    def __hash__(self):
        raise TypeError("WeightedFunction is not hashable")

    def __repr__(self):
        inner = ", ".join(
            f"{t!r} -> {w:g}"
            for t, w in sorted(self._m.items(), key=lambda kv: term_key(kv[0]))
        )
        return "[" + inner + "]"


EMPTY = WeightedFunction()


def point(term, weight: float = 1.0) -> WeightedFunction:
    """The function mapping a single term to `weight`."""
    return WeightedFunction({term: weight})
