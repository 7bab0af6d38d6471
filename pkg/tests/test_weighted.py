"""Weighted function algebra used by every derivation step."""

import pytest

from carma.weighted import EMPTY, point, WeightedFunction


def test_point_and_get():
    f = point("a", 2.0)
    assert f.get("a") == 2.0
    assert f.get("b") == 0.0
    assert f.total() == 2.0
    assert len(f) == 1


def test_zero_weights_are_dropped():
    f = WeightedFunction({"a": 0.0, "b": 1.0})
    assert "a" not in f.support()
    assert len(f) == 1


def test_negative_weight_rejected():
    with pytest.raises(ValueError):
        WeightedFunction({"a": -1.0})
    with pytest.raises(ValueError):
        point("a").scale(-2.0)


def test_duplicate_items_accumulate():
    f = WeightedFunction([("a", 1.0), ("a", 2.0)])
    assert f.get("a") == 3.0


def test_add_is_pointwise():
    f = point("a", 1.0).add(point("b", 2.0)).add(point("a", 0.5))
    assert f.get("a") == 1.5
    assert f.get("b") == 2.0
    assert f.total() == 3.5


def test_add_with_empty_is_identity():
    f = point("a", 1.0)
    assert f.add(EMPTY) == f
    assert EMPTY.add(f) == f


def test_scale_and_normalize():
    f = point("a", 1.0).add(point("b", 3.0))
    g = f.normalized()
    assert g.get("a") == pytest.approx(0.25)
    assert g.get("b") == pytest.approx(0.75)
    assert f.scale(0) is EMPTY
    assert EMPTY.normalized() is EMPTY


def test_map_terms_merges_collisions():
    f = WeightedFunction({1: 1.0, 2: 2.0, 3: 4.0})
    g = f.map_terms(lambda n: n % 2)
    assert g.get(1) == 5.0
    assert g.get(0) == 2.0


def test_compose_is_a_product():
    f = WeightedFunction({"a": 2.0, "b": 1.0})
    g = WeightedFunction({"x": 0.5})
    h = f.compose(g, lambda s, t: s + t)
    assert h.get("ax") == 1.0
    assert h.get("bx") == 0.5
    assert f.compose(EMPTY, lambda s, t: s + t).is_empty()


def test_approx_eq():
    f = point("a", 1.0)
    g = point("a", 1.0 + 1e-12)
    assert f.approx_eq(g)
    assert not f.approx_eq(point("a", 1.1))
    assert not f.approx_eq(point("b", 1.0))


def test_not_hashable():
    with pytest.raises(TypeError):
        hash(point("a"))
