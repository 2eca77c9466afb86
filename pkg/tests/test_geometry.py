import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coarsegauss.geometry import (
    EMPTY,
    AxisBox,
    GeometryError,
    HPolytope,
    Interval,
    Singleton,
    WholeSpace,
    breakpoints_partition,
    clip_to_box,
    common_recession_direction,
    contains,
    grid_partition,
    interior_point,
    singleton_partition,
    slab_partition,
    voronoi_partition,
    whole_space_partition,
)

from oracles import triangle_chebyshev_grid

TRIANGLE = HPolytope(np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]]),
                     np.array([0.0, 0.0, 1.0]))


class TestContains:
    def test_interval(self):
        assert contains(Interval(0.0, 1.0), 0.5)

    def test_halfspace(self):
        h = HPolytope(np.array([[1.0, 0.0]]), np.array([0.0]))
        assert not contains(h, np.array([1.0, 0.0]))

    def test_box_boundary_closed(self):
        box = AxisBox(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        assert contains(box, np.array([1.0, 1.0]))

    def test_dimension_mismatch(self):
        box = AxisBox(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        with pytest.raises(GeometryError):
            contains(box, np.array([0.0, 0.0, 0.0]))


class TestClipToBox:
    def test_halfline(self):
        out = clip_to_box(Interval(5.0, math.inf), 10.0)
        assert out == Interval(5.0, 10.0)

    def test_wholespace(self):
        out = clip_to_box(WholeSpace(2), 3.0)
        assert isinstance(out, AxisBox)
        assert np.array_equal(out.lo, [-3.0, -3.0])
        assert np.array_equal(out.hi, [3.0, 3.0])

    def test_empty(self):
        assert clip_to_box(Interval(12.0, math.inf), 10.0) is EMPTY

    def test_polytope_gets_box_rows(self):
        out = clip_to_box(TRIANGLE, 2.0)
        assert isinstance(out, HPolytope)
        assert out.normals.shape[0] == 3 + 4

    def test_clip_subset_property(self):
        rng = np.random.default_rng(0)
        cell = AxisBox(np.array([-5.0, 0.5]), np.array([np.inf, 4.0]))
        out = clip_to_box(cell, 2.0)
        for _ in range(200):
            p = rng.uniform(-2, 2, size=2)
            if contains(out, p):
                assert contains(cell, p)
                assert np.all(np.abs(p) <= 2.0)


class TestInteriorPoint:
    def test_box(self):
        c, r = interior_point(AxisBox(np.array([0.0, 0.0]), np.array([2.0, 4.0])))
        assert np.allclose(c, [1.0, 2.0])
        assert r == pytest.approx(1.0)

    def test_interval(self):
        c, r = interior_point(Interval(3.0, 5.0))
        assert c[0] == pytest.approx(4.0)
        assert r == pytest.approx(1.0)

    def test_triangle_chebyshev_vs_grid_search(self):
        c, r = interior_point(TRIANGLE)
        c_ref, r_ref = triangle_chebyshev_grid()
        assert np.allclose(c, c_ref, atol=2e-3)
        assert r == pytest.approx(r_ref, abs=2e-3)
        # closed form: (1 - 1/sqrt(2), 1 - 1/sqrt(2))
        assert np.allclose(c, 1.0 - 1.0 / math.sqrt(2.0), atol=1e-8)

    def test_ball_inside_set(self):
        rng = np.random.default_rng(1)
        c, r = interior_point(TRIANGLE)
        for _ in range(200):
            v = rng.standard_normal(2)
            p = c + v / np.linalg.norm(v) * rng.uniform(0, r * 0.999)
            assert contains(TRIANGLE, p)

    def test_unbounded_errors(self):
        with pytest.raises(GeometryError, match="no interior"):
            interior_point(Interval(0.0, math.inf))


class TestRecession:
    def test_vertical_slabs(self):
        cells = [AxisBox(np.array([float(k), -math.inf]),
                         np.array([float(k + 1), math.inf])) for k in range(-2, 3)]
        v = common_recession_direction(cells)
        assert v is not None
        assert np.allclose(np.abs(v), [0.0, 1.0], atol=1e-12)

    def test_grid_boxes(self):
        cells = [AxisBox(np.array([0.0, 0.0]), np.array([1.0, 1.0])),
                 AxisBox(np.array([1.0, 0.0]), np.array([2.0, 1.0]))]
        assert common_recession_direction(cells) is None

    def test_wholespace_canonical(self):
        v = common_recession_direction([WholeSpace(2)])
        assert np.allclose(v, [1.0, 0.0])

    def test_exact_slab_direction(self):
        part = slab_partition(np.array([1.0, 2.0]), 1.0, 2)
        cells = [part(np.array([x, 0.3 * x])) for x in np.linspace(-3, 3, 7)]
        v = common_recession_direction(cells)
        expected = np.array([2.0, -1.0]) / math.sqrt(5.0)
        assert v is not None
        assert min(np.linalg.norm(v - expected), np.linalg.norm(v + expected)) < 1e-9

    def test_bounded_box_flips_to_none(self):
        cells = [AxisBox(np.array([0.0, -math.inf]), np.array([1.0, math.inf])),
                 AxisBox(np.array([0.0, 0.0]), np.array([1.0, 1.0]))]
        assert common_recession_direction(cells) is None


PARTITIONS = [
    grid_partition(1.0, 2),
    grid_partition(0.5, 3),
    slab_partition(np.array([1.0, 1.0]), 0.7, 2),
    slab_partition(np.array([0.0, 1.0]), 1.0, 2),
    breakpoints_partition([-1.5, 0.0, 0.3, 2.0]),
    voronoi_partition(np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [1.0, 1.0]])),
    whole_space_partition(2),
    singleton_partition(2),
]


@pytest.mark.parametrize("part", PARTITIONS, ids=lambda p: p.family + str(p.dim))
def test_locate_contains(part):
    rng = np.random.default_rng(42)
    for _ in range(500):
        x = rng.standard_normal(part.dim) * 3.0
        assert contains(part(x), x)


@pytest.mark.parametrize("part", [p for p in PARTITIONS if p.bulk_bounds is not None],
                         ids=lambda p: p.family)
def test_bulk_bounds_match_locate(part):
    rng = np.random.default_rng(7)
    X = rng.standard_normal((200, part.dim)) * 3.0
    lo, hi = part.bulk_bounds(X)
    for i in range(X.shape[0]):
        cell = part(X[i])
        if isinstance(cell, Interval):
            clo, chi = np.array([cell.lo]), np.array([cell.hi])
        else:
            clo, chi = cell.lo, cell.hi
        assert np.array_equal(lo[i], clo)
        assert np.array_equal(hi[i], chi)


def test_partition_disjointness_spotcheck():
    part = grid_partition(1.0, 2)
    rng = np.random.default_rng(3)
    for _ in range(100):
        x, y = rng.standard_normal(2) * 2.0, rng.standard_normal(2) * 2.0
        cx, cy = part(x), part(y)
        if np.array_equal(cx.lo, cy.lo):
            continue
        p = rng.uniform(-3, 3, size=2)
        # Interiors never overlap; boundary ties are measure zero.
        strictly_in = lambda c, q: bool(np.all(q > c.lo) and np.all(q < c.hi))
        assert not (strictly_in(cx, p) and strictly_in(cy, p))


@given(st.floats(-100, 100), st.floats(0.01, 50))
@settings(max_examples=50, deadline=None)
def test_grid_locate_contains_hypothesis(x, h):
    part = grid_partition(h, 1)
    assert contains(part(np.array([x])), np.array([x]))


def test_degenerate_constructions_rejected():
    with pytest.raises(GeometryError):
        Interval(1.0, 1.0)
    with pytest.raises(GeometryError):
        AxisBox(np.array([0.0, 0.0]), np.array([1.0, 0.0]))
    with pytest.raises(GeometryError):
        HPolytope(np.array([[0.0, 0.0]]), np.array([1.0]))
    with pytest.raises(GeometryError):
        grid_partition(-1.0, 2)


def test_singleton_and_bounded_force_none():
    assert common_recession_direction([Singleton(np.zeros(2))]) is None
