import math

import numpy as np
import pytest

from coarsegauss.geometry import (
    AxisBox,
    HPolytope,
    Interval,
    Singleton,
    WholeSpace,
    grid_partition,
    singleton_partition,
    slab_partition,
    whole_space_partition,
)
from coarsegauss.likelihood import (
    ProjectionBall,
    directional_hessian_mc,
    log_interval_mass,
    min_norm_point,
    nll_1d,
    project,
    second_moment_probe,
    stochastic_gradient,
)
from coarsegauss.sampling import make_rng
from coarsegauss.streams import SyntheticStream

from oracles import (
    gauss_mass,
    grid_curvature_1d,
    grid_nll_1d,
    grid_nll_gradient_1d,
    two_ball_projection_grid,
)


class TestNll1d:
    def test_whole_line_zero(self):
        assert nll_1d(0.0, (-math.inf, math.inf)) == 0.0

    def test_unit_interval(self):
        # Oracle: -ln(Phi(1) - Phi(-1)) = 0.3817151463 by quadrature/CDF.
        assert nll_1d(0.0, Interval(-1.0, 1.0)) == pytest.approx(0.3817151463, abs=1e-6)

    def test_far_interval_stable(self):
        v = nll_1d(10.0, Interval(-1.0, 1.0))
        ref = -math.log(gauss_mass(10.0, -1.0, 1.0))
        assert math.isfinite(v)
        assert v == pytest.approx(ref, rel=1e-9)

    def test_extreme_tail_no_overflow(self):
        v = nll_1d(0.0, Interval(38.0, 40.0))
        assert math.isfinite(v) and v > 500.0

    def test_nonnegative(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            lo = rng.uniform(-5, 4)
            assert nll_1d(rng.uniform(-3, 3), Interval(lo, lo + rng.uniform(0.1, 5))) >= 0.0

    def test_zero_width_singular(self):
        assert nll_1d(0.0, (2.0, 2.0)) == math.inf

    def test_reversed_error(self):
        with pytest.raises(ValueError):
            nll_1d(0.0, (1.0, 0.0))


class TestLogIntervalMass:
    def test_matches_cdf(self):
        for mean, lo, hi in [(0.0, -1.0, 1.0), (2.0, 0.0, 0.5), (-1.0, -math.inf, 0.0)]:
            assert float(log_interval_mass(mean, lo, hi)) == pytest.approx(
                math.log(gauss_mass(mean, lo, hi)), rel=1e-9)

    def test_whole_line(self):
        assert float(log_interval_mass(3.0, -math.inf, math.inf)) == 0.0


class TestMinNormPoint:
    def test_interval(self):
        assert min_norm_point(Interval(2.0, 5.0))[0] == 2.0
        assert min_norm_point(Interval(-3.0, -1.0))[0] == -1.0
        assert min_norm_point(Interval(-1.0, 1.0))[0] == 0.0

    def test_box(self):
        p = min_norm_point(AxisBox(np.array([1.0, -2.0]), np.array([3.0, -1.0])))
        assert np.allclose(p, [1.0, -1.0])

    def test_polytope(self):
        # Halfplane x + y >= 2: closest point to origin is (1, 1).
        cell = HPolytope(np.array([[-1.0, -1.0]]), np.array([-2.0]))
        assert np.allclose(min_norm_point(cell), [1.0, 1.0], atol=1e-6)


class TestStochasticGradient:
    def test_singleton_exact(self):
        mu = np.array([0.4, -0.2])
        gs = stochastic_gradient(mu, Singleton(np.array([1.0, 1.0])), 10.0, make_rng(0))
        assert np.allclose(gs.g, mu - [1.0, 1.0])
        assert not gs.cell_radius_clipped

    def test_wholespace_zero_mean(self):
        rng = make_rng(1)
        mu = np.array([0.7, -0.3])
        g = np.mean([stochastic_gradient(mu, WholeSpace(2), 100.0, rng).g
                     for _ in range(100_000)], axis=0)
        assert np.linalg.norm(g) <= 3.0 * math.sqrt(2.0 / 100_000)

    def test_grid_gradient_vs_quadrature(self):
        # d=1, unit grid, mu*=0.37, mu=0: oracle gradient -0.3415927934.
        rng = make_rng(2)
        part = grid_partition(1.0, 1)
        stream = SyntheticStream(part, np.array([0.37]), make_rng(3))
        n = 1_000_000
        lo, hi = stream.draw_bulk(n)
        from coarsegauss.sampling import truncated_normal_1d
        ys = truncated_normal_1d(np.zeros(n), lo[:, 0], hi[:, 0], rng)
        g = -ys.mean()
        assert g == pytest.approx(grid_nll_gradient_1d(0.0, 0.37), abs=0.003)

    def test_emptied_cell_collapses_to_min_norm(self):
        gs = stochastic_gradient(np.zeros(1), Interval(12.0, math.inf), 10.0, make_rng(4))
        assert gs.cell_radius_clipped
        assert np.allclose(gs.g, [-12.0])


class TestSecondMomentProbe:
    def test_singleton_stream_d(self):
        part = singleton_partition(2)
        mu = np.array([0.3, -0.1])
        stream = SyntheticStream(part, mu, make_rng(5))
        probe = second_moment_probe(mu, stream, 100.0, 20_000, make_rng(6))
        assert probe == pytest.approx(2.0, rel=0.05)

    def test_grid_bound(self):
        part = grid_partition(1.0, 2)
        stream = SyntheticStream(part, np.array([0.5, 0.5]), make_rng(7))
        probe = second_moment_probe(np.array([0.8, 0.0]), stream, 5.0, 5_000, make_rng(8))
        assert probe <= 4.0 * (1.0 + 2 * 25.0 + 2.0)  # 4(D^2 + d R^2 + d) = 212

    def test_wholespace_stream_d(self):
        part = whole_space_partition(3)
        stream = SyntheticStream(part, np.zeros(3), make_rng(9))
        probe = second_moment_probe(np.zeros(3), stream, 100.0, 20_000, make_rng(10))
        assert probe == pytest.approx(3.0, rel=0.05)


class TestProject:
    def test_radial(self):
        out = project(np.array([3.0, 4.0]), ProjectionBall(np.zeros(2), 1.0))
        assert np.allclose(out, [0.6, 0.8])

    def test_inside_unchanged(self):
        p = np.array([0.1, -0.2])
        assert np.array_equal(project(p, ProjectionBall(np.zeros(2), 1.0)), p)

    def test_two_balls_vs_grid_search(self):
        b1 = ProjectionBall(np.zeros(2), 1.0)
        b2 = ProjectionBall(np.array([1.5, 0.0]), 1.0)
        out = project(np.array([0.0, 2.0]), b1, b2)
        assert np.linalg.norm(out - b1.center) <= 1.0 + 1e-9
        assert np.linalg.norm(out - b2.center) <= 1.0 + 1e-9
        ref = two_ball_projection_grid(np.array([0.0, 2.0]),
                                       np.zeros(2), 1.0, np.array([1.5, 0.0]), 1.0)
        assert np.linalg.norm(out - ref) < 1e-3


class TestDirectionalHessian:
    def test_wholespace_zero(self):
        part = whole_space_partition(2)
        s, se = directional_hessian_mc(part, np.zeros(2), np.array([1.0, 0.0]),
                                       100, make_rng(11))
        assert abs(s) <= max(3 * se, 1e-3)

    def test_singleton_one(self):
        part = singleton_partition(2)
        s, _ = directional_hessian_mc(part, np.zeros(2), np.array([0.0, 1.0]),
                                      50, make_rng(12))
        assert s == pytest.approx(1.0)

    def test_slabs_flat_and_curved(self):
        part = slab_partition(np.array([1.0, 0.0]), 1.0, 2)
        mu = np.array([0.37, 0.0])
        s2, se2 = directional_hessian_mc(part, mu, np.array([0.0, 1.0]), 300, make_rng(13))
        assert abs(s2) <= 3 * se2 + 1e-3
        s1, se1 = directional_hessian_mc(part, mu, np.array([1.0, 0.0]), 300, make_rng(14))
        ref = grid_curvature_1d(0.37, 1.0)
        assert abs(s1 - ref) <= 3 * se1

    def test_unit_direction_required(self):
        with pytest.raises(ValueError):
            directional_hessian_mc(whole_space_partition(2), np.zeros(2),
                                   np.array([1.0, 1.0]), 10, make_rng(0))


class TestQuadratureProperties:
    def test_midpoint_convexity(self):
        rng = np.random.default_rng(15)
        for _ in range(50):
            m1, m2 = rng.uniform(-3, 3, size=2)
            lhs = grid_nll_1d((m1 + m2) / 2.0, 0.37)
            rhs = (grid_nll_1d(m1, 0.37) + grid_nll_1d(m2, 0.37)) / 2.0
            assert lhs <= rhs + 1e-8

    def test_minimum_at_mu_star(self):
        rng = np.random.default_rng(16)
        base = grid_nll_1d(0.37, 0.37)
        for _ in range(100):
            assert grid_nll_1d(rng.uniform(-3, 3), 0.37) >= base - 1e-8
