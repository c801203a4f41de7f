"""Tests for the flat-torus geometry primitives."""

import numpy as np
import pytest

from torusbridge import (
    AmbiguousLiftError,
    is_on_cut_locus,
    lattice_lifts,
    lattice_offsets,
    lift_nearest,
    project,
    torus_distance,
)


class TestProject:
    def test_identity_at_origin(self):
        np.testing.assert_array_equal(project((0.0, 0.0)), [0.0, 0.0])

    def test_mod_one_wrap(self):
        np.testing.assert_allclose(project((1.3, -0.7)), [0.3, 0.3], atol=1e-15)

    def test_half_boundary_maps_to_minus_half(self):
        """The half-open convention sends +1/2 to -1/2 exactly."""
        np.testing.assert_array_equal(project((0.5, -0.5)), [-0.5, -0.5])
        np.testing.assert_array_equal(project((1.5, 2.5)), [-0.5, -0.5])

    def test_idempotent(self):
        """Projecting a projected point changes nothing, bit for bit."""
        rng = np.random.default_rng(42)
        p = rng.uniform(-50.0, 50.0, size=(100_000, 2))
        once = project(p)
        np.testing.assert_array_equal(project(once), once)

    def test_range_invariant(self):
        rng = np.random.default_rng(43)
        pools = [
            rng.uniform(-100.0, 100.0, size=(100_000, 2)),
            rng.integers(-5, 5, size=(1000, 2)) + rng.choice([-1e-17, 0.0, 1e-17, 0.5], size=(1000, 2)),
        ]
        for p in pools:
            u = project(p)
            assert np.all(u >= -0.5) and np.all(u < 0.5)

    def test_nonfinite_rejected(self):
        for bad in ([np.nan, 0.0], [0.0, np.inf], [-np.inf, 1.0]):
            with pytest.raises(ValueError):
                project(bad)

    def test_shape_rejected(self):
        with pytest.raises(ValueError):
            project([1.0, 2.0, 3.0])


class TestLiftNearest:
    def test_nearest_integer_point(self):
        np.testing.assert_array_equal(lift_nearest((0.3, 0.4), (0.0, 0.0)), [0.0, 0.0])

    def test_componentwise_rounding(self):
        np.testing.assert_array_equal(lift_nearest((0.6, -0.7), (0.0, 0.0)), [1.0, -1.0])

    def test_shifted_target(self):
        np.testing.assert_array_equal(
            lift_nearest((0.9, 0.9), (0.25, 0.25)), [1.25, 1.25]
        )

    def test_tie_raises(self):
        with pytest.raises(AmbiguousLiftError):
            lift_nearest((0.5, 0.2), (0.0, 0.0))
        with pytest.raises(AmbiguousLiftError):
            lift_nearest((0.75, 0.1), (0.25, 0.25))

    def test_tolerance_band_raises(self):
        lift_nearest((0.45, 0.0), (0.0, 0.0), tol=0.01)
        with pytest.raises(AmbiguousLiftError):
            lift_nearest((0.45, 0.0), (0.0, 0.0), tol=0.06)

    def test_argmin_optimality_brute_force(self):
        """The returned lift strictly beats every lattice neighbour within radius 3."""
        rng = np.random.default_rng(44)
        neighbours = lattice_offsets(3).astype(float)  # 7x7 block
        for _ in range(300):
            a = rng.uniform(-0.5, 0.5, size=2)
            x = rng.uniform(-2.0, 2.0, size=2)
            if is_on_cut_locus(x, a):
                continue
            y = lift_nearest(x, a)
            best = np.linalg.norm(y - x)
            others = y + neighbours[np.any(neighbours != 0, axis=1)]
            assert np.all(best < np.linalg.norm(others - x, axis=1))

    def test_fundamental_square_bound(self):
        """No point off the cut locus is farther than half a diagonal from its lift."""
        rng = np.random.default_rng(45)
        a = rng.uniform(-0.5, 0.5, size=2)
        x = rng.uniform(-4.0, 4.0, size=(100_000, 2))
        y = lift_nearest(x, a)
        assert np.all(np.linalg.norm(y - x, axis=1) <= np.sqrt(0.5))


class TestCutLocus:
    def test_component_tie(self):
        assert is_on_cut_locus((0.75, 0.1), (0.25, 0.25)) is True

    def test_interior_point(self):
        assert is_on_cut_locus((0.3, 0.4), (0.0, 0.0)) is False

    def test_double_tie_corner(self):
        assert is_on_cut_locus((0.5, 0.5), (0.0, 0.0)) is True

    def test_measure_zero_in_practice(self):
        """Random continuous points never land on the exact tie lines."""
        rng = np.random.default_rng(46)
        x = rng.uniform(-3.0, 3.0, size=(100_000, 2))
        hits = is_on_cut_locus(x, (0.1, -0.2))
        assert hits.shape == (100_000,)
        assert hits.sum() == 0

    def test_tolerance_band(self):
        assert is_on_cut_locus((0.48, 0.0), (0.0, 0.0)) is False
        assert is_on_cut_locus((0.48, 0.0), (0.0, 0.0), tol=0.05) is True


class TestTorusDistance:
    def test_wraparound_is_shorter(self):
        assert torus_distance((0.4, 0.0), (-0.4, 0.0)) == pytest.approx(0.2, abs=1e-15)

    def test_identity(self):
        assert torus_distance((0.1, 0.2), (0.1, 0.2)) == 0.0

    def test_opposite_quarter_points(self):
        # Both wrap choices tie at sqrt(1/2); frozen from the 9-shift brute force.
        assert torus_distance((0.25, 0.25), (-0.25, -0.25)) == pytest.approx(
            0.7071067811865476, abs=1e-15
        )

    def test_matches_componentwise_wrap_formula(self):
        """Independent route: wrap each displacement component into [-1/2, 1/2)."""
        rng = np.random.default_rng(47)
        p = rng.uniform(-0.5, 0.5, size=(20_000, 2))
        q = rng.uniform(-0.5, 0.5, size=(20_000, 2))
        delta = (p - q + 0.5) % 1.0 - 0.5
        np.testing.assert_allclose(
            torus_distance(p, q), np.linalg.norm(delta, axis=1), atol=1e-15
        )

    def test_metric_axioms(self):
        rng = np.random.default_rng(48)
        p, q, r = rng.uniform(-0.5, 0.5, size=(3, 5000, 2))
        dpq = torus_distance(p, q)
        dqp = torus_distance(q, p)
        np.testing.assert_allclose(dpq, dqp, atol=1e-12)
        assert np.all(dpq >= 0)
        assert np.all(dpq > 0)  # distinct random points
        np.testing.assert_array_less(
            dpq, torus_distance(p, r) + torus_distance(r, q) + 1e-12
        )

    def test_diameter(self):
        """Nothing on the torus is farther than half a diagonal away."""
        rng = np.random.default_rng(49)
        p, q = rng.uniform(-0.5, 0.5, size=(2, 50_000, 2))
        assert np.all(torus_distance(p, q) <= np.sqrt(0.5) + 1e-15)


class TestLattice:
    def test_offsets_shape_and_order(self):
        k = lattice_offsets(1)
        assert k.shape == (9, 2)
        np.testing.assert_array_equal(k[0], [-1, -1])
        np.testing.assert_array_equal(k[-1], [1, 1])
        np.testing.assert_array_equal(k[4], [0, 0])

    def test_offsets_zero_radius(self):
        np.testing.assert_array_equal(lattice_offsets(0), [[0, 0]])

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            lattice_offsets(-1)

    def test_lifts_contain_target(self):
        a = (0.25, -0.25)
        lifts = lattice_lifts(a, 2)
        assert lifts.shape == (25, 2)
        assert any(np.array_equal(row, a) for row in lifts)

    def test_lifts_project_to_target(self):
        a = (0.13, -0.41)
        lifts = lattice_lifts(a, 3)
        np.testing.assert_allclose(project(lifts), np.broadcast_to(a, (49, 2)), atol=1e-12)

    def test_target_outside_domain_rejected(self):
        with pytest.raises(ValueError):
            lattice_lifts((0.5, 0.0), 1)
        with pytest.raises(ValueError):
            lift_nearest((0.1, 0.1), (1.2, 0.0))
