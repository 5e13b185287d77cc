import numpy as np
import pytest

from hardlabel import geometry as geo
from hardlabel import verification as ver
from tests.conftest import random_feasible_instance

U3 = np.array([0.0, 0.0, 1.0])


class TestIntersectLineHyperplane:
    def test_analytic_lambda(self):
        # lambda = 1 / (0.866 + 1), computed by hand.
        hit = ver.intersect_line_hyperplane(
            np.array([2.0, 0.0, -1.0]), np.array([0.5, 0.0, 0.866]), U3, np.zeros(3)
        )
        assert hit.lam == pytest.approx(0.5359056806002145, abs=1e-12)
        np.testing.assert_allclose(hit.y, [1.1961414790996784, 0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(hit.y, [1.1960, 0.0, 0.0], atol=1e-3)

    def test_midpoint_crossing(self):
        hit = ver.intersect_line_hyperplane(
            np.array([0.0, 0.0, -1.0]), np.array([0.0, 0.0, 1.0]), U3, np.zeros(3)
        )
        assert hit.lam == pytest.approx(0.5)
        np.testing.assert_allclose(hit.y, [0.0, 0.0, 0.0], atol=1e-15)

    def test_known_3d_instance(self):
        hit = ver.intersect_line_hyperplane(
            np.array([3.75, 0.0, -1.25]), np.array([2.1124, 0.0, 1.3371]), U3, np.zeros(3)
        )
        np.testing.assert_allclose(hit.y, [2.9588, 0.0, 0.0], atol=1e-3)

    def test_convex_combination_invariant(self):
        rng = np.random.default_rng(0)
        u = np.array([0.0, 0.0, 0.0, 1.0])
        for _ in range(50):
            x = rng.normal(size=4)
            x[3] = -abs(x[3]) - 0.1  # strictly below the hyperplane
            k = rng.normal(size=4)
            k[3] = abs(k[3]) + 0.1  # strictly above
            hit = ver.intersect_line_hyperplane(x, k, u, np.zeros(4))
            assert 0.0 <= hit.lam <= 1.0
            np.testing.assert_allclose(hit.y, hit.lam * k + (1 - hit.lam) * x, atol=1e-12)
            assert abs(hit.y @ u) <= 1e-9

    def test_no_crossing(self):
        with pytest.raises(ver.NoCrossingError):
            ver.intersect_line_hyperplane(
                np.array([0.0, 0.0, -2.0]), np.array([0.0, 0.0, -1.0]), U3, np.zeros(3)
            )

    def test_parallel_line(self):
        with pytest.raises(ver.ParallelLineError):
            ver.intersect_line_hyperplane(
                np.array([0.0, 0.0, -1.0]), np.array([1.0, 0.0, -1.0]), U3, np.zeros(3)
            )

    def test_lambda_denominator_monotone_in_height(self):
        # Raising the far endpoint along the normal grows the denominator
        # and shrinks lambda, keeping its sign.
        x = np.array([2.0, 0.0, -1.0])
        k = np.array([0.5, 0.0, 0.8])
        lams = []
        for lift in (0.0, 0.5, 1.0, 2.0):
            lams.append(ver.intersect_line_hyperplane(x, k + lift * U3, U3, np.zeros(3)).lam)
        assert all(a > b > 0 for a, b in zip(lams, lams[1:]))


class TestConeMembership:
    def test_on_axis(self):
        spec = ver.ConeSpec(apex=np.zeros(3), axis=np.array([1.0, 1.0, 0.0]), cos_threshold=0.9)
        assert ver.cone_membership(np.array([2.0, 2.0, 0.0]), spec)

    def test_orthogonal_to_axis(self):
        spec = ver.ConeSpec(apex=np.zeros(3), axis=np.array([1.0, 0.0, 0.0]), cos_threshold=0.1)
        assert not ver.cone_membership(np.array([0.0, 3.0, 0.0]), spec)

    def test_tangent_point_on_cone_boundary(self):
        # Tangent points of the unit circle from (2, 0) satisfy
        # cos(angle to the axis) = 1/2 exactly: boundary membership.
        spec = ver.ConeSpec(apex=np.zeros(2), axis=np.array([2.0, 0.0]), cos_threshold=0.5)
        assert ver.cone_membership(np.array([0.5, np.sqrt(3) / 2]), spec)
        assert ver.cone_membership(np.array([0.5, -np.sqrt(3) / 2]), spec)

    def test_apex_query_rejected(self):
        spec = ver.ConeSpec(apex=np.ones(2), axis=np.array([1.0, 0.0]), cos_threshold=0.0)
        with pytest.raises(ver.ZeroVectorError):
            ver.cone_membership(np.ones(2), spec)

    def test_brute_force_tangents_live_on_the_cone(self):
        # Every sampled tangent point has cos(angle to x - center) exactly
        # R over the distance; the executable form of the tangency cone.
        rng = np.random.default_rng(5)
        x, center, u, radius = random_feasible_instance(rng, 4)
        dist = float(np.linalg.norm(x - center))
        ks = ver.sample_tangent_set(x, center, u, radius, 500, rng_seed=1)
        cone = ver.ConeSpec(apex=center, axis=x - center, cos_threshold=radius / dist - 1e-12)
        assert all(ver.cone_membership(k, cone) for k in ks)


class TestBruteForceTangent:
    def test_2d_exhaustive(self):
        k = ver.brute_force_tangent(
            np.array([2.0, 0.0]), np.zeros(2), np.array([0.0, 1.0]), 1.0, n_samples=2000, rng_seed=0
        )
        np.testing.assert_allclose(k, [0.5, np.sqrt(3) / 2], atol=1e-12)

    def test_known_3d_instance(self):
        k = ver.brute_force_tangent(
            np.array([3.75, 0.0, -1.25]), np.zeros(3), U3, 2.5, n_samples=100_000, rng_seed=0
        )
        np.testing.assert_allclose(k, [2.1124, 0.0, 1.3371], atol=1e-2)

    def test_matches_closed_form_high_dim(self):
        rng = np.random.default_rng(11)
        for i in range(3):
            x, center, u, radius = random_feasible_instance(rng, 10)
            sol = geo.tangent_point_hemisphere(x, center, u, radius)
            bf = ver.brute_force_tangent(x, center, u, radius, n_samples=1_000_000, rng_seed=i)
            assert ver.angular_distance(sol.k, bf, center) <= 1e-3

    def test_no_feasible_sample(self):
        # Nearly below the center: every tangent point has negative height.
        with pytest.raises(ver.NoFeasibleSampleError):
            ver.brute_force_tangent(
                np.array([0.1, 0.0, -2.0]), np.zeros(3), U3, 1.0, n_samples=5000, rng_seed=0
            )

    def test_deterministic_given_seed(self):
        x, center, u, radius = random_feasible_instance(np.random.default_rng(2), 5)
        a = ver.brute_force_tangent(x, center, u, radius, n_samples=20_000, rng_seed=9)
        b = ver.brute_force_tangent(x, center, u, radius, n_samples=20_000, rng_seed=9)
        np.testing.assert_array_equal(a, b)


class TestBruteForceMinDistance:
    def test_2d_near_boundary(self):
        # With x exactly on the hyperplane every candidate maps to x itself
        # (all distances tie at zero), so the probe point sits just below.
        x = np.array([2.0, -0.05])
        k = ver.brute_force_min_distance(
            x, np.zeros(2), np.array([0.0, 1.0]), 1.0, n_samples=20_000, rng_seed=0
        )
        expected = geo.tangent_point_hemisphere(x, np.zeros(2), np.array([0.0, 1.0]), 1.0).k
        np.testing.assert_allclose(k, expected, atol=1e-3)
        np.testing.assert_allclose(k, [0.5, np.sqrt(3) / 2], atol=3e-2)

    def test_known_3d_instance(self):
        k = ver.brute_force_min_distance(
            np.array([3.75, 0.0, -1.25]), np.zeros(3), U3, 2.5, n_samples=100_000, rng_seed=0
        )
        np.testing.assert_allclose(k, [2.1124, 0.0, 1.3371], atol=1e-2)

    def test_argmin_matches_argmax(self):
        # The distance minimizer and the height maximizer coincide.
        rng = np.random.default_rng(21)
        for i in range(20):
            x, center, u, radius = random_feasible_instance(rng, 3)
            k_min = ver.brute_force_min_distance(x, center, u, radius, n_samples=60_000, rng_seed=i)
            k_max = ver.brute_force_tangent(x, center, u, radius, n_samples=60_000, rng_seed=i)
            assert ver.angular_distance(k_min, k_max, center) <= 2e-2


def test_interior_points_never_beat_the_closed_form():
    rng = np.random.default_rng(31)
    for i in range(20):
        x, center, u, radius = random_feasible_instance(rng, 3)
        sol = geo.tangent_point_hemisphere(x, center, u, radius)
        opt = np.linalg.norm(ver.intersect_line_hyperplane(x, sol.k, u, center).y - x)
        interior = ver.sample_solid_hemisphere(center, u, radius, 30_000, rng_seed=i)
        denom = (interior - x) @ u
        num = float((center - x) @ u)
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = num / denom
        crossing = (denom != 0) & (lam >= 0.0) & (lam <= 1.0)
        ys = x + lam[:, None] * (interior - x)
        dists = np.linalg.norm(ys - x, axis=1)[crossing]
        assert dists.min() >= opt - 1e-6


def test_hemisphere_surface_sampler_is_on_the_surface():
    center = np.array([1.0, -2.0, 0.5, 3.0])
    u = np.array([0.0, 0.0, 1.0, 0.0])
    pts = ver.sample_hemisphere_surface(center, u, 2.0, 5000, rng_seed=4)
    np.testing.assert_allclose(np.linalg.norm(pts - center, axis=1), 2.0, atol=1e-12)
    assert np.all((pts - center) @ u >= 0.0)


def test_property_suite_reports_all_green():
    results = ver.run_property_suite(ver.PropertySuiteConfig(n_instances=8, n_samples=40_000, seed=3))
    assert len(results) == 4
    assert all(r.passed for r in results), [r.name for r in results if not r.passed]
