import math

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from core.exceptions import InterpolantError
from spectral.fields import Grid, SpectralScalar, SpectralVectorField, forward_transform
from spectral.operators import (
    l2_norm, leray_project, project_coefficients, random_divfree_field, random_scalar_field,
)

from .interpolants import (
    InterpolantKind, InterpolantSpec, ObservationMask, _bilinear_matrix, apply_interpolant,
    apply_masked, damping_factors, interpolate_coefficients,
)
from .verification import (
    SPECTRAL_BOUND, check_interpolant_inequality, residual_norms, type1_ratios,
    verify_type1_bound, verify_type2_bound,
)

SPECTRAL = InterpolantKind.SPECTRAL_PROJECTION
VOLUME = InterpolantKind.VOLUME_AVERAGE
NODAL = InterpolantKind.NODAL_BILINEAR


def mode(grid, k1, k2):
    """cos(2 pi (k1 x + k2 y)) with exact coefficients"""
    coefficients = np.zeros(grid.shape, dtype=complex)
    coefficients[k1 % grid.n, k2 % grid.n] = 0.5
    coefficients[-k1 % grid.n, -k2 % grid.n] = 0.5
    return SpectralScalar(grid, coefficients)


class InterpolantSpecTests(SimpleTestCase):
    def test_type_classes(self):
        self.assertEqual(InterpolantSpec(SPECTRAL, 0.25).type_class, 1)
        self.assertEqual(InterpolantSpec(VOLUME, 0.25).type_class, 1)
        self.assertEqual(InterpolantSpec(NODAL, 0.25).type_class, 2)

    def test_h_constraints(self):
        for h in (0.0, 1.5, 0.3):
            with self.assertRaises(InterpolantError):
                InterpolantSpec(SPECTRAL, h)
        with self.assertRaises(InterpolantError):
            InterpolantSpec(VOLUME, 1 / 3).check_grid(Grid(16))
        InterpolantSpec(SPECTRAL, 1 / 3).check_grid(Grid(16))

    def test_report_shape(self):
        self.assertEqual(
            InterpolantSpec(NODAL, 0.5, c2=1.0, c3=2.0).as_dict(),
            {'kind': 'nodal', 'h': 0.5, 'type_class': 2, 'c2': 1.0, 'c3': 2.0},
        )


class ApplyInterpolantTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(32)

    def test_spectral_keeps_low_mode(self):
        spec = InterpolantSpec(SPECTRAL, 1 / 4)
        scalar = mode(self.grid, 2, 0)
        np.testing.assert_array_equal(apply_interpolant(spec, scalar).coefficients, scalar.coefficients)

    def test_spectral_kills_high_mode(self):
        spec = InterpolantSpec(SPECTRAL, 1 / 4)
        self.assertEqual(np.count_nonzero(apply_interpolant(spec, mode(self.grid, 7, 0)).coefficients), 0)

    def test_volume_average_of_full_period(self):
        spec = InterpolantSpec(VOLUME, 1.0)
        x, _ = self.grid.coordinates()
        scalar, _ = forward_transform(np.sin(2 * np.pi * x), self.grid)
        self.assertLess(np.max(np.abs(apply_interpolant(spec, scalar).coefficients)), 1e-15)

    def test_nodal_reproduces_bilinear_functions(self):
        spec = InterpolantSpec(NODAL, 1 / 8)
        matrix = _bilinear_matrix(self.grid.n, 8)
        nodes = np.random.default_rng(1).standard_normal((8, 8))
        samples = matrix @ nodes @ matrix.T
        scalar, _ = forward_transform(samples, self.grid)
        assert_allclose(apply_interpolant(spec, scalar).coefficients, scalar.coefficients, atol=1e-14)

    def test_linearity(self):
        first = random_scalar_field(self.grid, seed=1)
        second = random_scalar_field(self.grid, seed=2)
        for kind in (SPECTRAL, VOLUME, NODAL):
            spec = InterpolantSpec(kind, 1 / 4)
            combined = apply_interpolant(spec, 2.0 * first - 3.0 * second).coefficients
            separate = (2.0 * apply_interpolant(spec, first) - 3.0 * apply_interpolant(spec, second)).coefficients
            assert_allclose(combined, separate, atol=1e-12)

    def test_idempotence(self):
        scalar = random_scalar_field(self.grid, seed=3)
        for kind in (SPECTRAL, VOLUME):
            spec = InterpolantSpec(kind, 1 / 8)
            once = apply_interpolant(spec, scalar)
            assert_allclose(apply_interpolant(spec, once).coefficients, once.coefficients, atol=1e-14)

    def test_spectral_projection_is_self_adjoint(self):
        spec = InterpolantSpec(SPECTRAL, 1 / 5)
        u = random_scalar_field(self.grid, seed=4)
        v = random_scalar_field(self.grid, seed=5)
        left = np.sum(apply_interpolant(spec, u).coefficients * np.conj(v.coefficients))
        right = np.sum(u.coefficients * np.conj(apply_interpolant(spec, v).coefficients))
        self.assertAlmostEqual(left.real, right.real, places=12)

    def test_outputs_are_mean_zero(self):
        scalar = random_scalar_field(self.grid, seed=6)
        for kind in (SPECTRAL, VOLUME, NODAL):
            self.assertEqual(apply_interpolant(InterpolantSpec(kind, 1 / 4), scalar).coefficients[0, 0], 0)


class MaskTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(16)
        self.spec = InterpolantSpec(SPECTRAL, 1 / 3)
        self.eta = random_divfree_field(self.grid, seed=1)
        self.zeta = random_divfree_field(self.grid, seed=2)

    def test_v_only_has_no_w_feedback(self):
        _, feedback_w = apply_masked(self.spec, ObservationMask.V_ONLY, (self.eta, self.zeta))
        self.assertEqual(l2_norm(feedback_w), 0.0)

    def test_w_only_has_no_v_feedback(self):
        feedback_v, _ = apply_masked(self.spec, ObservationMask.W_ONLY, (self.eta, self.zeta))
        self.assertEqual(l2_norm(feedback_v), 0.0)

    def test_first_component_ignores_second_components(self):
        coefficients = np.array(self.eta.coefficients)
        coefficients[0] = 0.0
        only_second = SpectralVectorField(self.grid, coefficients)
        feedback = apply_masked(self.spec, ObservationMask.FIRST_COMPONENT, (only_second, only_second))
        self.assertEqual(l2_norm(feedback[0]) + l2_norm(feedback[1]), 0.0)

    def test_first_component_feedback_lies_along_first_axis(self):
        feedback_v, feedback_w = apply_masked(self.spec, ObservationMask.FIRST_COMPONENT, (self.eta, self.zeta))
        self.assertEqual(np.count_nonzero(feedback_v.coefficients[1]), 0)
        self.assertEqual(np.count_nonzero(feedback_w.coefficients[1]), 0)

    def test_all_equals_componentwise_truncation(self):
        feedback_v, feedback_w = apply_masked(self.spec, ObservationMask.ALL, (self.eta, self.zeta))
        k1, k2 = self.grid.wavenumbers
        window = (np.abs(k1) <= 3) & (np.abs(k2) <= 3)
        np.testing.assert_array_equal(feedback_v.coefficients, self.eta.coefficients * window)
        np.testing.assert_array_equal(feedback_w.coefficients, self.zeta.coefficients * window)

    def test_primitive_masks_follow_the_swap_convention(self):
        for swapped in (False, True):
            feedback_v, feedback_w = apply_masked(
                self.spec, ObservationMask.B_ONLY, (self.eta, self.zeta), swapped=swapped
            )
            magnetic = (self.eta + self.zeta) / 2 if swapped else (self.eta - self.zeta) / 2
            truncated = apply_interpolant(self.spec, magnetic).coefficients
            assert_allclose(feedback_v.coefficients, truncated, atol=1e-15)
            # w = u - b sees -b, w = b - u sees +b
            sign = 1.0 if swapped else -1.0
            assert_allclose(feedback_w.coefficients, sign * truncated, atol=1e-15)

    def test_damping_factors_match_projected_feedback(self):
        for mask in ObservationMask.values:
            for swapped in (False, True):
                factors = damping_factors(self.spec, mask, self.grid, swapped)
                feedback = apply_masked(self.spec, mask, (self.eta, self.zeta), swapped)
                eta, zeta = self.eta.coefficients, self.zeta.coefficients
                for row, term in enumerate(feedback):
                    expected = project_coefficients(term.coefficients, self.grid)
                    direct = factors[row, 0] * eta + factors[row, 1] * zeta
                    assert_allclose(direct, expected, atol=1e-14)

    def test_damping_factors_need_a_spectral_projection(self):
        with self.assertRaises(InterpolantError):
            damping_factors(InterpolantSpec(VOLUME, 1 / 4), ObservationMask.ALL, self.grid)


class VerificationTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(32)

    def test_spectral_constant_respects_analytic_bound(self):
        report = verify_type1_bound(InterpolantSpec(SPECTRAL, 1 / 4), self.grid, n_samples=1000, seed=0)
        self.assertLessEqual(report.raw[0], SPECTRAL_BOUND + 1e-6)
        self.assertAlmostEqual(report.c1, 1.05 * report.raw[0])
        self.assertEqual(report.as_dict()['type_class'], 1)

    def test_range_of_interpolant_contributes_nothing(self):
        spec = InterpolantSpec(SPECTRAL, 1 / 8)
        residual, gradient, _ = residual_norms(spec, mode(self.grid, 2, 3))
        self.assertEqual(residual, 0.0)
        self.assertGreater(gradient, 0.0)

    def test_constant_is_stable_across_seeds(self):
        spec = InterpolantSpec(VOLUME, 1 / 8)
        first = verify_type1_bound(spec, self.grid, n_samples=200, seed=1).raw[0]
        second = verify_type1_bound(spec, self.grid, n_samples=200, seed=2).raw[0]
        self.assertLess(abs(first - second), 0.2 * first)

    def test_type_mismatch(self):
        with self.assertRaises(InterpolantError):
            verify_type1_bound(InterpolantSpec(NODAL, 1 / 4), self.grid, n_samples=5)
        with self.assertRaises(InterpolantError):
            verify_type2_bound(InterpolantSpec(VOLUME, 1 / 4), self.grid, n_samples=5)

    def test_stored_type1_constant_holds_on_fresh_fields(self):
        spec = InterpolantSpec(VOLUME, 1 / 8)
        spec = verify_type1_bound(spec, self.grid, n_samples=1000, seed=3).apply_to(spec)
        check = check_interpolant_inequality(spec, self.grid, n_samples=1000, seed=4)
        self.assertEqual(check.violations, 0)

    def test_stored_type2_constants_hold_on_fresh_fields(self):
        spec = InterpolantSpec(NODAL, 1 / 8)
        report = verify_type2_bound(spec, self.grid, n_samples=1000, seed=5)
        self.assertGreaterEqual(report.c2, 0.0)
        self.assertGreaterEqual(report.c3, 0.0)
        check = check_interpolant_inequality(report.apply_to(spec), self.grid, n_samples=1000, seed=6)
        self.assertEqual(check.violations, 0)

    def test_nodal_error_is_second_order_for_a_smooth_mode(self):
        grid = Grid(64)
        scalar = mode(grid, 1, 1)
        coarse = residual_norms(InterpolantSpec(NODAL, 1 / 8), scalar)[0]
        fine = residual_norms(InterpolantSpec(NODAL, 1 / 16), scalar)[0]
        self.assertGreaterEqual(math.log2(coarse / fine), 1.9)

    def test_type1_ratios_skip_nothing_for_random_fields(self):
        ratios = type1_ratios(InterpolantSpec(SPECTRAL, 1 / 2), self.grid, n_samples=10, seed=7)
        self.assertEqual(ratios.size, 10)

    def test_stored_constants_required_for_checks(self):
        with self.assertRaises(InterpolantError):
            check_interpolant_inequality(InterpolantSpec(NODAL, 1 / 4), self.grid, n_samples=5)


class FeedbackProjectionTests(SimpleTestCase):
    def test_projected_first_component_feedback_is_divergence_free(self):
        grid = Grid(16)
        spec = InterpolantSpec(NODAL, 1 / 4)
        eta = random_divfree_field(grid, seed=8)
        feedback_v, _ = apply_masked(spec, ObservationMask.FIRST_COMPONENT, (eta, eta))
        self.assertTrue(leray_project(feedback_v).is_divergence_free())
        self.assertIsInstance(interpolate_coefficients(spec, np.array(eta.coefficients), grid), np.ndarray)
        self.assertIsInstance(apply_interpolant(spec, SpectralScalar.zeros(grid)), SpectralScalar)
