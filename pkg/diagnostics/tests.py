import csv
import math
import os
import tempfile

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from core.exceptions import DiagnosticError, ThresholdError
from mhd.budget import Trajectory
from mhd.dynamics import ElsasserState
from mhd.params import derive_elsasser_params
from spectral.fields import Grid, SpectralVectorField
from spectral.operators import random_divfree_field

from .bounds import check_int_bound
from .gronwall import gronwall_condition_check, psi_all, psi_generalized, psi_v_only
from .series import (
    ErrorSeries, convergence_verdict, decay_segment, error_norms, fit_exponential_rate, onset_time,
    trend_decreasing,
)
from .thresholds import (
    H1_TIGHTENING, TheoremId, default_constants, maximum_spacing, minimum_gain, theorem_thresholds,
    theorems_for,
)


def unit_gap_params():
    return derive_elsasser_params(1, 1)


def shear_state(grid, amplitude, t=0.0):
    coefficients = np.zeros((2,) + grid.shape, dtype=complex)
    coefficients[1, 1, 0] = -0.5j * amplitude
    coefficients[1, -1, 0] = 0.5j * amplitude
    field = SpectralVectorField(grid, coefficients, divergence_free=True)
    return ElsasserState(field, SpectralVectorField.zeros(grid), t)


class ErrorNormTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(16)
        self.reference = ElsasserState(
            random_divfree_field(self.grid, seed=1), random_divfree_field(self.grid, seed=2), t=0.5,
        )

    def test_identical_states(self):
        sample = error_norms(self.reference, self.reference)
        self.assertEqual(
            (sample.l2_eta, sample.l2_zeta, sample.h1_eta, sample.h1_zeta, sample.l2_u, sample.l2_b),
            (0.0,) * 6,
        )

    def test_zero_assimilated_state(self):
        sample = error_norms(self.reference, ElsasserState.zeros(self.grid, t=0.5))
        reference = error_norms(ElsasserState.zeros(self.grid, t=0.5), self.reference)
        self.assertEqual(sample.l2_eta, reference.l2_eta)
        self.assertEqual(sample.h1_zeta, reference.h1_zeta)

    def test_single_mode_difference(self):
        sample = error_norms(shear_state(self.grid, 2.0), ElsasserState.zeros(self.grid))
        self.assertAlmostEqual(sample.l2_eta, math.sqrt(2.0), places=14)
        self.assertAlmostEqual(sample.h1_eta, 2.0 * math.pi * math.sqrt(2.0), places=12)
        self.assertEqual(sample.l2_zeta, 0.0)
        # eta alone splits evenly between velocity and magnetic error
        self.assertAlmostEqual(sample.l2_u, sample.l2_b, places=14)

    def test_clock_mismatch(self):
        with self.assertRaises(DiagnosticError):
            error_norms(self.reference, ElsasserState.zeros(self.grid, t=0.6))


class ErrorSeriesTests(SimpleTestCase):
    def test_rejects_unordered_times(self):
        with self.assertRaises(DiagnosticError):
            ErrorSeries([0.0, 0.2, 0.1], [1, 1, 1], [1, 1, 1], [1, 1, 1], [1, 1, 1])

    def test_rejects_negative_norms(self):
        with self.assertRaises(DiagnosticError):
            ErrorSeries([0.0, 0.1], [1, -1], [1, 1], [1, 1], [1, 1])

    def test_csv_columns_and_exact_values(self):
        series = ErrorSeries([0.0, 0.1], [1.0, 0.1], [2.0, 0.2], [3.0, 0.3], [4.0, 1 / 3])
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'errors.csv')
            series.write_csv(path)
            with open(path) as handle:
                rows = list(csv.reader(handle))
        self.assertEqual(rows[0], ['t', 'l2_eta', 'l2_zeta', 'h1_eta', 'h1_zeta'])
        self.assertEqual(float(rows[2][4]), 1 / 3)


class RateFitTests(SimpleTestCase):
    def setUp(self):
        self.times = np.linspace(0.0, 5.0, 101)

    def test_exact_exponential(self):
        fit = fit_exponential_rate(self.times, np.exp(-3.0 * self.times))
        self.assertAlmostEqual(fit.rate, 3.0, delta=1e-6)
        self.assertGreater(fit.r_squared, 0.999999)

    def test_scaling_invariance(self):
        values = np.exp(-3.0 * self.times)
        self.assertAlmostEqual(
            fit_exponential_rate(self.times, 7.0 * values).rate,
            fit_exponential_rate(self.times, values).rate,
            places=10,
        )

    def test_constant_series(self):
        fit = fit_exponential_rate(self.times, np.full(self.times.shape, 0.3))
        self.assertAlmostEqual(fit.rate, 0.0, places=12)
        self.assertEqual(fit.r_squared, 1.0)

    def test_noisy_exponential(self):
        noise = np.exp(0.02 * np.random.default_rng(5).standard_normal(self.times.size))
        fit = fit_exponential_rate(self.times, np.exp(-2.0 * self.times) * noise)
        self.assertLess(abs(fit.rate - 2.0), 0.1)

    def test_r_squared_is_squared_correlation(self):
        noise = np.exp(0.2 * np.random.default_rng(6).standard_normal(self.times.size))
        values = np.exp(-2.0 * self.times) * noise
        fit = fit_exponential_rate(self.times, values, window=1.0)
        correlation = np.corrcoef(self.times, np.log(values))[0, 1]
        self.assertAlmostEqual(fit.r_squared, correlation ** 2, places=12)
        self.assertLess(fit.r_squared, 1.0)

    def test_zero_values_are_floored(self):
        values = np.zeros(self.times.shape)
        self.assertAlmostEqual(fit_exponential_rate(self.times, values).rate, 0.0, places=12)

    def test_too_few_samples(self):
        with self.assertRaises(DiagnosticError):
            fit_exponential_rate(self.times[:15], np.exp(-self.times[:15]))

    def test_invalid_window(self):
        with self.assertRaises(DiagnosticError):
            fit_exponential_rate(self.times, np.exp(-self.times), window=0)


class ConvergenceTests(SimpleTestCase):
    def setUp(self):
        self.times = np.linspace(0.0, 10.0, 1001)

    def test_decay_segment_stops_at_roundoff(self):
        values = np.maximum(np.exp(-5.0 * self.times), 1e-16)
        segment_t, _ = decay_segment(self.times, values)
        self.assertLess(segment_t[-1], 13 * math.log(10) / 5 + 0.02)

    def test_onset_time(self):
        self.assertAlmostEqual(onset_time(self.times, np.exp(-self.times)), 4.61, places=9)
        self.assertIsNone(onset_time(self.times, np.ones(self.times.shape)))

    def test_verdict_on_exponential(self):
        verdict = convergence_verdict(self.times, np.exp(-3.0 * self.times))
        self.assertTrue(verdict.converged)
        self.assertAlmostEqual(verdict.rate, 3.0, places=6)

    def test_verdict_on_fast_collapse(self):
        times = np.linspace(0.0, 10.0, 101)
        values = np.maximum(np.exp(-20.0 * times), 1e-17)
        verdict = convergence_verdict(times, values)
        self.assertTrue(verdict.converged)
        self.assertAlmostEqual(verdict.rate, 20.0, places=6)

    def test_verdict_on_stalled_error(self):
        values = 0.5 + 0.5 * np.exp(-self.times)
        verdict = convergence_verdict(self.times, values)
        self.assertFalse(verdict.converged)
        self.assertGreater(verdict.terminal_ratio, 1e-2)

    def test_trend(self):
        self.assertTrue(trend_decreasing(self.times, np.exp(-self.times)))
        self.assertFalse(trend_decreasing(self.times, 1.0 + self.times))


class ThresholdTests(SimpleTestCase):
    def setUp(self):
        self.params = unit_gap_params()
        self.constants = default_constants(c_L=1.0, c1=0.5, c2=0.4, c3=0.2)

    def test_full_observation_gain(self):
        self.assertEqual(minimum_gain(TheoremId.THM_ALL, 0, 1.0, self.constants), 0.0)
        self.assertAlmostEqual(minimum_gain(TheoremId.THM_ALL, 1, 1.0, self.constants), 2 * math.pi ** 2)
        self.assertAlmostEqual(minimum_gain(TheoremId.THM_ALL, 2, 1.0, self.constants), 8 * math.pi ** 2)

    def test_full_observation_spacing_at_margin(self):
        report = theorem_thresholds(TheoremId.THM_ALL, 1, self.params, self.constants)
        self.assertAlmostEqual(report.mu, 2 * math.pi ** 2 * 1.01)
        self.assertAlmostEqual(report.h_max, 2.0 / math.sqrt(2 * math.pi ** 2 * 1.01), places=14)

    def test_gain_scales_with_grashof_squared(self):
        ratio = (
            minimum_gain(TheoremId.THM_ALL, 2, 1.0, self.constants)
            / minimum_gain(TheoremId.THM_ALL, 1, 1.0, self.constants)
        )
        self.assertAlmostEqual(ratio, 4.0, places=14)

    def test_first_component_gain(self):
        c = 1.5
        c_tilde = math.log(250 * 4 * (20 * math.pi ** 2 + 1)) / 8
        C = 81 / 4
        expected = {
            1: 32 * math.pi ** 2 * c ** 2 * (c_tilde + C),
            2: 32 * math.pi ** 2 * c ** 2 * (c_tilde + 2 * math.log(2) + 16 * C) * 4,
        }
        for G, value in expected.items():
            self.assertAlmostEqual(minimum_gain(TheoremId.THM_1ST, G, 1.0, self.constants) / value, 1.0, places=12)

    def test_v_only_gain(self):
        expected = {1: 25 * math.pi ** 2 / 16, 2: 16 * math.pi ** 2}
        for G, value in expected.items():
            self.assertAlmostEqual(minimum_gain(TheoremId.THM_V, G, 1.0, self.constants) / value, 1.0, places=12)

    def test_type2_gain_and_spacing(self):
        c_tilde = math.log(250 * 4 * (20 * math.pi ** 2 + 1)) / 8
        expected = 2000 * 4 * (20 * math.pi ** 2 + 1) * 8 * math.exp(40.5) * (c_tilde + math.log(2) + 81 / 4)
        mu_min = minimum_gain(TheoremId.T2_THM_1, 1, 1.0, self.constants)
        self.assertAlmostEqual(mu_min / expected, 1.0, places=12)
        self.assertAlmostEqual(
            maximum_spacing(TheoremId.T2_THM_1, 100.0, 1, 1.0, self.constants),
            math.sqrt(1.0 / (2 * 100.0 * 0.2)),
        )

    def test_type2_overflow_is_infinite(self):
        self.assertEqual(minimum_gain(TheoremId.T2_THM_1, 4, 1.0, self.constants), math.inf)

    def test_zero_grashof_sentinels(self):
        for theorem_id in TheoremId.values:
            report = theorem_thresholds(theorem_id, 0, self.params, self.constants)
            self.assertEqual(report.mu_min, 0.0)
            self.assertEqual(report.h_max, math.inf)

    def test_h1_tightening(self):
        for h1, l2 in ((TheoremId.THM_H1_ALL, TheoremId.THM_ALL),
                       (TheoremId.THM_H1_1ST, TheoremId.THM_1ST),
                       (TheoremId.THM_H1_V, TheoremId.THM_V)):
            ratio = (
                maximum_spacing(l2, 40.0, 1, 1.0, self.constants)
                / maximum_spacing(h1, 40.0, 1, 1.0, self.constants)
            )
            self.assertAlmostEqual(ratio, 2 * math.sqrt(2), places=12)
        self.assertAlmostEqual(H1_TIGHTENING, 2 * math.sqrt(2))

    def test_monotonicity(self):
        grashof = [0.1, 0.5, 1.0, 2.0, 4.0]
        gains = [1.0, 10.0, 100.0, 1000.0]
        for theorem_id in TheoremId.values:
            mu_min = [minimum_gain(theorem_id, G, 1.0, self.constants) for G in grashof]
            self.assertEqual(mu_min, sorted(mu_min), theorem_id)
            h_max = [maximum_spacing(theorem_id, mu, 1.0, 1.0, self.constants) for mu in gains]
            self.assertEqual(h_max, sorted(h_max, reverse=True), theorem_id)

    def test_determining_spacing(self):
        h_max = maximum_spacing(TheoremId.DET_INTERP, 1.0, 1, 1.0, self.constants)
        self.assertAlmostEqual(h_max, math.sqrt(2) / math.pi, places=14)

    def test_missing_interpolant_constant(self):
        with self.assertRaises(ThresholdError):
            theorem_thresholds(TheoremId.THM_ALL, 1, self.params, default_constants())

    def test_unknown_theorem(self):
        with self.assertRaises(ThresholdError):
            theorem_thresholds('ThmNone', 1, self.params, self.constants)

    def test_admits(self):
        report = theorem_thresholds(TheoremId.THM_ALL, 1, self.params, self.constants)
        self.assertTrue(report.admits(report.mu, report.h_max / 2))
        self.assertFalse(report.admits(report.mu_min / 2, 1e-6))

    def test_constants_carry_provenance(self):
        constants = default_constants(c_B=2.0)
        self.assertEqual(constants.c_B.provenance, 'configured')
        self.assertEqual(constants.c.value, 3.0)
        self.assertTrue(constants.c.provenance.startswith('derived'))
        self.assertEqual(constants.c_tilde_1st.value, constants.c_tilde_t2.value)
        report = theorem_thresholds(TheoremId.THM_V, 1, self.params, self.constants)
        self.assertEqual(set(report.constants_used), {'c_L', 'c1'})
        self.assertEqual(report.constants_used['c1']['provenance'], 'configured')

    def test_theorems_for_masks(self):
        self.assertEqual(theorems_for('all', 1), (TheoremId.THM_ALL, TheoremId.THM_H1_ALL))
        self.assertEqual(theorems_for('first_component', 2), (TheoremId.T2_THM_1,))
        self.assertEqual(theorems_for('b_only', 1), ())


class GronwallTests(SimpleTestCase):
    def setUp(self):
        self.times = np.linspace(0.0, 10.0, 1001)

    def test_positive_constant(self):
        report = gronwall_condition_check(self.times, np.full(self.times.shape, 2.5), 1.0)
        self.assertAlmostEqual(report.min_average, 2.5, places=12)
        self.assertEqual(report.max_negative_average, 0.0)
        self.assertTrue(report.holds)

    def test_alternating_sign(self):
        psi = np.where(np.arange(self.times.size) % 2 == 0, 1.0, -1.0)
        report = gronwall_condition_check(self.times, psi, 1.0)
        self.assertEqual(report.min_average, 0.0)
        self.assertFalse(report.liminf_positive)
        self.assertTrue(report.limsup_finite)
        self.assertFalse(report.holds)

    def test_run_shorter_than_three_windows(self):
        with self.assertRaises(DiagnosticError):
            gronwall_condition_check(self.times[:201], np.ones(201), 1.0)

    def test_psi_builders(self):
        params = unit_gap_params()
        constants = default_constants(c_L=1.0)
        enstrophy = np.array([0.0, 1.0])
        assert_allclose(psi_all(enstrophy, 5.0, params, constants), [5.0, 4.0])
        assert_allclose(psi_generalized(enstrophy, 5.0, params, constants), [2.5, 1.5])
        # G = 0: delta = 1, gamma = 1/2
        assert_allclose(psi_v_only(enstrophy, 5.0, 0.0, params, constants), [5.0, 4.5])


class IntBoundTests(SimpleTestCase):
    def setUp(self):
        self.params = unit_gap_params()
        self.times = np.linspace(0.0, 5.0, 501)

    def trajectory(self, enstrophy, times=None):
        times = self.times if times is None else times
        half = np.sqrt(np.broadcast_to(enstrophy, times.shape) / 2.0)
        zeros = np.zeros(times.shape)
        return Trajectory(times, zeros, zeros, half, half, zeros, zeros, self.params.alpha_minus_beta)

    def test_constant_enstrophy_within_bound(self):
        report = check_int_bound(self.trajectory(15.0), 1.0, self.params)
        # T = 1 / pi^2 snaps to 10 samples of 0.01
        self.assertAlmostEqual(report.worst_integral, 1.5, places=12)
        self.assertAlmostEqual(report.bound, 2.0, places=14)
        self.assertTrue(report.passed)
        self.assertGreater(report.margin, 0)

    def test_halved_grashof_fails(self):
        self.assertFalse(check_int_bound(self.trajectory(15.0), 0.5, self.params).passed)

    def test_zero_forcing_edge(self):
        report = check_int_bound(self.trajectory(0.0), 0.0, self.params)
        self.assertEqual(report.bound, 0.0)
        self.assertTrue(report.passed)

    def test_too_few_samples_per_window(self):
        coarse = np.linspace(0.0, 5.0, 51)
        with self.assertRaises(DiagnosticError):
            check_int_bound(self.trajectory(1.0, coarse), 1.0, self.params)
