import math
from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from core.exceptions import CflViolationError, DiagnosticError, InvalidParameterError
from spectral.fields import Grid, SpectralVectorField
from spectral.operators import (
    advection, h1_seminorm, inner_product, l2_norm, laplacian, leray_project, random_divfree_field,
)

from .budget import (
    SpinUpMode, SpinUpPolicy, TrajectoryRecorder, absorbing_ball_report, energy_budget, spin_up,
)
from .dynamics import ElsasserState, from_elsasser, imex_step, mhd_rhs, to_elsasser
from .forcing import (
    Envelope, ForcingKind, ForcingSpec, Perturbation, dimensional_grashof_number, grashof_number,
    kolmogorov_forcing, nondimensionalize, redimensionalize_forcing,
)
from .params import DimensionalParams, derive_elsasser_params


def shear_mode(grid, amplitude=1.0):
    """(0, amplitude sin 2 pi x): divergence-free, one conjugate pair"""
    coefficients = np.zeros((2,) + grid.shape, dtype=complex)
    coefficients[1, 1, 0] = -0.5j * amplitude
    coefficients[1, -1, 0] = 0.5j * amplitude
    return SpectralVectorField(grid, coefficients, divergence_free=True)


def random_state(grid, seed, l2=0.3, k_max=3):
    return ElsasserState(
        random_divfree_field(grid, seed=seed, energy_spectrum_decay=2.0, k_max=k_max, l2=l2),
        random_divfree_field(grid, seed=seed + 1000, energy_spectrum_decay=2.0, k_max=k_max, l2=l2),
    )


class ElsasserParamsTests(SimpleTestCase):
    def test_symmetric_case(self):
        params = derive_elsasser_params(1, 1)
        self.assertEqual((params.alpha, params.beta, params.swapped), (1.0, 0.0, False))

    def test_magnetic_reynolds_larger(self):
        params = derive_elsasser_params(1, 2)
        self.assertAlmostEqual(params.alpha, 0.75, places=14)
        self.assertAlmostEqual(params.beta, 0.25, places=14)
        self.assertFalse(params.swapped)
        self.assertAlmostEqual(params.alpha_minus_beta, 0.5, places=14)

    def test_fluid_reynolds_larger_swaps(self):
        params = derive_elsasser_params(2, 1)
        self.assertAlmostEqual(params.alpha, 0.75, places=14)
        self.assertAlmostEqual(params.beta, 0.25, places=14)
        self.assertTrue(params.swapped)
        self.assertEqual(params.advection_sign, -1.0)

    def test_nonpositive_input(self):
        for re, rm in ((0, 1), (1, -2), (float('nan'), 1)):
            with self.assertRaises(InvalidParameterError):
                derive_elsasser_params(re, rm)


class NondimensionalizationTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(16)

    def test_reynolds_numbers(self):
        dimensional = DimensionalParams(nu=0.1, lam=0.2, rho0=1, mu0=1, length=1, velocity=1)
        params, _ = nondimensionalize(
            dimensional, SpectralVectorField.zeros(self.grid), SpectralVectorField.zeros(self.grid)
        )
        self.assertAlmostEqual(params.Re, 10.0)
        self.assertAlmostEqual(params.Rm, 5.0)

    def test_identity_scaling(self):
        dimensional = DimensionalParams(nu=1, lam=1, rho0=1, mu0=1, length=1, velocity=1)
        params, _ = nondimensionalize(
            dimensional, SpectralVectorField.zeros(self.grid), SpectralVectorField.zeros(self.grid)
        )
        self.assertEqual((params.Re, params.Rm), (1.0, 1.0))

    def test_rejects_nonpositive_parameters(self):
        with self.assertRaises(InvalidParameterError):
            DimensionalParams(nu=0.1, lam=0.0, rho0=1, mu0=1, length=1, velocity=1)

    def test_forcing_round_trip_and_scaling(self):
        dimensional = DimensionalParams(nu=0.1, lam=0.3, rho0=2.0, mu0=0.5, length=3.0, velocity=2.0)
        f1 = random_divfree_field(self.grid, seed=1, l2=1.5)
        g1 = random_divfree_field(self.grid, seed=2, l2=0.5)
        params, forcing = nondimensionalize(dimensional, f1, g1)
        self.assertTrue(params.swapped)
        back_f1, back_g1 = redimensionalize_forcing(dimensional, forcing, params)
        assert_allclose(back_f1.coefficients, f1.coefficients, atol=1e-13)
        assert_allclose(back_g1.coefficients, g1.coefficients, atol=1e-13)
        # swapped convention: f - g = 2 f1
        f_scale = dimensional.length / dimensional.velocity ** 2
        ratio = l2_norm((forcing.f - forcing.g) / 2) / l2_norm(f1)
        self.assertAlmostEqual(ratio, f_scale, places=12)

    def test_dimensional_grashof_matches_elsasser_form(self):
        dimensional = DimensionalParams(nu=0.2, lam=0.4, rho0=1.5, mu0=0.8, length=2.0, velocity=1.5)
        f1 = random_divfree_field(self.grid, seed=3, l2=0.7)
        g1 = random_divfree_field(self.grid, seed=4, l2=0.9)
        params, forcing = nondimensionalize(dimensional, f1, g1)
        self.assertAlmostEqual(
            dimensional_grashof_number(dimensional, f1, g1) / grashof_number(forcing, params),
            1.0, places=12,
        )


class ElsasserVariablesTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(16)
        self.u = random_divfree_field(self.grid, seed=1)
        self.b = random_divfree_field(self.grid, seed=2)

    def test_zero_magnetic_field(self):
        v, w = to_elsasser(self.u, SpectralVectorField.zeros(self.grid))
        np.testing.assert_array_equal(v.coefficients, self.u.coefficients)
        np.testing.assert_array_equal(w.coefficients, self.u.coefficients)

    def test_zero_velocity(self):
        v, w = to_elsasser(SpectralVectorField.zeros(self.grid), self.b)
        np.testing.assert_array_equal(v.coefficients, self.b.coefficients)
        np.testing.assert_array_equal(w.coefficients, -self.b.coefficients)

    def test_round_trip(self):
        for swapped in (False, True):
            u, b = from_elsasser(*to_elsasser(self.u, self.b, swapped), swapped)
            assert_allclose(u.coefficients, self.u.coefficients, rtol=0, atol=1e-15)
            assert_allclose(b.coefficients, self.b.coefficients, rtol=0, atol=1e-15)

    def test_grid_mismatch(self):
        with self.assertRaises(ValueError):
            to_elsasser(self.u, SpectralVectorField.zeros(Grid(8)))


class RightHandSideTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(16)
        self.params = derive_elsasser_params(2, 5)

    def test_zero_state_zero_forcing(self):
        dv, dw = mhd_rhs(ElsasserState.zeros(self.grid), self.params, ForcingSpec.zero(self.grid))
        self.assertEqual(l2_norm(dv) + l2_norm(dw), 0.0)

    def test_single_mode_is_linear(self):
        v = shear_mode(self.grid)
        state = ElsasserState(v, SpectralVectorField.zeros(self.grid))
        dv, dw = mhd_rhs(state, self.params, ForcingSpec.zero(self.grid))
        assert_allclose(dv.coefficients, (self.params.alpha * laplacian(v)).coefficients, atol=1e-12)
        assert_allclose(dw.coefficients, (self.params.beta * laplacian(v)).coefficients, atol=1e-12)

    def test_energy_inequality_on_random_states(self):
        forcing = kolmogorov_forcing(self.grid, self.params, 1.3, 0.7)
        for seed in range(5):
            state = random_state(self.grid, seed, l2=1.0, k_max=5)
            dv, dw = mhd_rhs(state, self.params, forcing)
            left = (
                inner_product(dv, state.v) + inner_product(dw, state.w)
                + self.params.alpha_minus_beta * (h1_seminorm(state.v) ** 2 + h1_seminorm(state.w) ** 2)
            )
            right = inner_product(forcing.f, state.v) + inner_product(forcing.g, state.w)
            self.assertLessEqual(left, right + 1e-8)

    def test_matches_primitive_equations(self):
        u = random_divfree_field(self.grid, seed=11, k_max=5, l2=1.0)
        b = random_divfree_field(self.grid, seed=12, k_max=5, l2=1.0)
        zero = ForcingSpec.zero(self.grid)
        for Re, Rm in ((2, 1), (1, 2), (3, 3)):
            with self.subTest(Re=Re, Rm=Rm):
                params = derive_elsasser_params(Re, Rm)
                v, w = to_elsasser(u, b, params.swapped)
                du, db = from_elsasser(*mhd_rhs(ElsasserState(v, w), params, zero), params.swapped)
                expected_u = leray_project(laplacian(u) * (1.0 / Re) - advection(u, u) + advection(b, b))
                expected_b = leray_project(laplacian(b) * (1.0 / Rm) - advection(u, b) + advection(b, u))
                scale = l2_norm(expected_u) + l2_norm(expected_b)
                self.assertLess(l2_norm(du - expected_u), 1e-12 * scale)
                self.assertLess(l2_norm(db - expected_b), 1e-12 * scale)

    def test_outputs_divergence_free(self):
        state = random_state(self.grid, 7, l2=1.0, k_max=5)
        forcing = kolmogorov_forcing(self.grid, self.params, 1.0, 1.0)
        for term in mhd_rhs(state, self.params, forcing):
            self.assertTrue(term.is_divergence_free())


class ImexStepTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(16)

    def test_pure_diffusion_ratio(self):
        params = derive_elsasser_params(4, 4)
        dt = 0.01
        state = ElsasserState(shear_mode(self.grid), SpectralVectorField.zeros(self.grid))
        expected = (1 - 2 * math.pi ** 2 * params.alpha * dt) / (1 + 2 * math.pi ** 2 * params.alpha * dt)
        forcing = ForcingSpec.zero(self.grid)
        for _ in range(3):
            following = imex_step(state, params, forcing, dt)
            ratio = following.v.coefficients[1, 1, 0] / state.v.coefficients[1, 1, 0]
            self.assertAlmostEqual(ratio.real, expected, places=13)
            self.assertAlmostEqual(ratio.imag, 0.0, places=13)
            state = following

    def test_zero_state_stays_zero(self):
        params = derive_elsasser_params(3, 7)
        state = imex_step(ElsasserState.zeros(self.grid), params, ForcingSpec.zero(self.grid), 0.1)
        self.assertEqual(l2_norm(state.v) + l2_norm(state.w), 0.0)
        self.assertAlmostEqual(state.t, 0.1)

    def test_cfl_violation_reports_admissible_dt(self):
        params = derive_elsasser_params(10, 10)
        state = random_state(self.grid, 3, l2=5.0)
        with self.assertRaises(CflViolationError) as raised:
            imex_step(state, params, ForcingSpec.zero(self.grid), 1.0)
        self.assertLess(raised.exception.admissible_dt, 1.0)
        imex_step(state, params, ForcingSpec.zero(self.grid), raised.exception.admissible_dt)

    def test_preserves_divergence_free_and_mean_zero(self):
        params = derive_elsasser_params(20, 10)
        forcing = kolmogorov_forcing(self.grid, params, 1.0, 0.5)
        state = random_state(self.grid, 4)
        for _ in range(20):
            state = imex_step(state, params, forcing, 0.01)
            for field in (state.v, state.w):
                self.assertTrue(field.is_divergence_free(tolerance=1e-10))
                self.assertEqual(field.coefficients[0, 0, 0], 0)
                self.assertEqual(field.coefficients[1, 0, 0], 0)

    def test_second_order_in_time(self):
        params = derive_elsasser_params(40, 50)
        forcing = kolmogorov_forcing(self.grid, params, 0.5, 0.3)
        initial = random_state(self.grid, 5)
        horizon = 0.4

        def solve(dt):
            state = initial
            for _ in range(int(round(horizon / dt))):
                state = imex_step(state, params, forcing, dt)
            return np.concatenate([state.v.coefficients.ravel(), state.w.coefficients.ravel()])

        coarse, medium, fine = solve(0.02), solve(0.01), solve(0.005)
        order = math.log2(np.linalg.norm(coarse - medium) / np.linalg.norm(medium - fine))
        self.assertGreaterEqual(order, 1.9)

    def test_unforced_energy_is_nonincreasing(self):
        params = derive_elsasser_params(10, 10)
        forcing = ForcingSpec.zero(self.grid)
        state = random_state(self.grid, 6)
        energy = l2_norm(state.v) ** 2 + l2_norm(state.w) ** 2
        for _ in range(100):
            state = imex_step(state, params, forcing, 0.005)
            current = l2_norm(state.v) ** 2 + l2_norm(state.w) ** 2
            self.assertLessEqual(current, energy * (1 + 1e-12))
            energy = current


class GrashofNumberTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(16)

    def test_zero_forcing(self):
        params = derive_elsasser_params(3, 4)
        self.assertEqual(grashof_number(ForcingSpec.zero(self.grid), params), 0.0)

    def test_steady_value(self):
        params = derive_elsasser_params(10, 10)
        amplitude = math.pi ** 2 / math.sqrt(2)
        forcing = kolmogorov_forcing(self.grid, params, amplitude, amplitude)
        self.assertAlmostEqual(l2_norm(forcing.f + forcing.g), math.pi ** 2, places=12)
        self.assertAlmostEqual(l2_norm(forcing.f - forcing.g), math.pi ** 2, places=12)
        self.assertAlmostEqual(grashof_number(forcing, params), 100.0, places=10)

    def test_decaying_modulation_uses_limsup(self):
        params = derive_elsasser_params(5, 5)
        envelope = Envelope(amplitude=3.0, frequency=1.0, offset=0.5, decay=1.0)
        steady = kolmogorov_forcing(self.grid, params, 1.0, 0.0)
        modulated = kolmogorov_forcing(self.grid, params, 1.0, 0.0, modulation=envelope)
        self.assertEqual(modulated.kind, ForcingKind.MODULATED)
        self.assertAlmostEqual(grashof_number(modulated, params), 0.5 * grashof_number(steady, params))
        late = max(abs(envelope(t)) for t in np.linspace(40.0, 41.0, 201))
        self.assertAlmostEqual(late, envelope.limsup_abs(), places=10)

    def test_undamped_oscillation_limsup(self):
        self.assertEqual(Envelope(amplitude=2.0, frequency=0.5, offset=-1.0).limsup_abs(), 3.0)
        self.assertEqual(Envelope(amplitude=2.0, frequency=0.0, offset=-1.0).limsup_abs(), 1.0)

    def test_transients_are_excluded(self):
        params = derive_elsasser_params(5, 5)
        base = kolmogorov_forcing(self.grid, params, 1.0, 0.5)
        bump = Perturbation(random_divfree_field(self.grid, seed=3), Envelope.decaying(1.0, 4.0))
        perturbed = base.with_transients(transient_f=bump)
        self.assertEqual(grashof_number(perturbed, params), grashof_number(base, params))
        self.assertGreater(perturbed.squared_norm_at(0.0), base.squared_norm_at(0.0))

    def test_transients_must_decay(self):
        params = derive_elsasser_params(5, 5)
        base = kolmogorov_forcing(self.grid, params, 1.0, 0.5)
        steady_bump = Perturbation(random_divfree_field(self.grid, seed=3), Envelope())
        with self.assertRaises(InvalidParameterError):
            base.with_transients(transient_g=steady_bump)


class EnergyBudgetTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(16)

    def record(self, state, params, forcing, dt, steps):
        recorder = TrajectoryRecorder(params, forcing)
        recorder.record(state)
        states = [state]
        for _ in range(steps):
            state = imex_step(state, params, forcing, dt)
            recorder.record(state)
            states.append(state)
        return recorder.trajectory(), states

    def test_unforced_decay_has_nonpositive_residuals(self):
        params = derive_elsasser_params(5, 8)
        trajectory, _ = self.record(random_state(self.grid, 1), params, ForcingSpec.zero(self.grid), 0.01, 50)
        budget = energy_budget(trajectory)
        self.assertTrue(budget.passed)
        self.assertTrue(np.all(budget.residuals[[0, -1]] <= 1e-12))

    def test_forced_run_within_tolerance(self):
        params = derive_elsasser_params(5, 5)
        forcing = kolmogorov_forcing(self.grid, params, 2.0, 1.0)
        trajectory, _ = self.record(random_state(self.grid, 2), params, forcing, 0.01, 100)
        self.assertTrue(energy_budget(trajectory).passed)

    def test_sampled_rate_tracks_instantaneous_rate(self):
        params = derive_elsasser_params(5, 5)
        forcing = kolmogorov_forcing(self.grid, params, 2.0, 1.0)
        trajectory, _ = self.record(random_state(self.grid, 4), params, forcing, 0.002, 100)
        budget = energy_budget(trajectory)
        scale = np.max(np.abs(trajectory.energy_rate))
        self.assertLess(budget.rate_mismatch, 5e-2 * scale)

    def test_step_with_wrong_forcing_breaks_budget(self):
        params = derive_elsasser_params(1, 1)
        forcing = kolmogorov_forcing(self.grid, params, 1.0, 0.0)
        recorder = TrajectoryRecorder(params, forcing)
        state = ElsasserState(SpectralVectorField.zeros(self.grid), SpectralVectorField.zeros(self.grid))
        recorder.record(state)
        for _ in range(100):
            state = imex_step(state, params, forcing.scaled(3.0), 0.01)
            recorder.record(state)
        budget = energy_budget(recorder.trajectory())
        self.assertFalse(budget.passed)
        self.assertGreater(budget.as_dict()['violations'], 50)

    def test_energy_jump_between_samples_breaks_budget(self):
        params = derive_elsasser_params(5, 5)
        trajectory, _ = self.record(random_state(self.grid, 5), params, ForcingSpec.zero(self.grid), 0.01, 20)
        l2_v = trajectory.l2_v.copy()
        l2_v[10:] *= 1.5
        jumped = replace(trajectory, l2_v=l2_v)
        self.assertTrue(energy_budget(trajectory).passed)
        self.assertFalse(energy_budget(jumped).passed)
        self.assertIn(9, energy_budget(jumped).violations)

    def test_single_mode_matches_dissipation_identity(self):
        params = derive_elsasser_params(1, 2)
        state = ElsasserState(shear_mode(self.grid, 0.8), SpectralVectorField.zeros(self.grid))
        trajectory, states = self.record(state, params, ForcingSpec.zero(self.grid), 0.002, 20)
        kappa = 4 * math.pi ** 2 * self.grid.k_squared
        expected = []
        for sample in states:
            v, w = sample.v.coefficients, sample.w.coefficients
            cross = float(np.sum(kappa * np.real(v * np.conj(w))))
            enstrophy = h1_seminorm(sample.v) ** 2 + h1_seminorm(sample.w) ** 2
            expected.append(-(params.alpha + params.beta) * enstrophy - 4 * params.beta * cross)
        assert_allclose(
            energy_budget(trajectory).residuals, expected, rtol=0, atol=2e-2 * np.max(np.abs(expected))
        )
        self.assertAlmostEqual(
            trajectory.residuals()[0], -(params.alpha + params.beta) * trajectory.enstrophy[0], places=10
        )

    def test_needs_three_samples(self):
        params = derive_elsasser_params(5, 5)
        trajectory, _ = self.record(random_state(self.grid, 3), params, ForcingSpec.zero(self.grid), 0.01, 1)
        with self.assertRaises(DiagnosticError):
            energy_budget(trajectory)


class SpinUpTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(16)
        self.params = derive_elsasser_params(5, 5)
        self.forcing = kolmogorov_forcing(self.grid, self.params, 1.0, 0.0)

    def test_none_only_resets_the_clock(self):
        state = random_state(self.grid, 1)
        state = imex_step(state, self.params, self.forcing, 0.01)
        spun, report = spin_up(state, self.params, self.forcing, 0.01, SpinUpPolicy(mode=SpinUpMode.NONE))
        self.assertEqual(spun.t, 0.0)
        self.assertIsNone(spun.tendency)
        np.testing.assert_array_equal(spun.v.coefficients, state.v.coefficients)
        self.assertEqual(report.duration, 0.0)

    def test_fixed_duration(self):
        policy = SpinUpPolicy(mode=SpinUpMode.FIXED, fixed_time=0.5)
        _, report = spin_up(random_state(self.grid, 2), self.params, self.forcing, 0.01, policy)
        self.assertAlmostEqual(report.duration, 0.5)

    def test_settles_onto_laminar_state_inside_absorbing_ball(self):
        policy = SpinUpPolicy(mode=SpinUpMode.SETTLE, max_time=40.0)
        spun, report = spin_up(random_state(self.grid, 3), self.params, self.forcing, 0.01, policy)
        self.assertTrue(report.settled)
        self.assertEqual(spun.t, 0.0)
        self.assertTrue(absorbing_ball_report(spun, self.params, self.forcing).inside)

    def test_unknown_mode(self):
        with self.assertRaises(InvalidParameterError):
            SpinUpPolicy(mode='forever')
