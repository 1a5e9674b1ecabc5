import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from core.exceptions import DivergenceError, NumericalInstabilityError, StiffnessError
from diagnostics.series import trend_decreasing
from mhd.budget import SpinUpMode, SpinUpPolicy
from mhd.dynamics import ElsasserState, integrate
from mhd.forcing import Envelope, ForcingSpec, Perturbation, kolmogorov_forcing
from mhd.params import derive_elsasser_params
from observation.interpolants import InterpolantKind, InterpolantSpec, ObservationMask
from spectral.fields import Grid, SpectralVectorField
from spectral.operators import random_divfree_field

from .assimilation import (
    AssimilationPair, InitMode, NudgingConfig, ReferenceInit, RunSpec, coupled_step, init_assimilation,
    nudging_term, perturbation_forcing, run_assimilation,
)

NO_SPIN_UP = SpinUpPolicy(mode=SpinUpMode.NONE)


def random_state(grid, seed, l2=0.3, t=0.0):
    return ElsasserState(
        random_divfree_field(grid, seed=seed, energy_spectrum_decay=2.0, k_max=3, l2=l2),
        random_divfree_field(grid, seed=seed + 1, energy_spectrum_decay=2.0, k_max=3, l2=l2),
        t,
    )


def spectral(h=0.25):
    return InterpolantSpec(InterpolantKind.SPECTRAL_PROJECTION, h)


class NudgingConfigTests(SimpleTestCase):
    def test_rejects_negative_gain(self):
        with self.assertRaises(ValueError):
            NudgingConfig(mu=-1.0, interpolant=spectral())

    def test_rejects_unknown_mask(self):
        with self.assertRaises(ValueError):
            NudgingConfig(mu=1.0, interpolant=spectral(), mask='u_and_b')

    def test_only_spectral_projection_is_implicit(self):
        self.assertTrue(NudgingConfig(1.0, spectral()).implicit)
        self.assertFalse(NudgingConfig(1.0, InterpolantSpec(InterpolantKind.VOLUME_AVERAGE, 0.25)).implicit)


class InitAssimilationTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(16)
        self.reference = random_state(self.grid, 1, t=0.0)
        self.config = NudgingConfig(mu=5.0, interpolant=spectral())

    def test_default_is_zero(self):
        pair = init_assimilation(self.reference, self.config)
        self.assertEqual(np.abs(pair.assimilated.v.coefficients).max(), 0.0)
        self.assertEqual(np.abs(pair.assimilated.w.coefficients).max(), 0.0)

    def test_copy_has_zero_error(self):
        pair = init_assimilation(self.reference, self.config, InitMode.COPY)
        self.assertEqual(pair.errors().l2_eta, 0.0)

    def test_custom_divergence_free_fields(self):
        custom = (random_divfree_field(self.grid, seed=9), random_divfree_field(self.grid, seed=10))
        pair = init_assimilation(self.reference, self.config, InitMode.CUSTOM, custom)
        assert_allclose(pair.assimilated.v.coefficients, custom[0].coefficients)

    def test_custom_compressible_field_rejected(self):
        coefficients = np.zeros((2,) + self.grid.shape, dtype=complex)
        coefficients[0, 1, 0] = coefficients[0, -1, 0] = 0.5
        compressible = SpectralVectorField(self.grid, coefficients)
        with self.assertRaises(DivergenceError):
            init_assimilation(
                self.reference, self.config, InitMode.CUSTOM,
                (compressible, SpectralVectorField.zeros(self.grid)),
            )

    def test_clock_mismatch(self):
        with self.assertRaises(ValueError):
            AssimilationPair(self.reference, ElsasserState.zeros(self.grid, t=1.0))


class NudgingTermTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(16)
        self.reference = random_state(self.grid, 3)
        self.assimilated = random_state(self.grid, 7)

    def test_synchronized_states_give_no_feedback(self):
        config = NudgingConfig(mu=5.0, interpolant=spectral())
        for term in nudging_term(config, self.reference, self.reference):
            self.assertEqual(np.abs(term.coefficients).max(), 0.0)

    def test_zero_gain_gives_no_feedback(self):
        config = NudgingConfig(mu=0.0, interpolant=spectral())
        for term in nudging_term(config, self.reference, self.assimilated):
            self.assertEqual(np.abs(term.coefficients).max(), 0.0)

    def test_full_spectral_projection_returns_scaled_difference(self):
        # k_max = 3 fields sit inside the retained window of h = 1/4
        config = NudgingConfig(mu=3.0, interpolant=spectral(0.25))
        feedback_v, feedback_w = nudging_term(config, self.reference, self.assimilated)
        expected_v = 3.0 * (self.reference.v.coefficients - self.assimilated.v.coefficients)
        expected_w = 3.0 * (self.reference.w.coefficients - self.assimilated.w.coefficients)
        assert_allclose(feedback_v.coefficients, expected_v, rtol=0, atol=1e-14)
        assert_allclose(feedback_w.coefficients, expected_w, rtol=0, atol=1e-14)

    def test_feedback_is_divergence_free(self):
        config = NudgingConfig(
            mu=2.0, interpolant=InterpolantSpec(InterpolantKind.NODAL_BILINEAR, 0.25),
            mask=ObservationMask.FIRST_COMPONENT,
        )
        for term in nudging_term(config, self.reference, self.assimilated):
            self.assertTrue(SpectralVectorField(self.grid, term.coefficients).is_divergence_free())

    def test_observation_perturbation_enters_feedback(self):
        eps = Perturbation(random_divfree_field(self.grid, seed=4, k_max=3), Envelope.decaying(1.0))
        config = NudgingConfig(mu=1.0, interpolant=spectral(), eps1=eps)
        feedback_v, _ = nudging_term(config, self.reference, self.reference)
        assert_allclose(feedback_v.coefficients, eps.field.coefficients, rtol=0, atol=1e-14)


class CoupledStepTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(16)
        self.params = derive_elsasser_params(5, 5)
        self.forcing = kolmogorov_forcing(self.grid, self.params, 0.5, 0.3)

    def run_pair(self, config, pair, steps, dt=0.01):
        for _ in range(steps):
            pair = coupled_step(pair, self.params, self.forcing, config, dt)
        return pair

    def test_synchronized_start_stays_synchronized(self):
        reference = random_state(self.grid, 11)
        configs = [
            NudgingConfig(50.0, spectral(), mask)
            for mask in (ObservationMask.ALL, ObservationMask.FIRST_COMPONENT, ObservationMask.V_ONLY)
        ] + [NudgingConfig(20.0, InterpolantSpec(InterpolantKind.VOLUME_AVERAGE, 0.25))]
        for config in configs:
            pair = self.run_pair(config, init_assimilation(reference, config, InitMode.COPY), 1000)
            sample = pair.errors()
            self.assertLessEqual(max(sample.l2_eta, sample.l2_zeta), 1e-10, config.mask)

    def test_zero_gain_is_plain_mhd(self):
        reference = random_state(self.grid, 12)
        config = NudgingConfig(0.0, spectral())
        pair = self.run_pair(config, init_assimilation(reference, config), 20)
        plain = integrate(ElsasserState.zeros(self.grid), self.params, self.forcing, 0.01, 20)
        assert_allclose(pair.assimilated.v.coefficients, plain.v.coefficients, rtol=0, atol=1e-15)
        initial = init_assimilation(reference, config).errors().l2_eta
        self.assertGreater(pair.errors().l2_eta, 1e-6 * initial)

    def test_assimilated_state_stays_divergence_free(self):
        reference = random_state(self.grid, 13)
        config = NudgingConfig(2.0, InterpolantSpec(InterpolantKind.NODAL_BILINEAR, 0.25))
        pair = self.run_pair(config, init_assimilation(reference, config), 20)
        for field in (pair.assimilated.v, pair.assimilated.w):
            self.assertTrue(field.is_divergence_free())
            self.assertEqual(field.coefficients[:, 0, 0].tolist(), [0j, 0j])

    def test_explicit_gain_too_large(self):
        config = NudgingConfig(200.0, InterpolantSpec(InterpolantKind.VOLUME_AVERAGE, 0.25))
        pair = init_assimilation(random_state(self.grid, 14), config)
        with self.assertRaises(StiffnessError) as raised:
            coupled_step(pair, self.params, self.forcing, config, 0.01)
        self.assertAlmostEqual(raised.exception.admissible_dt, 0.005)


class RunAssimilationTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(16)
        self.params = derive_elsasser_params(2, 2)
        self.forcing = kolmogorov_forcing(self.grid, self.params, 1.0, 0.5)

    def run_spec(self, **overrides):
        options = dict(
            params=self.params, forcing=self.forcing, dt=0.01, horizon=2.0, sample_interval=0.05,
            seed=4, spin_up=NO_SPIN_UP, initial_l2=0.5, initial_k_max=4,
        )
        options.update(overrides)
        return RunSpec(**options)

    def test_full_observation_converges(self):
        result = run_assimilation(NudgingConfig(20.0, spectral()), self.run_spec())
        l2 = result.errors.l2_total
        self.assertLess(l2[-1], 1e-6 * l2[0])
        self.assertLess(result.errors.h1_total[-1], 1e-6 * result.errors.h1_total[0])
        self.assertEqual(len(result.errors), 41)
        self.assertEqual(len(result.trajectory), 41)

    def test_deterministic_per_seed(self):
        config = NudgingConfig(20.0, spectral())
        first = run_assimilation(config, self.run_spec(horizon=0.5))
        second = run_assimilation(config, self.run_spec(horizon=0.5))
        np.testing.assert_array_equal(first.errors.l2_eta, second.errors.l2_eta)
        np.testing.assert_array_equal(first.pair.assimilated.w.coefficients, second.pair.assimilated.w.coefficients)

    def test_magnetic_observation_of_pure_flow_does_not_converge(self):
        params = derive_elsasser_params(500, 500)
        run_spec = self.run_spec(
            params=params, forcing=ForcingSpec.zero(self.grid),
            reference_init=ReferenceInit.VELOCITY_ONLY, initial_l2=0.3, dt=0.005, horizon=1.0,
        )
        result = run_assimilation(NudgingConfig(50.0, spectral(), ObservationMask.B_ONLY), run_spec)
        self.assertGreater(result.errors.l2_u[-1], 1e-2 * result.errors.l2_u[0])
        self.assertLess(result.errors.l2_b.max(), 1e-12)

    def test_decaying_perturbations_still_converge(self):
        decaying = Envelope.decaying(2.0)
        config = NudgingConfig(
            20.0, spectral(),
            delta1=Perturbation(random_divfree_field(self.grid, seed=21, k_max=2), decaying),
            eps2=Perturbation(random_divfree_field(self.grid, seed=22, k_max=2), decaying),
        )
        result = run_assimilation(config, self.run_spec())
        half = len(result.errors) // 2
        self.assertTrue(trend_decreasing(result.errors.times[half:], result.errors.l2_total[half:]))
        self.assertLess(result.phi[-1], result.phi[0])

    def test_perturbation_forcing_without_perturbations(self):
        self.assertEqual(perturbation_forcing(NudgingConfig(3.0, spectral()), 0.0, self.grid), 0.0)

    def test_blow_up_names_step(self):
        nan = np.full((2,) + self.grid.shape, np.nan, dtype=complex)
        broken = ElsasserState(SpectralVectorField(self.grid, nan), SpectralVectorField(self.grid, nan))
        with self.assertRaises(NumericalInstabilityError) as raised:
            run_assimilation(NudgingConfig(1.0, spectral()), self.run_spec(initial_reference=broken))
        self.assertEqual(raised.exception.step, 1)
        self.assertEqual(raised.exception.parameters['mu'], 1.0)
