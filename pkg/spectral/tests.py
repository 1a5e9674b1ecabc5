import os
import tempfile

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from core.exceptions import DivergenceError, GridMismatchError, InvalidParameterError

from .fields import Grid, SpectralScalar, SpectralVectorField, forward_transform, inverse_transform
from .operators import (
    advection, dealias, divergence, gradient, h1_seminorm, h2_seminorm, inner_product,
    l2_norm, laplacian, leray_project, random_divfree_field, random_scalar_field,
)
from .snapshots import load_snapshot, save_snapshot


def single_mode_vector(grid, k, amplitude):
    """Real vector field with one conjugate mode pair"""
    coefficients = np.zeros((2,) + grid.shape, dtype=complex)
    coefficients[:, k[0] % grid.n, k[1] % grid.n] = amplitude
    coefficients[:, -k[0] % grid.n, -k[1] % grid.n] = np.conj(amplitude)
    return SpectralVectorField(grid, coefficients)


class GridTests(SimpleTestCase):
    def test_rejects_odd_or_small_grids(self):
        for n in (7, 6, 9, 0):
            with self.assertRaises(InvalidParameterError):
                Grid(n)

    def test_dealias_cutoff(self):
        self.assertEqual(Grid(64).dealias_cutoff, 21)
        self.assertEqual(Grid(8).dealias_cutoff, 2)

    def test_wavenumbers_follow_fft_order(self):
        k1, k2 = Grid(8).wavenumbers
        self.assertEqual(list(k1[:, 0]), [0, 1, 2, 3, -4, -3, -2, -1])
        self.assertEqual(list(k2[0, :]), [0, 1, 2, 3, -4, -3, -2, -1])


class TransformTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(16)
        self.x, self.y = self.grid.coordinates()

    def test_cosine_is_a_single_conjugate_pair(self):
        scalar, mean = forward_transform(np.cos(2 * np.pi * self.x), self.grid)
        expected = np.zeros(self.grid.shape, dtype=complex)
        expected[1, 0] = 0.5
        expected[-1, 0] = 0.5
        assert_allclose(scalar.coefficients, expected, atol=1e-15)
        self.assertAlmostEqual(mean, 0.0, places=15)

    def test_constant_field_reports_its_mean(self):
        scalar, mean = forward_transform(np.full(self.grid.shape, 5.0), self.grid)
        self.assertEqual(np.count_nonzero(np.abs(scalar.coefficients) > 1e-15), 0)
        self.assertAlmostEqual(mean, 5.0, places=12)

    def test_round_trip(self):
        samples = np.random.default_rng(3).standard_normal(self.grid.shape)
        scalar, mean = forward_transform(samples, self.grid)
        restored = inverse_transform(scalar, mean)
        self.assertLess(np.max(np.abs(restored - samples)) / np.max(np.abs(samples)), 1e-12)

    def test_grid_mismatch(self):
        with self.assertRaises(GridMismatchError):
            forward_transform(np.zeros((8, 8)), self.grid)

    def test_output_is_hermitian(self):
        samples = np.random.default_rng(4).standard_normal(self.grid.shape)
        scalar, _ = forward_transform(samples, self.grid)
        self.assertTrue(scalar.is_hermitian())

    def test_rejects_coefficients_of_a_complex_field(self):
        coefficients = np.zeros(self.grid.shape, dtype=complex)
        coefficients[1, 2] = 0.5
        with self.assertRaises(InvalidParameterError):
            SpectralScalar(self.grid, coefficients)
        coefficients[-1, -2] = 0.5
        self.assertTrue(SpectralScalar(self.grid, coefficients).is_hermitian())

    def test_imaginary_multiple_is_rejected(self):
        scalar, _ = forward_transform(np.random.default_rng(6).standard_normal(self.grid.shape), self.grid)
        with self.assertRaises(InvalidParameterError):
            scalar * 1j

    def test_parseval(self):
        samples = np.random.default_rng(5).standard_normal(self.grid.shape)
        samples -= samples.mean()
        first, _ = forward_transform(samples, self.grid)
        field = SpectralVectorField.from_components(first, SpectralScalar.zeros(self.grid))
        quadrature = np.sqrt(np.mean(samples ** 2))
        self.assertAlmostEqual(l2_norm(field) / quadrature, 1.0, delta=1e-10)


class CalculusTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(16)
        self.x, self.y = self.grid.coordinates()

    def test_laplacian_of_sine(self):
        scalar, _ = forward_transform(np.sin(2 * np.pi * self.x), self.grid)
        result = inverse_transform(laplacian(scalar))
        assert_allclose(result, -4 * np.pi ** 2 * np.sin(2 * np.pi * self.x), atol=1e-12)

    def test_gradient_of_sine(self):
        scalar, _ = forward_transform(np.sin(2 * np.pi * self.y), self.grid)
        result = gradient(scalar).to_physical()
        assert_allclose(result[0], 0.0, atol=1e-12)
        assert_allclose(result[1], 2 * np.pi * np.cos(2 * np.pi * self.y), atol=1e-12)

    def test_gradient_and_laplacian_commute(self):
        scalar = random_scalar_field(self.grid, seed=11)
        first = gradient(laplacian(scalar)).coefficients
        second = laplacian(gradient(scalar)).coefficients
        assert_allclose(first, second, rtol=1e-12, atol=1e-12 * np.max(np.abs(first)))

    def test_divergence_of_gradient_is_laplacian(self):
        scalar = random_scalar_field(self.grid, seed=12)
        assert_allclose(
            divergence(gradient(scalar)).coefficients, laplacian(scalar).coefficients,
            atol=1e-9,
        )


class LerayProjectionTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(16)

    def test_annihilates_gradients(self):
        phi = random_scalar_field(self.grid, seed=1)
        self.assertLess(l2_norm(leray_project(gradient(phi))), 1e-12 * l2_norm(gradient(phi)))

    def test_fixes_divergence_free_fields(self):
        u = random_divfree_field(self.grid, seed=2)
        assert_allclose(leray_project(u).coefficients, u.coefficients, atol=1e-12 * l2_norm(u))

    def test_single_mode_formula(self):
        u = single_mode_vector(self.grid, (1, 0), 1.0)
        projected = leray_project(u).coefficients
        assert_allclose(projected[:, 1, 0], [0.0, 1.0], atol=1e-15)

    def test_idempotent_and_self_adjoint(self):
        rng = np.random.default_rng(7)
        samples = rng.standard_normal((2,) + self.grid.shape)
        u = SpectralVectorField(self.grid, np.fft.fft2(samples, axes=(-2, -1)) / self.grid.n ** 2)
        samples = rng.standard_normal((2,) + self.grid.shape)
        v = SpectralVectorField(self.grid, np.fft.fft2(samples, axes=(-2, -1)) / self.grid.n ** 2)
        once = leray_project(u)
        assert_allclose(leray_project(once).coefficients, once.coefficients, atol=1e-14)
        left = inner_product(leray_project(u), v)
        right = inner_product(u, leray_project(v))
        self.assertAlmostEqual(left, right, delta=1e-12 * l2_norm(u) * l2_norm(v))

    def test_output_is_divergence_free(self):
        u = single_mode_vector(self.grid, (2, 3), 1.0 + 0.5j)
        projected = leray_project(u)
        self.assertTrue(projected.divergence_free)
        self.assertTrue(projected.is_divergence_free())

    def test_solenoidal_rejects_compressible_data(self):
        u = single_mode_vector(self.grid, (1, 0), 1.0)
        with self.assertRaises(DivergenceError):
            SpectralVectorField.solenoidal(self.grid, u.coefficients)


class DealiasTests(SimpleTestCase):
    def test_removes_nyquist_mode(self):
        grid = Grid(64)
        u = single_mode_vector(grid, (32, 0), 1.0)
        self.assertEqual(l2_norm(dealias(u)), 0.0)

    def test_keeps_low_mode(self):
        grid = Grid(64)
        u = single_mode_vector(grid, (1, 1), 1.0)
        self.assertEqual(l2_norm(dealias(u)), l2_norm(u))

    def test_idempotent(self):
        grid = Grid(16)
        samples = np.random.default_rng(8).standard_normal((2,) + grid.shape)
        u = SpectralVectorField(grid, np.fft.fft2(samples, axes=(-2, -1)))
        once = dealias(u)
        np.testing.assert_array_equal(dealias(once).coefficients, once.coefficients)


class NormTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(16)

    def test_single_mode_values(self):
        x, _ = self.grid.coordinates()
        samples = np.stack([np.sin(2 * np.pi * x), np.zeros(self.grid.shape)])
        n = self.grid.n
        u = SpectralVectorField(self.grid, np.fft.fft2(samples, axes=(-2, -1)) / n ** 2)
        self.assertAlmostEqual(l2_norm(u), 1 / np.sqrt(2), places=14)
        self.assertAlmostEqual(h1_seminorm(u), np.pi * np.sqrt(2), places=12)
        self.assertAlmostEqual(h2_seminorm(u), 2 * np.pi ** 2 * np.sqrt(2), places=11)

    def test_zero_field(self):
        zero = SpectralVectorField.zeros(self.grid)
        self.assertEqual((l2_norm(zero), h1_seminorm(zero), h2_seminorm(zero)), (0.0, 0.0, 0.0))

    def test_poincare_inequality(self):
        for seed in range(1000):
            u = random_divfree_field(self.grid, seed=seed, energy_spectrum_decay=seed % 3)
            self.assertGreaterEqual(h1_seminorm(u), 2 * np.pi * l2_norm(u) * (1 - 1e-14))

    def test_grid_mismatch(self):
        with self.assertRaises(GridMismatchError):
            inner_product(SpectralVectorField.zeros(Grid(8)), SpectralVectorField.zeros(self.grid))


class AdvectionTests(SimpleTestCase):
    def test_skew_symmetry(self):
        grid = Grid(32)
        u = random_divfree_field(grid, seed=21, k_max=8)
        v = random_divfree_field(grid, seed=22, k_max=8)
        term = advection(u, v)
        self.assertLess(abs(inner_product(term, v)), 1e-10 * l2_norm(term) * l2_norm(v))

    def test_uniform_direction_shear(self):
        grid = Grid(16)
        x, y = grid.coordinates()
        # a = (sin 2 pi y, 0) advecting b = (0, sin 2 pi x) gives (0, 2 pi sin 2 pi y cos 2 pi x)
        a = SpectralVectorField(
            grid, np.fft.fft2(np.stack([np.sin(2 * np.pi * y), 0 * y]), axes=(-2, -1)) / 256
        )
        b = SpectralVectorField(
            grid, np.fft.fft2(np.stack([0 * x, np.sin(2 * np.pi * x)]), axes=(-2, -1)) / 256
        )
        result = advection(a, b).to_physical()
        assert_allclose(result[0], 0.0, atol=1e-12)
        assert_allclose(
            result[1], 2 * np.pi * np.sin(2 * np.pi * y) * np.cos(2 * np.pi * x), atol=1e-12
        )


class RandomFieldTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(32)

    def test_deterministic_per_seed(self):
        first = random_divfree_field(self.grid, seed=5)
        second = random_divfree_field(self.grid, seed=5)
        np.testing.assert_array_equal(first.coefficients, second.coefficients)

    def test_divergence_free_and_band_limited(self):
        u = random_divfree_field(self.grid, seed=6, k_max=4)
        self.assertTrue(u.is_divergence_free())
        outside = np.sqrt(self.grid.k_squared) > 4
        self.assertEqual(np.count_nonzero(u.coefficients[:, outside]), 0)
        self.assertGreater(l2_norm(u), 0.0)

    def test_requested_norm(self):
        u = random_divfree_field(self.grid, seed=7, l2=0.25)
        self.assertAlmostEqual(l2_norm(u), 0.25, places=14)

    def test_k_max_out_of_range(self):
        with self.assertRaises(InvalidParameterError):
            random_divfree_field(self.grid, seed=1, k_max=self.grid.dealias_cutoff + 1)
        with self.assertRaises(InvalidParameterError):
            random_divfree_field(self.grid, seed=1, k_max=0)


class SnapshotTests(SimpleTestCase):
    def test_exact_round_trip(self):
        grid = Grid(16)
        u = random_divfree_field(grid, seed=9)
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'field.csv')
            save_snapshot(path, u)
            with open(path) as handle:
                self.assertEqual(handle.readline().strip(), 'mhdnudge-field v1, n=16')
            restored = load_snapshot(path)
        np.testing.assert_array_equal(restored.coefficients, u.coefficients)
        self.assertTrue(restored.divergence_free)

    def test_rejects_foreign_files(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'other.csv')
            with open(path, 'w') as handle:
                handle.write('t,value\n0,1\n')
            with self.assertRaises(InvalidParameterError):
                load_snapshot(path)
