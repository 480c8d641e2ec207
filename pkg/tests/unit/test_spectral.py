# Licensed under the Apache License, Version 2.0 (the "License"); you may
# not use this file except in compliance with the License. You may obtain
# a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
#      Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
# WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
# License for the specific language governing permissions and limitations
# under the License.

"""Test cases for Welch spectra and Wilson factorization."""

import numpy as np
from scipy import linalg

from latent_hawkes import cumulants
from latent_hawkes import evaluate
from latent_hawkes import exception
from latent_hawkes import model as hawkes_model
from latent_hawkes import simulator
from latent_hawkes import spectral
from tests.local_fixtures import models
from tests import test


def _ma_spectrum(coeffs, sigma, n_freq):
    """Exact spectrum of ``x_t = sum_k B_k e_{t-k}`` with ``B_0 = I``."""
    theta = 2 * np.pi * np.arange(n_freq) / n_freq
    p = sigma.shape[0]
    transfer = np.tile(np.eye(p, dtype=complex), (n_freq, 1, 1))
    for k, b in enumerate(coeffs, start=1):
        transfer += np.exp(-1j * theta * k)[:, None, None] * b
    s = transfer @ sigma @ np.conj(np.swapaxes(transfer, -1, -2))
    return spectral.SpectralDensity(s), transfer


class TestEstimatePsd(test.NoDBTestCase):

    def setUp(self):
        super().setUp()
        self.rng = np.random.default_rng(0)

    def test_frequency_average_is_covariance(self):
        """One untapered window: mean of S equals the biased covariance."""
        x = self.rng.standard_normal((1024, 3)) @ np.array(
            [[1.0, 0.3, 0.0], [0.0, 1.0, 0.5], [0.2, 0.0, 1.0]])
        density = spectral.estimate_psd(x, 1024, segments=1)
        cov = spectral.wiener_khinchin_cov(density)
        expected = np.cov(x.T, bias=True)
        self.assertAllClose(cov, expected, atol=1e-10 * np.abs(
            expected).max())

    def test_white_noise_level(self):
        x = self.rng.standard_normal((8192, 2)) * np.array([1.0, 2.0])
        density = spectral.estimate_psd(x, 64, taper='hann')
        diag = np.real(np.mean(np.diagonal(density.matrices, axis1=1,
                                           axis2=2), axis=0))
        self.assertAllClose(diag, [1.0, 4.0], rtol=0.05)
        self.assertEqual(0.0, density.clip_mass)

    def test_scaling_equivariance(self):
        x = self.rng.standard_normal((2048, 2)) @ np.array(
            [[1.0, 0.4], [0.0, 1.0]])
        base = spectral.estimate_psd(x, 64, taper='hann')
        scaled = spectral.estimate_psd(3.0 * x, 64, taper='hann')
        self.assertAllClose(scaled.matrices, 9.0 * base.matrices,
                            atol=1e-12 * np.abs(base.matrices).max())

    def test_hawkes_bartlett_spectrum(self):
        """Binned counts follow Lambda* delta |H(theta / delta)|^2."""
        model = models.exponential_single()
        delta = 0.1
        counts = simulator.bin_events(simulator.simulate(model, 1e5, 3),
                                      delta)
        density = spectral.estimate_psd(counts, 256, taper='hann')
        level = np.real(density.matrices[:, 0, 0])
        rate = hawkes_model.check_stability(model).stationary_intensity[0]
        for k in range(1, 9):
            h = hawkes_model.transfer_matrix(
                model, density.frequencies[k] / delta)
            expected = rate * delta * abs(h[0, 0]) ** 2
            self.assertAllClose(level[k], expected, rtol=0.15)
        self.assertTrue(np.all(np.diff(level[[0, 2, 4, 8, 16]]) < 0))

    def test_counts_covariance(self):
        counts = simulator.simulate_inar(models.exponential_triple(), 0.5,
                                         4e4, seed=4)
        density = spectral.estimate_psd(counts, 64)
        cov = spectral.wiener_khinchin_cov(density)
        sample = np.cov(counts.counts.T.astype(float))
        self.assertLess(np.linalg.norm(cov - sample),
                        0.03 * np.linalg.norm(sample))

    def test_accepts_counts(self):
        counts = simulator.simulate_inar(models.exponential_triple(), 0.5,
                                         200.0, seed=0)
        density = spectral.estimate_psd(counts, 32)
        self.assertEqual((32, 3, 3), density.matrices.shape)
        self.assertAllClose(density.frequencies[1], 2 * np.pi / 32)

    def test_series_too_short(self):
        x = self.rng.standard_normal((100, 2))
        self.assertRaises(exception.SeriesTooShort, spectral.estimate_psd,
                          x, 128)
        self.assertRaises(exception.SeriesTooShort, spectral.estimate_psd,
                          x, 64, segments=3)
        self.assertEqual(2, spectral.segment_count(100, 64))

    def test_grid_policy(self):
        x = self.rng.standard_normal((512, 2))
        self.assertRaises(exception.InvalidFrequencyGrid,
                          spectral.estimate_psd, x, 48)
        self.flags(non_power_of_two='resample', group='spectral')
        self.assertEqual(32, spectral.estimate_psd(x, 48).n_freq)
        self.flags(non_power_of_two='allow', group='spectral')
        self.assertEqual(48, spectral.estimate_psd(x, 48).n_freq)

    def test_unknown_taper(self):
        x = self.rng.standard_normal((256, 2))
        self.assertRaises(exception.PreconditionFailed,
                          spectral.estimate_psd, x, 64, taper='kaiser')

    def test_clip_projects_negative_eigenvalues(self):
        bad = np.array([[[1.0, 0.0], [0.0, -0.5]]], dtype=complex)
        clipped, mass = spectral.clip_psd(bad)
        self.assertAlmostEqual(0.5, mass)
        self.assertAllClose(clipped[0], [[1.0, 0.0], [0.0, 0.0]],
                            atol=1e-12)

    def test_document_shape_checked(self):
        density = spectral.SpectralDensity(np.ones((4, 2, 2),
                                                   dtype=complex))
        data = density.to_dict()
        data['p'] = 3
        self.assertRaises(exception.DimensionMismatch,
                          spectral.SpectralDensity.from_dict, data)


class TestWilson(test.NoDBTestCase):

    def setUp(self):
        super().setUp()
        self.sigma = np.array([[1.0, 0.3], [0.3, 0.5]])
        self.coeffs = [np.array([[0.3, -0.1], [0.05, 0.2]]),
                       np.array([[-0.1, 0.05], [0.0, 0.1]])]

    def test_recovers_minimum_phase_factor(self):
        density, transfer = _ma_spectrum(self.coeffs, self.sigma, 64)
        factor = spectral.wilson_factorize(density, ridge=0.0)
        self.assertLessEqual(factor.residual, 1e-8)
        self.assertAllClose(factor.transfer, transfer, atol=1e-6)
        self.assertAllClose(factor.sigma, self.sigma, atol=1e-6)
        g = factor.impulse_response()
        self.assertAllClose(g[0], np.eye(2), atol=1e-6)
        self.assertAllClose(g[1], self.coeffs[0], atol=1e-6)
        self.assertAllClose(g[2], self.coeffs[1], atol=1e-6)
        self.assertAllClose(g[3:], 0.0, atol=1e-6)
        self.assertLess(factor.inverse_anticausal_energy(), 1e-10)

    def test_reconstruct_and_normalize(self):
        density, _transfer = _ma_spectrum(self.coeffs, self.sigma, 32)
        factor = spectral.wilson_factorize(density, ridge=0.0)
        self.assertAllClose(factor.reconstruct().matrices,
                            density.matrices, atol=1e-7)
        g = factor.normalized()
        self.assertAllClose(g @ np.conj(np.swapaxes(g, -1, -2)),
                            density.matrices, atol=1e-7)

    def test_refactoring_is_stable(self):
        density, _transfer = _ma_spectrum(self.coeffs, self.sigma, 64)
        first = spectral.wilson_factorize(density, ridge=0.0)
        second = spectral.wilson_factorize(first.reconstruct(), ridge=0.0)
        self.assertAllClose(second.transfer, first.transfer, atol=1e-6)
        self.assertAllClose(second.sigma, first.sigma, atol=1e-6)

    def test_white_spectrum_is_trivial(self):
        density = spectral.SpectralDensity(
            np.tile(self.sigma.astype(complex), (16, 1, 1)))
        factor = spectral.wilson_factorize(density, ridge=0.0)
        self.assertAllClose(factor.transfer,
                            np.tile(np.eye(2), (16, 1, 1)), atol=1e-8)

    def test_rejects_singular_spectrum(self):
        v = np.array([1.0, 2.0])
        density = spectral.SpectralDensity(
            np.tile(np.outer(v, v).astype(complex), (8, 1, 1)))
        self.assertRaises(exception.NotPositiveDefinite,
                          spectral.wilson_factorize, density, ridge=0.0)

    def test_iteration_cap(self):
        density, _transfer = _ma_spectrum(self.coeffs, self.sigma, 64)
        self.assertRaises(exception.NotConverged, spectral.wilson_factorize,
                          density, tol=1e-15, max_iter=1, ridge=0.0)


class TestRecoverTransfer(test.NoDBTestCase):

    def setUp(self):
        super().setUp()
        self.density = spectral.SpectralDensity(
            np.tile(np.diag([1.0, 2.0, 0.0, 0.0]).astype(complex),
                    (16, 1, 1)))

    def test_projects_onto_latent_rank(self):
        factor = spectral.recover_transfer(self.density, p=2)
        self.assertEqual((4, 2), factor.projection.shape)
        self.assertAllClose(np.abs(factor.projection[:2]),
                            [[0.0, 1.0], [1.0, 0.0]], atol=1e-12)
        self.assertAllClose(factor.sigma, np.diag([2.0, 1.0]), atol=1e-6)

    def _population(self, mixing, delta=0.5, n_freq=256):
        """Spectrum ``F H diag(mean) H^H F^T`` of mixed INAR counts."""
        model = hawkes_model.HawkesModel((0.2, 0.1), [
            [hawkes_model.Exponential(0.3, 1.0),
             hawkes_model.Exponential(0.1, 1.5)],
            [hawkes_model.Exponential(0.2, 0.8),
             hawkes_model.Exponential(0.25, 1.2)]])
        weights = model.discretize(delta)
        h = np.stack([model.discrete_transfer(delta, theta, weights)
                      for theta in 2 * np.pi * np.arange(n_freq) / n_freq])
        mean = h[0].real @ model.u * delta
        s = (mixing @ h @ np.diag(mean)
             @ np.conj(np.swapaxes(h, -1, -2)) @ mixing.T)
        return spectral.SpectralDensity(s), h

    def test_square_mixing_transfer(self):
        """The monic factor of mixed counts is ``F H F^-1``."""
        self.flags(ridge=0.0, recover_tolerance=1e-10, group='spectral')
        mixing = np.array([[1.0, 0.4], [-0.3, 0.8]])
        density, h = self._population(mixing)
        factor = spectral.recover_transfer(density)
        self.assertIsNone(factor.projection)
        self.assertAllClose(factor.transfer @ mixing, mixing @ h,
                            atol=1e-6)

    def test_projected_column_space(self):
        self.flags(ridge=0.0, recover_tolerance=1e-10, group='spectral')
        mixing = np.random.default_rng(13).standard_normal((4, 2))
        density, h = self._population(mixing)
        factor = spectral.recover_transfer(density, p=2)
        projection = factor.projection
        self.assertEqual((4, 2), projection.shape)
        q = projection.T @ mixing
        self.assertAllClose(projection @ factor.transfer @ q, mixing @ h,
                            atol=1e-6)
        for g, target in zip(factor.transfer, h):
            angles = linalg.subspace_angles(projection @ g, mixing @ target)
            self.assertLessEqual(angles.max(), 0.05)

    def test_extra_channels_keep_recovery(self):
        """Five observed channels recover latents as well as three."""
        model = models.exponential_triple()
        gaps = []
        for seed in range(5):
            counts = simulator.bin_events(
                simulator.simulate(model, 1000.0, seed), 0.1)
            scores = []
            for n in (5, 3):
                obs = simulator.mix(
                    counts, simulator.make_generic_linear(n, 3, seed))
                factor = spectral.recover_transfer(
                    spectral.estimate_psd(obs, 64, taper='hann'), p=3)
                self.assertEqual(n > 3, factor.projection is not None)
                tensor = cumulants.estimate_cumulant(
                    cumulants.preprocess(obs, 'center'), 3)
                try:
                    factors = cumulants.cp_decompose(tensor, 3, seed=seed,
                                                     max_residual=0.5)
                except exception.DecompositionFailed:
                    break
                _unmixing, latents = cumulants.unmix(obs, factors.factors,
                                                     'linear')
                scores.append(evaluate.mcc(latents, counts.counts).score)
            if len(scores) == 2:
                gaps.append(abs(scores[0] - scores[1]))
        self.assertGreaterEqual(len(gaps), 3)
        self.assertLessEqual(float(np.median(gaps)), 0.05)

    def test_rank_deficient(self):
        self.assertRaises(exception.RankDeficient,
                          spectral.recover_transfer, self.density, p=3)
        self.assertRaises(exception.RankDeficient,
                          spectral.recover_transfer, self.density, p=5)

    def test_imaginary_average_rejected(self):
        matrices = np.tile(np.array([[1.0, 1j], [-1j, 2.0]]), (4, 1, 1))
        self.assertRaises(exception.SpectralConsistency,
                          spectral.wiener_khinchin_cov,
                          spectral.SpectralDensity(matrices))


class TestConvolutionPrior(test.NoDBTestCase):

    def test_poisson_latents(self):
        model = models.zero_model((0.2, 0.4))
        mean, cov = spectral.convolution_prior_params(model, 0.5, 16)
        self.assertAllClose(mean, [0.1, 0.2], atol=1e-12)
        self.assertAllClose(cov, np.diag([0.1, 0.2]), atol=1e-12)

    def test_baseline_scaling(self):
        model = models.exponential_triple()
        doubled = model.with_baseline(2 * model.u)
        sigma_r = np.diag([0.05, 0.02, 0.03])
        mean, cov = spectral.convolution_prior_params(model, 0.5, 32,
                                                      sigma_r=sigma_r)
        mean2, cov2 = spectral.convolution_prior_params(doubled, 0.5, 32,
                                                        sigma_r=sigma_r)
        self.assertAllClose(mean2, 2 * mean, atol=1e-12)
        self.assertAllClose(cov2, cov, atol=1e-12)
        # The Poisson default follows the mean.
        _mean, poisson = spectral.convolution_prior_params(model, 0.5, 32)
        _mean, poisson2 = spectral.convolution_prior_params(doubled, 0.5, 32)
        self.assertAllClose(poisson2, 2 * poisson, atol=1e-12)

    def test_matches_inar_moments(self):
        """Monte Carlo moments of INAR(delta) counts agree with the prior."""
        model = models.exponential_single()
        delta = 0.5
        mean, cov = spectral.convolution_prior_params(model, delta, 64)
        burn = 40
        runs = [simulator.simulate_inar(model, delta, 200.0,
                                        seed=seed).counts[burn:, 0]
                for seed in range(200)]
        per_run = np.array([r.mean() for r in runs])
        stderr = per_run.std(ddof=1) / np.sqrt(len(runs))
        self.assertLess(abs(per_run.mean() - mean[0]), 3 * stderr)
        pooled = np.concatenate(runs).astype(float)
        self.assertLess(abs(pooled.var() - cov[0, 0]), 0.05 * cov[0, 0])
