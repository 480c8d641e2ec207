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

"""Cross-spectral densities and Wilson minimum-phase factorization.

Frequencies live on the FFT grid ``w_k = 2 pi k / N`` in radians per bin.
Transfer functions use the causal convention
``G(w) = sum_{t >= 0} g_t exp(-i w t)``, which is the one ``numpy.fft.fft``
produces from the coefficient sequence ``g_t``.
"""

import dataclasses
import math
import typing as ty

import numpy as np
from oslo_log import log
from scipy import fft
from scipy import linalg
from scipy import signal

import latent_hawkes.conf
from latent_hawkes import exception
from latent_hawkes import model as hawkes_model
from latent_hawkes import utils


CONF = latent_hawkes.conf.CONF
LOG = log.getLogger(__name__)

PSD_CLIP = 1e-8
IMAG_TOLERANCE = 1e-8
CONVERGED_CHANGE = 1e-14


def _hermitian(matrices):
    return (matrices + np.conj(np.swapaxes(matrices, -1, -2))) / 2


def _trace(matrices):
    return np.real(np.trace(matrices, axis1=-2, axis2=-1))


@dataclasses.dataclass(frozen=True)
class SpectralDensity:
    matrices: np.ndarray
    clip_mass: float = 0.0

    @property
    def n_freq(self):
        return self.matrices.shape[0]

    @property
    def p(self):
        return self.matrices.shape[1]

    @property
    def frequencies(self):
        return 2 * np.pi * np.arange(self.n_freq) / self.n_freq

    def to_dict(self):
        return {'n_freq': self.n_freq, 'p': self.p,
                'matrices': utils.complex_to_pairs(self.matrices),
                'clip_mass': self.clip_mass}

    @classmethod
    def from_dict(cls, data):
        matrices = utils.pairs_to_complex(data['matrices'])
        expected = (data['n_freq'], data['p'], data['p'])
        if matrices.shape != expected:
            raise exception.DimensionMismatch(expected=expected,
                                              actual=matrices.shape)
        return cls(matrices, float(data.get('clip_mass', 0.0)))


@dataclasses.dataclass(frozen=True)
class SpectralFactor:
    """Minimum-phase factor ``S(w) = G(w) sigma G(w)^H``.

    ``G`` is monic: its lag-0 coefficient is the identity, which picks one
    representative out of the constant unitary ambiguity.
    """

    transfer: np.ndarray
    sigma: np.ndarray
    residual: float
    iterations: int
    projection: ty.Optional[np.ndarray] = None

    @property
    def n_freq(self):
        return self.transfer.shape[0]

    def reconstruct(self):
        g = self.transfer
        return SpectralDensity(_hermitian(
            g @ self.sigma @ np.conj(np.swapaxes(g, -1, -2))))

    def normalized(self):
        """Return ``G chol(sigma)``, the factor with ``S = G G^H``."""
        lower = linalg.cholesky(self.sigma, lower=True)
        return self.transfer @ lower

    def impulse_response(self):
        """Coefficients ``g_t`` for ``t = 0 .. N - 1``."""
        return fft.ifft(self.transfer, axis=0)

    def inverse_anticausal_energy(self):
        """Energy share of negative lags in the inverse factor.

        Zero up to rounding for a minimum-phase ``G``.
        """
        coeffs = fft.ifft(np.linalg.inv(self.transfer), axis=0)
        half = self.n_freq // 2
        total = float(np.sum(np.abs(coeffs) ** 2))
        tail = float(np.sum(np.abs(coeffs[half + 1:]) ** 2))
        return tail / total if total else 0.0

    def to_dict(self):
        projection = self.projection
        return {'n_freq': self.n_freq,
                'p': self.transfer.shape[1],
                'transfer': utils.complex_to_pairs(self.transfer),
                'sigma': utils.complex_to_pairs(self.sigma),
                'residual': self.residual,
                'iterations': self.iterations,
                'projection': None if projection is None
                else projection.tolist()}

    @classmethod
    def from_dict(cls, data):
        projection = data.get('projection')
        return cls(utils.pairs_to_complex(data['transfer']),
                   np.real_if_close(utils.pairs_to_complex(data['sigma'])),
                   float(data['residual']), int(data['iterations']),
                   None if projection is None else np.array(projection))


def _grid_size(n_freq):
    n_freq = int(n_freq)
    if n_freq < 2:
        raise exception.InvalidFrequencyGrid(n_freq=n_freq,
                                             reason='need at least 2')
    if n_freq & (n_freq - 1) == 0:
        return n_freq
    policy = CONF.spectral.non_power_of_two
    if policy == 'reject':
        raise exception.InvalidFrequencyGrid(
            n_freq=n_freq, reason='not a power of two')
    if policy == 'resample':
        resampled = 1 << (n_freq.bit_length() - 1)
        LOG.warning('Frequency grid %d resampled to %d', n_freq, resampled)
        return resampled
    return n_freq


def _as_series(series):
    data = getattr(series, 'data', None)
    if data is None:
        data = getattr(series, 'counts', series)
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, np.newaxis]
    return data


def segment_count(length, n_freq):
    """Half-overlapping windows of ``n_freq`` that fit in ``length``."""
    step = max(1, n_freq // 2)
    if length < n_freq:
        return 0
    return (length - n_freq) // step + 1


def clip_psd(matrices):
    """Project matrices with notably negative eigenvalues onto the cone.

    :returns: ``(matrices, clip_mass)``; untouched when nothing is below
        ``-1e-8 * trace``.
    """
    values, vectors = np.linalg.eigh(matrices)
    limit = -PSD_CLIP * np.maximum(_trace(matrices), 0.0)
    bad = np.where(values.min(axis=1) < limit)[0]
    if not bad.size:
        return matrices, 0.0
    out = matrices.copy()
    mass = 0.0
    for k in bad:
        mass += float(-np.sum(values[k][values[k] < 0]))
        kept = np.maximum(values[k], 0.0)
        out[k] = (vectors[k] * kept) @ np.conj(vectors[k]).T
    out[bad] = _hermitian(out[bad])
    LOG.warning('Clipped negative eigenvalues at %d frequencies '
                '(mass %.3g)', bad.size, mass)
    return out, mass


def estimate_psd(series, n_freq, taper='none', segments=None):
    """Welch-averaged cross-spectral density.

    :param series: ``Observation``, ``BinnedCounts`` or a ``T x p`` array.
    :param n_freq: Window length ``N``, which is also the grid size.
    :param taper: ``'none'`` or ``'hann'``.
    :param segments: Number of half-overlapping windows; all that fit when
        omitted.
    :returns: ``SpectralDensity``
    :raises: SeriesTooShort, InvalidFrequencyGrid
    """
    x = _as_series(series)
    n_freq = _grid_size(n_freq)
    length = x.shape[0]
    step = max(1, n_freq // 2)
    available = segment_count(length, n_freq)
    if segments is None:
        segments = available
    if segments < 1 or segments > available:
        raise exception.SeriesTooShort(
            length=length,
            reason='%s segments of %d need %d samples'
            % (segments, n_freq, n_freq + (max(segments, 1) - 1) * step))
    if taper in (None, 'none'):
        window = np.ones(n_freq)
    elif taper == 'hann':
        window = signal.get_window('hann', n_freq, fftbins=True)
    else:
        raise exception.PreconditionFailed(reason='unknown taper %r'
                                           % taper)
    x = x - x.mean(axis=0)
    energy = float(np.sum(window ** 2))
    acc = np.zeros((n_freq, x.shape[1], x.shape[1]), dtype=complex)
    for s in range(segments):
        seg = x[s * step:s * step + n_freq] * window[:, np.newaxis]
        y = fft.fft(seg, axis=0)
        acc += y[:, :, np.newaxis] * np.conj(y[:, np.newaxis, :])
    matrices = _hermitian(acc / (energy * segments))
    matrices, mass = clip_psd(matrices)
    return SpectralDensity(matrices, mass)


def _plus(g):
    # Causal part: keep positive lags, half of lag 0 and of the Nyquist
    # lag, drop negative lags.
    n = g.shape[0]
    gamma = fft.ifft(g, axis=0).real
    gamma[0] *= 0.5
    half = n // 2
    if n % 2 == 0:
        gamma[half] *= 0.5
    gamma[half + 1:] = 0
    return fft.fft(gamma, axis=0), gamma[0]


def _relative_change(new, old):
    scale = np.abs(new)
    scale[scale <= 2 * np.finfo(float).eps] = 1.0
    return float(np.max(np.abs(new - old) / scale))


def factor_residual(transfer, sigma, matrices):
    recon = transfer @ sigma @ np.conj(np.swapaxes(transfer, -1, -2))
    num = np.linalg.norm(recon - matrices, axis=(1, 2))
    den = np.linalg.norm(matrices, axis=(1, 2))
    return float(np.max(num / np.where(den > 0, den, 1.0)))


def wilson_factorize(density, tol=None, max_iter=None, ridge=None):
    """Wilson's iteration for ``S(w) = G(w) sigma G(w)^H``.

    :param density: ``SpectralDensity`` positive definite at every
        frequency once the ridge is added.
    :param tol: Accepted relative reconstruction residual.
    :param max_iter: Iteration cap.
    :param ridge: Ridge factor on the mean trace.
    :returns: ``SpectralFactor`` with monic ``G``.
    :raises: NotPositiveDefinite, NotConverged
    """
    tol = CONF.spectral.wilson_tolerance if tol is None else tol
    max_iter = max_iter or CONF.spectral.wilson_max_iter
    ridge = CONF.spectral.ridge if ridge is None else ridge
    s = np.array(density.matrices, dtype=complex)
    n, p = s.shape[0], s.shape[1]
    s = s + ridge * float(np.mean(_trace(s))) / p * np.eye(p)
    values = np.linalg.eigvalsh(s)
    traces = _trace(s)
    for k in range(n):
        if values[k, 0] <= 1e-10 * traces[k]:
            raise exception.NotPositiveDefinite(index=k,
                                                eigenvalue=values[k, 0])

    gamma0 = fft.ifft(s, axis=0)[0]
    gamma0 = np.real(gamma0 + np.conj(gamma0).T) / 2
    a0 = linalg.cholesky(gamma0)
    psi = np.tile(a0, (n, 1, 1)).astype(complex)
    lower = np.linalg.cholesky(s)
    eye = np.eye(p)
    residual = math.inf
    for iteration in range(1, max_iter + 1):
        half = np.linalg.solve(psi, lower)
        g = half @ np.conj(np.swapaxes(half, -1, -2)) + eye
        gplus, g0 = _plus(g)
        skew = -np.tril(g0, -1)
        skew = skew - skew.T
        psi_prev = psi
        psi = psi @ (gplus + skew)
        a0 = a0 @ (g0 + skew)
        transfer = np.swapaxes(
            np.linalg.solve(a0.T, np.swapaxes(psi, -1, -2)), -1, -2)
        sigma = a0 @ a0.T
        residual = factor_residual(transfer, sigma, s)
        if residual <= tol:
            break
        if _relative_change(psi, psi_prev) < CONVERGED_CHANGE:
            raise exception.NotConverged(routine='Wilson factorization',
                                         iterations=iteration,
                                         last=residual)
    else:
        raise exception.NotConverged(routine='Wilson factorization',
                                     iterations=max_iter, last=residual)
    LOG.debug('Wilson factorization converged in %d iterations '
              '(residual %.3g)', iteration, residual)
    return SpectralFactor(transfer, sigma, residual, iteration)


def wiener_khinchin_cov(density):
    """Lag-0 covariance as the frequency average of the spectrum."""
    c = np.mean(density.matrices, axis=0)
    re = np.linalg.norm(c.real)
    im = np.linalg.norm(c.imag)
    if im > IMAG_TOLERANCE * re:
        raise exception.SpectralConsistency(imag=im, limit=IMAG_TOLERANCE)
    c = c.real
    return (c + c.T) / 2


def recover_transfer(density, p=None, tol=None):
    """Factorize an observation spectrum, projecting when ``n > p``.

    :param density: ``SpectralDensity`` of mixed observations.
    :param p: Latent dimension; defaults to the observation dimension.
    :returns: ``SpectralFactor``; ``projection`` holds the ``n x p``
        principal basis the spectrum was projected on.
    :raises: RankDeficient
    """
    n = density.p
    p = n if p is None else p
    if p > n:
        raise exception.RankDeficient(
            reason='latent dimension %d exceeds observations %d' % (p, n))
    values = np.linalg.eigvalsh(density.matrices)
    top = values[:, -1:]
    tiny = n * np.finfo(float).eps * np.maximum(top, np.finfo(float).tiny)
    ranks = np.sum(values > tiny, axis=1)
    short = float(np.mean(ranks < p))
    if short > CONF.spectral.rank_deficient_fraction:
        raise exception.RankDeficient(
            reason='effective rank below %d at %.0f%% of frequencies'
            % (p, 100 * short))
    projection = None
    matrices = density.matrices
    if p < n:
        _vals, vecs = linalg.eigh(wiener_khinchin_cov(density))
        projection = vecs[:, ::-1][:, :p]
        matrices = projection.T @ matrices @ projection
        LOG.warning('Projected %d observation channels onto the top %d '
                    'principal directions', n, p)
    tol = CONF.spectral.recover_tolerance if tol is None else tol
    factor = wilson_factorize(SpectralDensity(_hermitian(matrices)),
                              tol=tol)
    return dataclasses.replace(factor, projection=projection)


def convolution_prior_params(model, delta, n_freq, sigma_r=None):
    """Gaussian parameters of the time-adaptive convolution prior.

    ``mean = H(0) u delta`` and ``cov`` is the frequency average of
    ``H(w) sigma_r H(w)^H`` over the grid, with ``H`` the per-bin INAR
    transfer. ``sigma_r`` defaults to ``diag(mean)``, the innovation
    covariance of Poisson counts, so the default ``cov`` grows with the
    baseline ``u``. Pass ``sigma_r`` explicitly for a covariance that
    does not depend on ``u``.

    :returns: ``(mean, cov)``
    """
    hawkes_model.require_stable(model)
    n_freq = _grid_size(n_freq)
    weights = model.discretize(delta)
    h0 = model.discrete_transfer(delta, 0.0, weights).real
    mean = h0 @ model.u * delta
    if sigma_r is None:
        sigma_r = np.diag(mean)
    sigma_r = np.asarray(sigma_r, dtype=float)
    cov = np.zeros((model.p, model.p))
    for theta in 2 * np.pi * np.arange(n_freq) / n_freq:
        h = model.discrete_transfer(delta, theta, weights)
        cov += np.real(h @ sigma_r @ np.conj(h).T)
    cov /= n_freq
    return mean, (cov + cov.T) / 2
