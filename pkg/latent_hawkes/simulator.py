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

"""Event simulation, INAR(delta) sampling and observation mixing."""

import dataclasses
import math
import typing as ty

import numpy as np
from oslo_log import log
from scipy import linalg
from scipy import stats

import latent_hawkes.conf
from latent_hawkes import exception
from latent_hawkes import model as hawkes_model
from latent_hawkes import utils


CONF = latent_hawkes.conf.CONF
LOG = log.getLogger(__name__)

BIN_EPS = 1e-9


@dataclasses.dataclass(frozen=True)
class EventSequence:
    horizon: float
    events: tuple

    def __post_init__(self):
        events = tuple(np.asarray(e, dtype=float) for e in self.events)
        for i, times in enumerate(events):
            if times.size and (times[0] < 0 or times[-1] >= self.horizon):
                raise exception.PreconditionFailed(
                    reason='events of process %d fall outside [0, T)' % i)
            if np.any(np.diff(times) <= 0):
                raise exception.PreconditionFailed(
                    reason='events of process %d are not strictly '
                           'increasing' % i)
        object.__setattr__(self, 'events', events)

    @property
    def p(self):
        return len(self.events)

    def counts(self):
        return np.array([e.size for e in self.events])

    def total(self):
        return int(self.counts().sum())

    def pooled(self):
        """All timestamps merged in time order."""
        if not self.events:
            return np.empty(0)
        return np.sort(np.concatenate(self.events))


@dataclasses.dataclass(frozen=True)
class BinnedCounts:
    delta: float
    counts: np.ndarray
    clipped: int = 0

    def __post_init__(self):
        if not self.delta > 0:
            raise exception.PreconditionFailed(reason='delta must be > 0')
        counts = np.asarray(self.counts)
        if counts.ndim != 2:
            raise exception.DimensionMismatch(expected='2-d counts',
                                              actual=counts.shape)
        object.__setattr__(self, 'counts', counts.astype(np.int64))

    @property
    def p(self):
        return self.counts.shape[1]

    def __len__(self):
        return self.counts.shape[0]


@dataclasses.dataclass(frozen=True)
class Observation:
    delta: float
    data: np.ndarray

    @property
    def n(self):
        return self.data.shape[1]

    def __len__(self):
        return self.data.shape[0]


# Mixing maps


def leaky_relu(x, slope):
    return np.where(x >= 0, x, slope * x)


@dataclasses.dataclass(frozen=True)
class LinearMixing:
    matrix: np.ndarray
    kind: ty.ClassVar[str] = 'linear'

    def __post_init__(self):
        f = np.asarray(self.matrix, dtype=float)
        if f.ndim != 2:
            raise exception.InvalidMixing(reason='matrix must be 2-d')
        sv = linalg.svdvals(f)
        if sv[0] == 0 or sv[-1] / sv[0] <= CONF.simulation.rank_tolerance:
            raise exception.InvalidMixing(
                reason='matrix does not have rank min(n, p)')
        object.__setattr__(self, 'matrix', f)

    @property
    def input_dim(self):
        return self.matrix.shape[1]

    @property
    def output_dim(self):
        return self.matrix.shape[0]

    def apply(self, z):
        return np.asarray(z, dtype=float) @ self.matrix.T

    def to_dict(self):
        return {'kind': self.kind, 'matrices': [self.matrix.tolist()],
                'slope': None}


@dataclasses.dataclass(frozen=True)
class MLPMixing:
    """Composition ``z -> A leaky_relu(z)`` over orthogonal layers.

    The first layer may be ``n x p`` with orthonormal columns so that the
    map can lift ``p`` latents into ``n > p`` observations; every later
    layer is square orthogonal.
    """

    layers: tuple
    slope: float = 0.2
    kind: ty.ClassVar[str] = 'mlp'

    def __post_init__(self):
        layers = tuple(np.asarray(a, dtype=float) for a in self.layers)
        if not layers:
            raise exception.InvalidMixing(reason='no layers')
        n = layers[0].shape[0]
        for index, a in enumerate(layers):
            if a.ndim != 2 or a.shape[0] != n:
                raise exception.InvalidMixing(
                    reason='layer %d has shape %s' % (index, a.shape))
            if index and a.shape[1] != n:
                raise exception.InvalidMixing(
                    reason='layer %d must be square' % index)
            gram = a.T @ a
            if not np.allclose(gram, np.eye(a.shape[1]), rtol=0,
                               atol=1e-10):
                raise exception.InvalidMixing(
                    reason='layer %d is not orthogonal' % index)
        object.__setattr__(self, 'layers', layers)

    @property
    def input_dim(self):
        return self.layers[0].shape[1]

    @property
    def output_dim(self):
        return self.layers[0].shape[0]

    def apply(self, z):
        out = np.asarray(z, dtype=float)
        for a in self.layers:
            out = leaky_relu(out, self.slope) @ a.T
        return out

    def to_dict(self):
        return {'kind': self.kind,
                'matrices': [a.tolist() for a in self.layers],
                'slope': self.slope}


MixingMap = ty.Union[LinearMixing, MLPMixing]


def mixing_from_dict(data):
    kind = data.get('kind')
    matrices = data.get('matrices') or []
    if kind == LinearMixing.kind and len(matrices) == 1:
        return LinearMixing(np.array(matrices[0]))
    if kind == MLPMixing.kind:
        slope = data.get('slope')
        if slope is None:
            slope = CONF.simulation.leaky_slope
        return MLPMixing(tuple(np.array(m) for m in matrices), slope)
    raise exception.InvalidMixing(reason='unknown mixing document %r'
                                  % kind)


def mix(counts, mixing):
    """Map latent counts to observations, row by row."""
    if mixing.input_dim != counts.p:
        raise exception.DimensionMismatch(expected=mixing.input_dim,
                                          actual=counts.p)
    return Observation(counts.delta, mixing.apply(counts.counts))


def make_generic_linear(n, p, seed, attempts=None):
    if n < 1 or p < 1:
        raise exception.PreconditionFailed(reason='n and p must be >= 1')
    attempts = attempts or CONF.simulation.generation_attempts
    rng = utils.generator(seed, utils.STREAM_MIXING)
    for attempt in range(attempts):
        f = rng.standard_normal((n, p))
        try:
            return LinearMixing(f)
        except exception.InvalidMixing:
            LOG.debug('Mixing attempt %d was rank deficient', attempt)
    raise exception.MixingGenerationFailed(shape='%dx%d' % (n, p),
                                           attempts=attempts)


def _orthogonal(dim, rng):
    if dim == 1:
        return np.array([[1.0 if rng.uniform() < 0.5 else -1.0]])
    return stats.ortho_group.rvs(dim, random_state=rng)


def make_generic_mlp(n, p, seed, layers=2, slope=None):
    if n < p:
        raise exception.PreconditionFailed(
            reason='MLP mixing needs n >= p, got n=%d p=%d' % (n, p))
    rng = utils.generator(seed, utils.STREAM_MIXING)
    matrices = [_orthogonal(n, rng)[:, :p]]
    matrices += [_orthogonal(n, rng) for _ in range(layers - 1)]
    if slope is None:
        slope = CONF.simulation.leaky_slope
    return MLPMixing(tuple(matrices), slope)


# Thinning


class _Intensity:
    """Conditional intensity with its history, for thinning.

    Exponential entries are carried as a decaying state matrix; every
    other kernel is evaluated over a window of past events.
    """

    def __init__(self, model):
        self.model = model
        p = model.p
        self.u = model.u
        self.alpha = np.zeros((p, p))
        self.beta = np.ones((p, p))
        self.state = np.zeros((p, p))
        self.windowed = []
        self.width = np.zeros(p)
        cap = CONF.simulation.max_history
        tail = CONF.simulation.tail_mass
        for i, row in enumerate(model.kernels):
            for j, k in enumerate(row):
                if k.kind == 'exponential':
                    self.alpha[i, j] = k.alpha
                    self.beta[i, j] = k.beta
                elif k.kind != 'zero':
                    width = min(k.horizon(tail), cap)
                    self.windowed.append((i, j, k, width))
                    self.width[j] = max(self.width[j], width)
        self.history = [[] for _ in range(p)]
        self.first = [0] * p
        self.time = 0.0

    def advance(self, t):
        self.state *= np.exp(-self.beta * (t - self.time))
        self.time = t

    def _recent_lags(self, j):
        past = self.history[j]
        first = self.first[j]
        oldest = self.time - self.width[j]
        while first < len(past) and past[first] < oldest:
            first += 1
        self.first[j] = first
        return self.time - np.asarray(past[first:])

    def _windowed_terms(self, bound):
        lam = np.zeros(self.model.p)
        for i, j, k, width in self.windowed:
            lags = self._recent_lags(j)
            if not lags.size:
                continue
            if bound and not k.monotone:
                lam[i] += k.peak() * int(np.sum(lags <= width))
            else:
                lam[i] += float(np.sum(k.evaluate(lags[lags <= width])))
        return lam

    def pre_linked(self):
        """``u + Phi * dN`` at the current time, per process."""
        return (self.u + np.sum(self.alpha * self.state, axis=1)
                + self._windowed_terms(False))

    def bound(self):
        # Valid until the next event: exponential and monotone terms only
        # decay, delayed rectangles are bounded by peak * window count.
        return float(np.sum(self.u + np.sum(self.alpha * self.state, axis=1)
                            + self._windowed_terms(True)))

    def record(self, process):
        self.history[process].append(self.time)
        self.state[:, process] += 1.0


def _pick(rng, weights):
    cum = np.cumsum(weights)
    index = int(np.searchsorted(cum, rng.uniform() * cum[-1], side='right'))
    return min(index, len(weights) - 1)


def simulate(model, horizon, seed):
    """Ogata thinning simulation of ``model`` on ``[0, horizon)``.

    :param model: Stable ``HawkesModel``.
    :param horizon: Length ``T`` of the observation window in seconds.
    :param seed: Integer seed; equal seeds give identical sequences.
    :returns: ``EventSequence``
    :raises: UnstableModel, ExplosionGuard
    """
    report = hawkes_model.require_stable(model)
    if not horizon > 0:
        raise exception.PreconditionFailed(reason='horizon must be > 0')
    limit = CONF.simulation.explosion_factor * float(
        np.sum(report.stationary_intensity))
    rng = utils.generator(seed, utils.STREAM_THINNING)
    intensity = _Intensity(model)
    t = 0.0
    while True:
        bound = intensity.bound()
        if bound > limit:
            raise exception.ExplosionGuard(bound=bound, limit=limit, time=t)
        t += rng.exponential(1.0 / bound)
        if t >= horizon:
            break
        intensity.advance(t)
        lam = intensity.pre_linked()
        total = float(np.sum(lam))
        if rng.uniform() * bound <= total:
            intensity.record(_pick(rng, lam))
    events = EventSequence(horizon, intensity.history)
    LOG.debug('Simulated %d events over %.6g s', events.total(), horizon)
    return events


@dataclasses.dataclass(frozen=True)
class Softplus:
    kind: ty.ClassVar[str] = 'softplus'

    def __call__(self, x):
        return np.logaddexp(0.0, x)

    def to_dict(self):
        return {'kind': self.kind}


@dataclasses.dataclass(frozen=True)
class MLPIntensity:
    """Two-layer intensity link: ReLU hidden layer, Softplus output."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    kind: ty.ClassVar[str] = 'mlp'

    @classmethod
    def random(cls, p, seed, hidden=64):
        rng = utils.generator(seed, utils.STREAM_MODEL, 1)
        return cls(rng.normal(0.0, 1.0 / math.sqrt(p), (hidden, p)),
                   np.zeros(hidden),
                   rng.normal(0.0, 1.0 / math.sqrt(hidden), (p, hidden)),
                   np.zeros(p))

    def __call__(self, x):
        hidden = np.maximum(self.w1 @ x + self.b1, 0.0)
        return np.logaddexp(0.0, self.w2 @ hidden + self.b2)

    def to_dict(self):
        return {'kind': self.kind, 'w1': self.w1.tolist(),
                'b1': self.b1.tolist(), 'w2': self.w2.tolist(),
                'b2': self.b2.tolist()}


def simulate_nonlinear(model, link, horizon, seed, cap):
    """Thinning of ``link(u + Phi * dN)`` against the constant cap.

    The cap is only compared with the linked intensity at candidate times
    and right after each accepted event. That is an upper bound on the
    whole path only when ``link`` is non-decreasing and every kernel is
    non-increasing in the lag, so the pre-link drive can only rise at
    events. Delayed windows such as ``Rectangular`` with ``start > 0``
    rise between events; a violation there can go unseen and the thinning
    is then biased.

    :param cap: Per-process intensity cap ``lambda_max``; the thinning
        bound is ``p * cap``.
    :raises: IntensityCapViolation naming the time of the violation
    """
    if not cap > 0:
        raise exception.PreconditionFailed(reason='cap must be > 0')
    if not horizon > 0:
        raise exception.PreconditionFailed(reason='horizon must be > 0')
    rising = sorted({(i, j) for i, row in enumerate(model.kernels)
                     for j, k in enumerate(row) if not k.monotone})
    if rising:
        LOG.warning('Kernels %s rise after a delay; the intensity cap is '
                    'only checked at candidate times', rising)
    rng = utils.generator(seed, utils.STREAM_THINNING)
    intensity = _Intensity(model)
    bound = cap * model.p

    def linked():
        lam = np.asarray(link(intensity.pre_linked()), dtype=float)
        if np.any(lam <= 0):
            raise exception.PreconditionFailed(
                reason='link output must be strictly positive')
        if np.any(lam > cap):
            raise exception.IntensityCapViolation(
                intensity=float(lam.max()), cap=cap, time=intensity.time)
        return lam

    t = 0.0
    linked()
    while True:
        t += rng.exponential(1.0 / bound)
        if t >= horizon:
            break
        intensity.advance(t)
        lam = linked()
        if rng.uniform() * bound <= float(np.sum(lam)):
            intensity.record(_pick(rng, lam))
            linked()
    return EventSequence(horizon, intensity.history)


def bin_events(events, delta):
    """Count events per bin ``[k delta, (k + 1) delta)``.

    :returns: ``BinnedCounts`` with ``ceil(T / delta)`` rows.
    """
    if not delta > 0:
        raise exception.PreconditionFailed(reason='delta must be > 0')
    rows = max(1, int(math.ceil(events.horizon / delta - BIN_EPS)))
    counts = np.zeros((rows, events.p), dtype=np.int64)
    for i, times in enumerate(events.events):
        index = np.clip(np.floor(times / delta).astype(np.int64), 0,
                        rows - 1)
        counts[:, i] = np.bincount(index, minlength=rows)
    return BinnedCounts(delta, counts)


# INAR(delta) noise families


@dataclasses.dataclass(frozen=True)
class PoissonNoise:
    kind: ty.ClassVar[str] = 'poisson'

    def draw(self, rng, mean):
        return rng.poisson(mean), False


@dataclasses.dataclass(frozen=True)
class GaussianRoundedNoise:
    sigma: float
    kind: ty.ClassVar[str] = 'gaussian_rounded'

    def draw(self, rng, mean):
        value = round(mean + self.sigma * rng.standard_normal())
        return max(0, value), value < 0


@dataclasses.dataclass(frozen=True)
class MixtureNoise:
    """Two-component Gaussian offsets around the bin mean, rounded."""

    weights: tuple
    means: tuple
    sigmas: tuple
    kind: ty.ClassVar[str] = 'mixture'

    def __post_init__(self):
        if not (len(self.weights) == len(self.means) == len(self.sigmas)
                == 2):
            raise exception.PreconditionFailed(
                reason='mixture noise needs two components')
        if not math.isclose(sum(self.weights), 1.0, abs_tol=1e-9):
            raise exception.PreconditionFailed(
                reason='mixture weights must sum to 1')

    def draw(self, rng, mean):
        c = 0 if rng.uniform() < self.weights[0] else 1
        value = round(mean + self.means[c]
                      + self.sigmas[c] * rng.standard_normal())
        return max(0, value), value < 0


def noise_from_dict(data):
    kind = (data or {}).get('kind', PoissonNoise.kind)
    if kind == PoissonNoise.kind:
        return PoissonNoise()
    if kind == GaussianRoundedNoise.kind:
        return GaussianRoundedNoise(float(data['sigma']))
    if kind == MixtureNoise.kind:
        return MixtureNoise(tuple(data['weights']), tuple(data['means']),
                            tuple(data['sigmas']))
    raise exception.PreconditionFailed(reason='unknown noise %r' % kind)


def simulate_inar(model, delta, horizon, seed, noise=None):
    """Sample the INAR(delta) counts of ``model`` directly.

    ``lambda_k = u + sum_{tau > 0} Phi(tau delta) Z_{k - tau}`` and
    ``Z_k`` is drawn from ``noise`` with mean ``lambda_k delta``, so the
    per-bin feedback weights are ``Phi(tau delta) delta`` as returned by
    ``HawkesModel.discretize``. All exponential models use the exact
    infinite-order recursion; other kernels are truncated at the
    tail-mass horizon.

    :returns: ``BinnedCounts`` whose ``clipped`` attribute counts clipped
        intensities and clipped noise draws.
    """
    hawkes_model.require_stable(model)
    if not delta > 0 or not horizon > 0:
        raise exception.PreconditionFailed(
            reason='delta and horizon must be > 0')
    noise = noise or PoissonNoise()
    p = model.p
    rows = max(1, int(math.ceil(horizon / delta - BIN_EPS)))
    counts = np.zeros((rows, p), dtype=np.int64)
    gens = utils.substreams(seed, utils.STREAM_INAR, p)
    threshold = CONF.simulation.inar_warning_threshold
    warned = False
    clipped = 0
    u = model.u

    recursive = model.all_exponential()
    if recursive:
        intensity = _Intensity(model)
        alpha = intensity.alpha
        decay = np.exp(-intensity.beta * delta)
        # state[i, j] = sum_{tau >= 1} exp(-beta_ij tau delta) Z_{k-tau, j}
        state = np.zeros((p, p))

        def lam_at(k):
            return u + np.sum(alpha * state, axis=1)
    else:
        kernel_values = model.discretize(delta) / delta
        lags = kernel_values.shape[0]

        def lam_at(k):
            m = min(lags, k)
            if not m:
                return u.copy()
            past = counts[k - 1::-1][:m]
            return u + np.einsum('tij,tj->i', kernel_values[:m], past)

    for k in range(rows):
        lam = lam_at(k)
        if np.any(lam < 0):
            clipped += int(np.sum(lam < 0))
            lam = np.maximum(lam, 0.0)
        mean = lam * delta
        if not warned and float(np.max(mean)) > threshold:
            LOG.warning('delta * intensity %.3g exceeds %.3g at bin %d; '
                        'INAR(delta) is a poor approximation here',
                        float(np.max(mean)), threshold, k)
            warned = True
        for i in range(p):
            value, was_clipped = noise.draw(gens[i], mean[i])
            counts[k, i] = value
            clipped += was_clipped
        if recursive:
            state = decay * (state + counts[k][np.newaxis, :])
    if clipped:
        LOG.warning('Clipped %d negative values while sampling INAR '
                    'counts', clipped)
    return BinnedCounts(delta, counts, clipped)
