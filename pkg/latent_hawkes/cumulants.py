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

"""Joint cumulant tensors and their symmetric CP decomposition."""

import dataclasses
import functools
import itertools
import math

import numpy as np
from oslo_log import log
from scipy import linalg
from scipy import optimize

import latent_hawkes.conf
from latent_hawkes import exception
from latent_hawkes import utils


CONF = latent_hawkes.conf.CONF
LOG = log.getLogger(__name__)

SUPPORTED_ORDERS = (2, 3, 4)
MIN_SAMPLES_PER_DIM = 50
SYMMETRY_RTOL = 1e-10
KRUSKAL_EXHAUSTIVE = 12
KRUSKAL_LIMIT = 20
KRUSKAL_SAMPLES = 2000


@dataclasses.dataclass(frozen=True)
class CumulantTensor:
    order: int
    lags: tuple
    data: np.ndarray

    @property
    def dim(self):
        return self.data.shape[0]

    @property
    def zero_lag(self):
        return not any(self.lags)

    def is_symmetric(self, rtol=SYMMETRY_RTOL):
        scale = max(float(np.max(np.abs(self.data))), np.finfo(float).tiny)
        for perm in itertools.permutations(range(self.order)):
            if np.max(np.abs(self.data - self.data.transpose(perm))) > \
                    rtol * scale:
                return False
        return True

    def to_dict(self):
        return {'order': self.order, 'dim': self.dim,
                'lags': list(self.lags),
                'data': self.data.ravel().tolist()}

    @classmethod
    def from_dict(cls, data):
        shape = (data['dim'],) * data['order']
        return cls(int(data['order']), tuple(data['lags']),
                   np.asarray(data['data'], dtype=float).reshape(shape))


@dataclasses.dataclass(frozen=True)
class CPFactors:
    weights: np.ndarray
    factors: np.ndarray
    residual: float
    order: int

    @property
    def rank(self):
        return self.factors.shape[1]

    def full(self):
        return symmetric_tensor(self.weights, self.factors, self.order)

    def to_dict(self):
        return {'rank': self.rank, 'order': self.order,
                'weights': self.weights.tolist(),
                'factors': self.factors.tolist(),
                'residual': self.residual}

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data['weights'], dtype=float),
                   np.asarray(data['factors'], dtype=float),
                   float(data['residual']), int(data['order']))


@dataclasses.dataclass(frozen=True)
class KruskalResult:
    krank: int
    required: int
    passed: bool

    @property
    def margin(self):
        return self.krank - self.required


def preprocess(series, mode=None):
    """Center or first-difference the columns of ``series``."""
    mode = mode or CONF.cumulants.preprocess
    x = np.asarray(getattr(series, 'data', series), dtype=float)
    if mode == 'center':
        return x - x.mean(axis=0)
    if mode == 'difference':
        return np.diff(x, axis=0)
    raise exception.PreconditionFailed(reason='unknown preprocessing %r'
                                       % mode)


def _aligned(x, lags):
    # Mode a reads x[t + lag_a] for t in [0, T - max lag).
    shifts = (0,) + tuple(lags)
    span = x.shape[0] - max(shifts)
    return [x[s:s + span] for s in shifts]


def _kstat(blocks):
    """Joint k-statistic of the aligned, centered sub-series."""
    m = blocks[0].shape[0]
    d = len(blocks)
    letters = 'abcd'[:d]
    spec = ','.join('t' + c for c in letters) + '->' + letters
    moment = np.einsum(spec, *blocks, optimize=True) / m
    if d == 2:
        return moment * m / (m - 1)
    if d == 3:
        return moment * m * m / ((m - 1) * (m - 2))
    pair = {}
    for a, b in itertools.combinations(range(4), 2):
        pair[a, b] = blocks[a].T @ blocks[b] / m
    pairings = (np.einsum('ab,cd->abcd', pair[0, 1], pair[2, 3])
                + np.einsum('ac,bd->abcd', pair[0, 2], pair[1, 3])
                + np.einsum('ad,bc->abcd', pair[0, 3], pair[1, 2]))
    return (m * m * ((m + 1) * moment - (m - 1) * pairings)
            / ((m - 1) * (m - 2) * (m - 3)))


def _cumulant_array(x, order, lags):
    blocks = [b - b.mean(axis=0) for b in _aligned(x, lags)]
    return _kstat(blocks)


def estimate_cumulant(series, order, lags=None):
    """Order-``d`` joint cumulant of lagged observation vectors.

    Orders 2 and 3 use the unbiased k-statistics. Order 4 uses
    ``m^2 ((m + 1) m4 - (m - 1) P) / ((m - 1)(m - 2)(m - 3))`` where ``m4``
    is the fourth sample moment and ``P`` the sum of the three pairings
    of second sample moments, which is the joint fourth k-statistic.
    Lagged tensors are computed on sub-series aligned by their lags and
    each sub-series is centered separately.

    :param series: ``Observation`` or ``T x n`` array.
    :param order: 2, 3 or 4.
    :param lags: ``order - 1`` non-negative lags in bins.
    :returns: ``CumulantTensor``
    """
    if order not in SUPPORTED_ORDERS:
        raise exception.UnsupportedOrder(order=order)
    x = np.asarray(getattr(series, 'data', series), dtype=float)
    if x.ndim == 1:
        x = x[:, np.newaxis]
    lags = tuple(int(v) for v in (lags or (0,) * (order - 1)))
    if len(lags) != order - 1 or any(v < 0 for v in lags):
        raise exception.PreconditionFailed(
            reason='need %d non-negative lags' % (order - 1))
    length = x.shape[0] - max((0,) + lags)
    if length < MIN_SAMPLES_PER_DIM * x.shape[1]:
        raise exception.SeriesTooShort(
            length=length, reason='need at least %d aligned samples'
            % (MIN_SAMPLES_PER_DIM * x.shape[1]))
    return CumulantTensor(order, lags, _cumulant_array(x, order, lags))


def multilinear_transform(tensor, matrix):
    """Apply ``matrix`` along every mode of ``tensor``."""
    out = np.asarray(tensor)
    for _mode in range(out.ndim):
        # Contracting the leading mode and appending the new one cycles
        # through all modes once.
        out = np.tensordot(out, matrix, axes=([0], [1]))
    return out


def symmetric_tensor(weights, factors, order):
    n = factors.shape[0]
    out = np.zeros((n,) * order)
    for w, v in zip(weights, factors.T):
        out += w * functools.reduce(np.multiply.outer, [v] * order)
    return out


def relative_residual(tensor, weights, factors, order):
    norm = linalg.norm(tensor.ravel())
    diff = linalg.norm(
        (symmetric_tensor(weights, factors, order) - tensor).ravel())
    return diff / norm if norm else diff


def canonicalize(weights, factors, order):
    """Unit columns, largest-magnitude entry positive, weights descending.

    :returns: ``(weights, factors)``
    """
    factors = np.array(factors, dtype=float)
    weights = np.array(weights, dtype=float)
    norms = linalg.norm(factors, axis=0)
    norms[norms == 0] = 1.0
    factors = factors / norms
    weights = weights * norms ** order
    for k in range(factors.shape[1]):
        if factors[np.argmax(np.abs(factors[:, k])), k] < 0:
            factors[:, k] = -factors[:, k]
            weights[k] *= (-1) ** order
    index = np.argsort(-np.abs(weights), kind='stable')
    return weights[index], factors[:, index]


def feasible_rank(dim, rank, order):
    """Largest-rank check behind Kruskal uniqueness for symmetric CP."""
    if rank == 1:
        return True
    required = math.ceil((2 * rank + order - 1) / order)
    return min(dim, rank) >= required


def _unfold_contract(tensor, factors, order):
    # T_(1) KR(A, ..., A): contract every mode but the first with A.
    kr = factors
    for _ in range(order - 2):
        kr = linalg.khatri_rao(kr, factors)
    return tensor.reshape(tensor.shape[0], -1) @ kr


def _als(tensor, order, rank, rng, tol, sweeps):
    n = tensor.shape[0]
    a = rng.standard_normal((n, rank))
    a /= linalg.norm(a, axis=0)
    for sweep in range(1, sweeps + 1):
        gram = (a.T @ a) ** (order - 1)
        b = _unfold_contract(tensor, a, order) @ linalg.pinv(gram)
        norms = linalg.norm(b, axis=0)
        norms[norms == 0] = 1.0
        new = b / norms
        _w, new = canonicalize(np.ones(rank), new, order)
        order_index = _match_columns(a, new)
        new = new[:, order_index]
        change = linalg.norm(new - a) / max(linalg.norm(a), 1e-300)
        a = new
        if change < tol:
            break
    return a, sweep


def _match_columns(old, new):
    # Keep column identity stable across sweeps.
    score = np.abs(old.T @ new)
    _rows, cols = optimize.linear_sum_assignment(score, maximize=True)
    return cols


def _weights(tensor, factors, order):
    design = np.stack(
        [functools.reduce(np.multiply.outer, [v] * order).ravel()
         for v in factors.T], axis=1)
    weights, *_ = linalg.lstsq(design, tensor.ravel())
    return weights


def _polish(tensor, weights, factors, order):
    n, r = factors.shape
    target = tensor.ravel()

    def residual(theta):
        a = theta[:n * r].reshape(n, r)
        return symmetric_tensor(theta[n * r:], a, order).ravel() - target

    if target.size < n * r + r:
        return weights, factors
    theta0 = np.concatenate([factors.ravel(), weights])
    result = optimize.least_squares(residual, theta0, method='lm',
                                    xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return result.x[n * r:], result.x[:n * r].reshape(n, r)


def cp_decompose(tensor, rank, restarts=None, tol=None, seed=0,
                 threads=None, max_residual=None):
    """Symmetric CP decomposition by alternating least squares.

    Each restart starts from columns drawn uniformly on the unit sphere,
    runs symmetric ALS until the relative factor change drops below
    ``tol`` (or the sweep cap), fits the weights by least squares and
    polishes everything with Levenberg-Marquardt. The lowest residual
    wins; ties go to the earliest restart.

    :param tensor: Zero-lag ``CumulantTensor``. Tensors whose lags are
        all equal are symmetrized first.
    :param rank: Number of components.
    :returns: Canonical ``CPFactors``; a zero tensor yields zero weights.
    :raises: RankInfeasible, DecompositionFailed
    """
    lags = set(tensor.lags)
    if len(lags) > 1:
        raise exception.PreconditionFailed(
            reason='unequal lags %s cannot be decomposed symmetrically'
            % (tensor.lags,))
    order = tensor.order
    data = tensor.data
    if not tensor.zero_lag:
        data = sum(data.transpose(perm) for perm in
                   itertools.permutations(range(order)))
        data = data / math.factorial(order)
    n = tensor.dim
    if rank < 1 or not feasible_rank(n, rank, order):
        raise exception.RankInfeasible(rank=rank, dim=n, order=order)
    if not np.any(data):
        LOG.warning('Zero tensor: returning zero weights')
        return CPFactors(np.zeros(rank), np.eye(n, rank), 0.0, order)
    restarts = restarts or CONF.cumulants.restarts
    tol = CONF.cumulants.als_tolerance if tol is None else tol
    sweeps = CONF.cumulants.max_sweeps

    def run(index):
        rng = utils.generator(seed, utils.STREAM_CP, index)
        factors, used = _als(data, order, rank, rng, tol, sweeps)
        weights = _weights(data, factors, order)
        weights, factors = _polish(data, weights, factors, order)
        weights, factors = canonicalize(weights, factors, order)
        residual = relative_residual(data, weights, factors, order)
        LOG.debug('CP restart %d: %d sweeps, residual %.3g', index, used,
                  residual)
        return residual, weights, factors

    results = utils.parallel_map(run, range(restarts), threads)
    best = min(range(restarts), key=lambda i: (results[i][0], i))
    residual, weights, factors = results[best]
    limit = max_residual
    if limit is None:
        limit = CONF.cumulants.failure_residual
    if residual > limit:
        raise exception.DecompositionFailed(residual=residual, limit=limit)
    return CPFactors(weights, factors, float(residual), order)


def _subsets_independent(matrix, k, subsets):
    for cols in subsets:
        if np.linalg.matrix_rank(matrix[:, list(cols)]) < k:
            return False
    return True


def kruskal_rank(matrix, seed=0):
    """Largest ``k`` such that every ``k`` columns are independent.

    Exhaustive for up to 12 columns; above that each ``k`` is certified
    on random column subsets, which can only overestimate.
    """
    matrix = np.asarray(matrix, dtype=float)
    n, r = matrix.shape
    if r > KRUSKAL_LIMIT:
        raise exception.KruskalTooLarge(rank=r, limit=KRUSKAL_LIMIT)
    rng = utils.generator(seed, utils.STREAM_CP, 10 ** 6)
    krank = 0
    for k in range(1, min(n, r) + 1):
        if r <= KRUSKAL_EXHAUSTIVE:
            subsets = itertools.combinations(range(r), k)
        else:
            subsets = (rng.choice(r, size=k, replace=False)
                       for _ in range(KRUSKAL_SAMPLES))
        if not _subsets_independent(matrix, k, subsets):
            break
        krank = k
    return krank


def kruskal_check(factors, order):
    """Check ``krank >= ceil((2r + d - 1) / d)``.

    A single column has a Kruskal rank of at most one, while the formula
    asks for two when ``r = 1``. A rank-one symmetric tensor is unique up
    to scale as soon as its column is nonzero, so one column requires a
    Kruskal rank of one and only a zero column fails.

    :returns: ``KruskalResult``
    """
    factors = np.asarray(factors, dtype=float)
    r = factors.shape[1]
    if r < 1:
        raise exception.PreconditionFailed(reason='need at least 1 column')
    krank = kruskal_rank(factors)
    required = math.ceil((2 * r + order - 1) / order)
    if r == 1:
        required = 1
    return KruskalResult(krank, required, krank >= required)


def _block_stderr(x, order, blocks):
    size = x.shape[0] // blocks
    values = np.stack([_cumulant_array(x[b * size:(b + 1) * size], order,
                                       (0,) * (order - 1))
                       for b in range(blocks)])
    return values.std(axis=0, ddof=1) / math.sqrt(blocks)


def nonzero_cumulant_scan(series, d_max=4, blocks=None, threshold=None):
    """Orders whose cumulant norm clears ``threshold`` standard errors.

    Standard errors come from non-overlapping blocks.

    :returns: ``set`` of orders in ``2 .. d_max``.
    """
    if d_max > max(SUPPORTED_ORDERS):
        raise exception.UnsupportedOrder(order=d_max)
    blocks = blocks or CONF.cumulants.scan_blocks
    threshold = threshold or CONF.cumulants.scan_threshold
    x = np.asarray(getattr(series, 'data', series), dtype=float)
    if x.ndim == 1:
        x = x[:, np.newaxis]
    found = set()
    for order in range(2, d_max + 1):
        value = linalg.norm(_cumulant_array(x, order,
                                            (0,) * (order - 1)).ravel())
        stderr = linalg.norm(_block_stderr(x, order, blocks).ravel())
        LOG.debug('Order %d cumulant norm %.3g, standard error %.3g',
                  order, value, stderr)
        if value > threshold * stderr:
            found.add(order)
    return found


# Unmixing

UNMIXING_METHODS = ('linear', 'jacobian')
UNIT_QUANTILE = 0.9
UNIT_FRACTION = 0.5


def _nonnegative_solve(directions, centered):
    raw = np.zeros((centered.shape[0], directions.shape[1]))
    for t in np.flatnonzero(np.any(centered != 0, axis=1)):
        raw[t] = optimize.nnls(directions, centered[t])[0]
    return raw


@dataclasses.dataclass(frozen=True)
class Unmixing:
    """Observations satisfy ``O_t - floor ~ mixing @ latents_t``.

    For the ``jacobian`` method ``mixing`` holds the one-event
    directions, so decoded latents are whole event counts.
    """

    method: str
    mixing: np.ndarray
    floor: np.ndarray
    units: np.ndarray

    def apply(self, observations):
        x = np.asarray(getattr(observations, 'data', observations),
                       dtype=float)
        if x.ndim != 2 or x.shape[1] != self.mixing.shape[0]:
            raise exception.DimensionMismatch(
                expected='observations with %d columns'
                % self.mixing.shape[0], actual=x.shape)
        if self.method == 'linear':
            return (x - self.floor) @ linalg.pinv(self.mixing).T
        return np.rint(_nonnegative_solve(self.mixing, x - self.floor))

    def to_dict(self):
        return {'method': self.method, 'mixing': self.mixing.tolist(),
                'floor': self.floor.tolist(), 'units': self.units.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls(data['method'], np.asarray(data['mixing'], dtype=float),
                   np.asarray(data['floor'], dtype=float),
                   np.asarray(data['units'], dtype=float))


def _unit_size(values):
    positive = values[values > 0]
    if not positive.size:
        return 1.0
    cut = UNIT_FRACTION * np.quantile(positive, UNIT_QUANTILE)
    return float(np.median(positive[positive >= cut]))


def fit_unmixing(observations, factors, method=None):
    """Fit the map from observations back to latent series.

    ``linear`` applies the pseudo-inverse of the CP factors. ``jacobian``
    reads the factors as the directions a positively homogeneous mixing,
    such as a leaky ReLU network, moves away from its resting value
    ``f(0)``: its Jacobian at rest truncated to the positive orthant.
    The resting value is the coordinate-wise median of the observations
    and holds while most bins carry no event. Bins are decoded by
    non-negative least squares against the oriented directions and
    divided by the typical one-event size of each latent, so that
    rounding yields whole events. Bins where several latents fire at
    once are only approximately decoded.

    :param observations: Array ``(T, n)`` or a binned series; the
        reference environment in the pipeline.
    :param factors: ``n x p`` CP factors.
    :param method: One of ``UNMIXING_METHODS``; defaults to
        ``[cumulants] unmixing``.
    :returns: ``Unmixing``
    """
    method = method or CONF.cumulants.unmixing
    if method not in UNMIXING_METHODS:
        raise exception.PreconditionFailed(reason='unknown unmixing %r'
                                           % method)
    x = np.asarray(getattr(observations, 'data', observations),
                   dtype=float)
    factors = np.asarray(factors, dtype=float)
    if x.ndim != 2 or factors.ndim != 2 or x.shape[1] != factors.shape[0]:
        raise exception.DimensionMismatch(
            expected='observations with %d columns' % len(factors),
            actual=x.shape)
    if method == 'linear':
        return Unmixing(method, factors, np.zeros(x.shape[1]),
                        np.ones(factors.shape[1]))
    floor = np.median(x, axis=0)
    centered = x - floor
    # Counts are non-negative: each direction points where its projected
    # series mostly moves.
    signs = np.sign(np.mean(centered @ linalg.pinv(factors).T, axis=0))
    directions = factors * np.where(signs == 0, 1.0, signs)
    raw = _nonnegative_solve(directions, centered)
    units = np.array([_unit_size(raw[:, j]) for j in range(raw.shape[1])])
    LOG.info('One-event sizes of the decoded latents: %s',
             np.round(units, 4).tolist())
    return Unmixing(method, directions * units, floor, units)


def unmix(observations, factors, method=None):
    """Fit an ``Unmixing`` on ``observations`` and apply it.

    :returns: ``(Unmixing, latents)``
    """
    unmixing = fit_unmixing(observations, factors, method)
    return unmixing, unmixing.apply(observations)
