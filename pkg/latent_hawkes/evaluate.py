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

"""Recovery scores and the discretization convergence diagnostic."""

import dataclasses
import io

import numpy as np
from oslo_log import log
from scipy import linalg
from scipy import optimize
from scipy import stats

from latent_hawkes import exception
from latent_hawkes import model as hawkes_model
from latent_hawkes import simulator
from latent_hawkes import utils


LOG = log.getLogger(__name__)

MIN_SAMPLES = 10
MCC_METHODS = ('pearson', 'spearman')


@dataclasses.dataclass(frozen=True)
class MccResult:
    score: float
    assignment: np.ndarray
    correlations: np.ndarray

    @property
    def matched(self):
        rows = np.arange(self.assignment.size)
        return self.correlations[rows, self.assignment]

    def to_dict(self):
        return {'score': self.score,
                'assignment': self.assignment.tolist(),
                'matched': self.matched.tolist(),
                'correlations': self.correlations.tolist()}


def _standardize(x, name):
    x = x - x.mean(axis=0)
    scale = linalg.norm(x, axis=0)
    flat = scale == 0
    if np.any(flat):
        LOG.warning('%s has %d zero-variance columns; their correlations '
                    'are set to 0', name, int(flat.sum()))
        scale[flat] = 1.0
    return x / scale


def mcc(est, truth, method='pearson'):
    """Mean matched absolute correlation between two sets of series.

    :param est: ``T x p`` recovered series.
    :param truth: ``T x p`` true series.
    :param method: ``pearson`` or ``spearman``.
    :returns: ``MccResult``; ``assignment[i]`` is the truth column matched
        to estimated column ``i``.
    """
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.ndim != 2 or est.shape != truth.shape:
        raise exception.ShapeMismatch(
            reason='estimate %s vs truth %s' % (est.shape, truth.shape))
    if est.shape[0] < MIN_SAMPLES:
        raise exception.PreconditionFailed(
            reason='need at least %d samples' % MIN_SAMPLES)
    if method not in MCC_METHODS:
        raise exception.PreconditionFailed(
            reason='unknown correlation %r' % method)
    if method == 'spearman':
        est = stats.rankdata(est, axis=0)
        truth = stats.rankdata(truth, axis=0)
    corr = np.abs(_standardize(est, 'estimate').T
                  @ _standardize(truth, 'truth'))
    corr = np.clip(corr, 0.0, 1.0)
    rows, cols = optimize.linear_sum_assignment(corr, maximize=True)
    score = float(corr[rows, cols].mean())
    return MccResult(score, cols[np.argsort(rows)], corr)


def kernel_error(phi_hat, phi_true, alignment=None):
    """Relative Frobenius error of the aligned estimate.

    :returns: ``(error, relative)``; ``relative`` is False when the true
        kernel is zero and the absolute error is reported instead.
    """
    phi_true = np.asarray(phi_true)
    aligned = np.asarray(phi_hat)
    if alignment is not None:
        aligned = alignment.kernel(aligned)
    if aligned.shape != phi_true.shape:
        raise exception.ShapeMismatch(
            reason='estimate %s vs truth %s' % (aligned.shape,
                                                phi_true.shape))
    error = float(linalg.norm(aligned - phi_true))
    norm = float(linalg.norm(phi_true))
    if norm == 0:
        LOG.warning('True kernel is zero; reporting absolute error')
        return error, False
    return error / norm, True


@dataclasses.dataclass(frozen=True)
class ConvergenceReport:
    """Gaps between binned continuous-time and INAR(delta) statistics.

    ``per_seed`` has shape ``(seeds, deltas, 3)`` holding the mean-rate,
    variance and energy-distance gaps.
    """

    deltas: tuple
    seeds: tuple
    per_seed: np.ndarray

    COLUMNS = ('mean_rate_gap', 'variance_gap', 'energy_distance')

    @property
    def discrepancies(self):
        return self.per_seed.mean(axis=0)

    @property
    def mean_rate_gap(self):
        return self.discrepancies[:, 0]

    @property
    def variance_gap(self):
        return self.discrepancies[:, 1]

    @property
    def energy_distance(self):
        return self.discrepancies[:, 2]

    def to_dict(self):
        data = {'deltas': list(self.deltas), 'seeds': list(self.seeds),
                'per_seed': self.per_seed.tolist()}
        for k, name in enumerate(self.COLUMNS):
            data[name] = self.discrepancies[:, k].tolist()
        return data

    def to_csv(self):
        buf = io.StringIO()
        table = np.column_stack([self.deltas, self.discrepancies])
        np.savetxt(buf, table, fmt='%.12g', delimiter=',',
                   header=','.join(('delta',) + self.COLUMNS),
                   comments='')
        return buf.getvalue()


def _gaps(continuous, discrete, delta, horizon):
    a = continuous.counts.astype(float)
    b = discrete.counts.astype(float)
    rate = np.abs(a.sum(axis=0) - b.sum(axis=0)).mean() / horizon
    variance = np.abs(a.var(axis=0) - b.var(axis=0)).mean() / delta
    energy = stats.energy_distance(a.ravel(), b.ravel())
    return rate, variance, energy


def convergence_suite(model, deltas, horizon, seeds, threads=None):
    """Compare ``simulate_inar`` with the binned continuous simulation.

    Each seed simulates one continuous trajectory, bins it at every
    ``delta`` and draws an independent INAR(delta) path per ``delta``.

    :param deltas: Strictly decreasing bin widths.
    :param seeds: Iterable of integer seeds.
    :returns: ``ConvergenceReport``
    """
    hawkes_model.require_stable(model)
    deltas = tuple(float(d) for d in deltas)
    if not deltas or any(d <= 0 for d in deltas) or any(
            b >= a for a, b in zip(deltas, deltas[1:])):
        raise exception.PreconditionFailed(
            reason='deltas must be positive and strictly decreasing, '
                   'got %s' % (deltas,))
    seeds = tuple(int(s) for s in seeds)

    def run(seed):
        events = simulator.simulate(model, horizon, seed)
        rows = []
        for delta in deltas:
            binned = simulator.bin_events(events, delta)
            inar = simulator.simulate_inar(model, delta, horizon, seed)
            rows.append(_gaps(binned, inar, delta, horizon))
        LOG.debug('Convergence seed %d done', seed)
        return rows

    per_seed = np.array(utils.parallel_map(run, seeds, threads),
                        dtype=float).reshape(len(seeds), len(deltas), 3)
    return ConvergenceReport(deltas, seeds, per_seed)
