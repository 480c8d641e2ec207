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

"""Exceptions raised by latent_hawkes.

Every exception carries a ``msg_fmt`` template that is interpolated with
the keyword arguments given at construction time. The keyword arguments
stay available on ``kwargs`` so callers (the CLI manifest writer in
particular) can serialize structured details.
"""

from oslo_log import log


LOG = log.getLogger(__name__)


class LatentHawkesException(Exception):
    """Base exception for latent_hawkes errors."""

    msg_fmt = 'An unknown error occurred: %(reason)s'

    def __init__(self, message=None, **kwargs):
        self.kwargs = kwargs
        if not message:
            try:
                message = self.msg_fmt % kwargs
            except (KeyError, TypeError):
                # Keep the template rather than masking the real failure.
                LOG.exception('Exception in string format operation, '
                              'kwargs: %s', kwargs)
                message = self.msg_fmt
        self.message = message
        super().__init__(message)

    def to_dict(self):
        details = {k: _jsonable(v) for k, v in self.kwargs.items()}
        return {'type': type(self).__name__,
                'message': self.message,
                'details': details}


def _jsonable(value):
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if hasattr(value, 'tolist'):
        return value.tolist()
    if hasattr(value, 'to_dict'):
        return value.to_dict()
    return str(value)


# model-core


class InvalidKernel(LatentHawkesException):
    msg_fmt = 'Invalid %(kind)s kernel: %(reason)s'


class InvalidModel(LatentHawkesException):
    msg_fmt = 'Invalid Hawkes model: %(reason)s'


class DivergentIntegral(LatentHawkesException):
    msg_fmt = ('Kernel integral diverges for %(kind)s kernel with '
               'exponent %(beta)s over an infinite horizon')


class NotConverged(LatentHawkesException):
    """An iterative routine stopped before reaching its tolerance."""

    msg_fmt = ('%(routine)s did not converge after %(iterations)d '
               'iterations (last value %(last)s)')


class UnstableModel(LatentHawkesException):
    msg_fmt = ('Hawkes model is not stable: spectral radius %(radius)s '
               'of the L1-norm matrix is not below 1')


class SingularTransfer(LatentHawkesException):
    msg_fmt = ('I - Phi(w) is numerically singular at w=%(omega)s '
               '(condition number %(cond)s)')


# simulator


class ExplosionGuard(LatentHawkesException):
    msg_fmt = ('Intensity bound %(bound)s exceeded the explosion guard '
               '%(limit)s at t=%(time)s')


class IntensityCapViolation(LatentHawkesException):
    msg_fmt = ('Linked intensity %(intensity)s exceeds the cap '
               '%(cap)s at t=%(time)s')


class DimensionMismatch(LatentHawkesException):
    msg_fmt = 'Dimension mismatch: expected %(expected)s, got %(actual)s'


class MixingGenerationFailed(LatentHawkesException):
    msg_fmt = ('Could not generate a full-rank %(shape)s mixing map in '
               '%(attempts)d attempts')


class InvalidMixing(LatentHawkesException):
    msg_fmt = 'Invalid mixing map: %(reason)s'


# spectral


class SeriesTooShort(LatentHawkesException):
    msg_fmt = 'Series of length %(length)d is too short: %(reason)s'


class InvalidFrequencyGrid(LatentHawkesException):
    msg_fmt = 'Frequency grid size %(n_freq)s rejected: %(reason)s'


class NotPositiveDefinite(LatentHawkesException):
    msg_fmt = ('Spectral matrix is not positive definite at frequency '
               'index %(index)d (min eigenvalue %(eigenvalue)s)')


class RankDeficient(LatentHawkesException):
    msg_fmt = 'Rank deficiency: %(reason)s'


class SpectralConsistency(LatentHawkesException):
    msg_fmt = ('Imaginary residue %(imag)s exceeds %(limit)s relative to '
               'the real part')


# cumulants


class UnsupportedOrder(LatentHawkesException):
    msg_fmt = 'Cumulant order %(order)s is not supported (use 2, 3 or 4)'


class RankInfeasible(LatentHawkesException):
    msg_fmt = 'CP rank %(rank)d is not feasible for dim=%(dim)d, d=%(order)d'


class DecompositionFailed(LatentHawkesException):
    msg_fmt = ('CP decomposition failed: best residual %(residual)s is '
               'above %(limit)s')


class KruskalTooLarge(LatentHawkesException):
    msg_fmt = 'Kruskal rank check refused for r=%(rank)d (limit %(limit)d)'


# identify


class ShapeMismatch(LatentHawkesException):
    msg_fmt = 'Shape mismatch: %(reason)s'


class NotEnoughEnvironments(LatentHawkesException):
    msg_fmt = ('At least %(required)d environments are required, got '
               '%(count)d')


class NotIdentifiable(LatentHawkesException):
    msg_fmt = ('Kernel entries are not identifiable: variety dimension '
               '%(variety_dim)d')


# shared


class PreconditionFailed(LatentHawkesException):
    msg_fmt = 'Precondition failed: %(reason)s'


class ConfigInvalid(LatentHawkesException):
    msg_fmt = 'Invalid configuration at %(field)s: %(reason)s'


class ArtifactMissing(LatentHawkesException):
    msg_fmt = 'Required artifact %(path)s does not exist'
