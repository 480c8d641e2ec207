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

"""Parametric Hawkes models.

A model is a baseline vector ``u`` and a ``p x p`` grid of causal
kernels, entry ``(i, j)`` carrying the influence of process ``j`` on
process ``i``. Kernels and models are frozen; every function here is
pure.
"""

import dataclasses
import json
import math
import typing as ty

import numpy as np
from oslo_log import log
from scipy import integrate
from scipy import linalg

import latent_hawkes.conf
from latent_hawkes import exception
from latent_hawkes import utils


CONF = latent_hawkes.conf.CONF
LOG = log.getLogger(__name__)

POWER_TOLERANCE = 1e-12
POWER_MAX_ITER = 10000
QUAD_RTOL = 1e-10
SINGULAR_COND = 1e12


def _check_nonneg(kind, **params):
    for name, value in params.items():
        if not math.isfinite(value) or value < 0:
            raise exception.InvalidKernel(
                kind=kind, reason='%s must be finite and >= 0, got %r'
                % (name, value))


@dataclasses.dataclass(frozen=True)
class Zero:
    kind: ty.ClassVar[str] = 'zero'
    monotone: ty.ClassVar[bool] = True

    def evaluate(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))[()]

    def l1_norm(self, t_max=math.inf):
        return 0.0

    def fourier(self, omega):
        return 0j

    def peak(self):
        return 0.0

    def horizon(self, tail_mass):
        return 0.0

    def scaled(self, factor):
        return self

    def params(self):
        return {}


@dataclasses.dataclass(frozen=True)
class Exponential:
    """``alpha * exp(-beta * t)`` for ``t >= 0``."""

    alpha: float
    beta: float
    kind: ty.ClassVar[str] = 'exponential'
    monotone: ty.ClassVar[bool] = True

    def __post_init__(self):
        _check_nonneg(self.kind, alpha=self.alpha)
        if not self.beta > 0 or not math.isfinite(self.beta):
            raise exception.InvalidKernel(
                kind=self.kind, reason='beta must be > 0, got %r'
                % self.beta)

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        inside = t >= 0
        safe = np.where(inside, t, 0.0)
        return np.where(inside, self.alpha * np.exp(-self.beta * safe),
                        0.0)[()]

    def l1_norm(self, t_max=math.inf):
        if math.isinf(t_max):
            return self.alpha / self.beta
        return self.alpha / self.beta * -math.expm1(-self.beta * t_max)

    def fourier(self, omega):
        return complex(self.alpha / (self.beta + 1j * omega))

    def peak(self):
        return self.alpha

    def horizon(self, tail_mass):
        if self.alpha == 0:
            return 0.0
        ratio = self.alpha / (self.beta * tail_mass)
        return max(0.0, math.log(ratio) / self.beta)

    def scaled(self, factor):
        return dataclasses.replace(self, alpha=self.alpha * factor)

    def params(self):
        return {'alpha': self.alpha, 'beta': self.beta}


@dataclasses.dataclass(frozen=True)
class PowerLaw:
    """``alpha / (t + c) ** beta`` on ``[0, t_max]``.

    Exponents at or below 1 are not integrable on the half line, so such
    kernels are truncated at ``t_max`` (``[simulation]powerlaw_t_max``
    when not given). ``t_max=math.inf`` may still be requested
    explicitly; integrals over it then raise ``DivergentIntegral``.
    """

    alpha: float
    beta: float
    c: float
    t_max: ty.Optional[float] = None
    kind: ty.ClassVar[str] = 'powerlaw'
    monotone: ty.ClassVar[bool] = True

    def __post_init__(self):
        _check_nonneg(self.kind, alpha=self.alpha, beta=self.beta)
        if not self.c > 0 or not math.isfinite(self.c):
            raise exception.InvalidKernel(
                kind=self.kind, reason='offset c must be > 0, got %r'
                % self.c)
        t_max = self.t_max
        if t_max is None:
            t_max = (CONF.simulation.powerlaw_t_max if self.beta <= 1
                     else math.inf)
        if not t_max > 0:
            raise exception.InvalidKernel(
                kind=self.kind, reason='t_max must be > 0, got %r'
                % t_max)
        object.__setattr__(self, 't_max', float(t_max))

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0) & (t <= self.t_max)
        safe = np.where(inside, t, 0.0)
        return np.where(inside, self.alpha * (safe + self.c) ** -self.beta,
                        0.0)[()]

    def _upper(self, t_max):
        upper = min(t_max, self.t_max)
        if math.isinf(upper) and self.beta <= 1 and self.alpha > 0:
            raise exception.DivergentIntegral(kind=self.kind,
                                              beta=self.beta)
        return upper

    def l1_norm(self, t_max=math.inf):
        upper = self._upper(t_max)
        if self.alpha == 0:
            return 0.0
        value, _err = integrate.quad(
            lambda t: (t + self.c) ** -self.beta, 0.0, upper,
            epsabs=0.0, epsrel=QUAD_RTOL, limit=500)
        return self.alpha * value

    def fourier(self, omega):
        upper = self._upper(math.inf)
        if omega == 0:
            return complex(self.l1_norm())
        if self.alpha == 0:
            return 0j
        w = abs(omega)

        def f(t):
            return (t + self.c) ** -self.beta

        # QAWO on a finite support, QAWF on the half line.
        if math.isinf(upper):
            re, _ = integrate.quad(f, 0.0, np.inf, weight='cos', wvar=w,
                                   epsabs=1e-13, limlst=200)
            im, _ = integrate.quad(f, 0.0, np.inf, weight='sin', wvar=w,
                                   epsabs=1e-13, limlst=200)
        else:
            re, _ = integrate.quad(f, 0.0, upper, weight='cos', wvar=w,
                                   epsabs=1e-13, epsrel=QUAD_RTOL,
                                   limit=500)
            im, _ = integrate.quad(f, 0.0, upper, weight='sin', wvar=w,
                                   epsabs=1e-13, epsrel=QUAD_RTOL,
                                   limit=500)
        value = self.alpha * complex(re, -im)
        return value if omega > 0 else value.conjugate()

    def peak(self):
        return self.alpha * self.c ** -self.beta

    def horizon(self, tail_mass):
        if self.alpha == 0:
            return 0.0
        if self.beta > 1:
            # Closed-form tail: alpha (t + c)^(1 - beta) / (beta - 1).
            tail = (tail_mass * (self.beta - 1) / self.alpha)
            t = tail ** (1.0 / (1 - self.beta)) - self.c
            return float(min(max(t, 0.0), self.t_max))
        return self.t_max

    def scaled(self, factor):
        return dataclasses.replace(self, alpha=self.alpha * factor)

    def params(self):
        t_max = None if math.isinf(self.t_max) else self.t_max
        return {'alpha': self.alpha, 'beta': self.beta, 'c': self.c,
                't_max': t_max}


@dataclasses.dataclass(frozen=True)
class Rectangular:
    """``height`` on the closed support ``[start, end]``."""

    height: float
    start: float
    end: float
    kind: ty.ClassVar[str] = 'rectangular'

    def __post_init__(self):
        _check_nonneg(self.kind, height=self.height, start=self.start)
        if not self.end > self.start or not math.isfinite(self.end):
            raise exception.InvalidKernel(
                kind=self.kind, reason='support end %r must exceed start '
                '%r' % (self.end, self.start))

    @property
    def monotone(self):
        return self.start == 0

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= self.start) & (t <= self.end)
        return np.where(inside, self.height, 0.0)[()]

    def l1_norm(self, t_max=math.inf):
        return self.height * max(0.0, min(self.end, t_max) - self.start)

    def fourier(self, omega):
        if omega == 0:
            return complex(self.l1_norm())
        a = np.exp(-1j * omega * self.start)
        b = np.exp(-1j * omega * self.end)
        return complex(self.height * (a - b) / (1j * omega))

    def peak(self):
        return self.height

    def horizon(self, tail_mass):
        return self.end if self.height > 0 else 0.0

    def scaled(self, factor):
        return dataclasses.replace(self, height=self.height * factor)

    def params(self):
        return {'height': self.height, 'start': self.start,
                'end': self.end}


KERNEL_KINDS = {cls.kind: cls
                for cls in (Zero, Exponential, PowerLaw, Rectangular)}

Kernel = ty.Union[Zero, Exponential, PowerLaw, Rectangular]


def kernel_to_dict(kernel):
    return {'kind': kernel.kind, 'params': kernel.params()}


def kernel_from_dict(data):
    try:
        cls = KERNEL_KINDS[data['kind']]
    except KeyError:
        raise exception.InvalidKernel(
            kind=data.get('kind'), reason='unknown kernel kind')
    try:
        return cls(**data.get('params', {}))
    except TypeError as e:
        raise exception.InvalidKernel(kind=cls.kind, reason=str(e))


def kernel_eval(kernel, t):
    """Return ``phi(t)``; zero for ``t < 0``."""
    if not math.isfinite(t):
        raise exception.PreconditionFailed(reason='t must be finite')
    return float(kernel.evaluate(t))


def kernel_l1_norm(kernel, t_max=math.inf):
    if not t_max > 0:
        raise exception.PreconditionFailed(reason='t_max must be > 0')
    return kernel.l1_norm(t_max)


def kernel_fourier(kernel, omega):
    """Return ``int_0^inf phi(t) exp(-i omega t) dt``."""
    if not math.isfinite(omega):
        raise exception.PreconditionFailed(reason='omega must be finite')
    return kernel.fourier(omega)


@dataclasses.dataclass(frozen=True)
class StabilityReport:
    l1_norm_matrix: np.ndarray
    spectral_radius: float
    stationary_intensity: ty.Optional[np.ndarray]
    stable: bool
    iterations: int

    def to_dict(self):
        lam = self.stationary_intensity
        return {'l1_norm_matrix': self.l1_norm_matrix.tolist(),
                'spectral_radius': self.spectral_radius,
                'stationary_intensity': None if lam is None
                else lam.tolist(),
                'stable': self.stable}


@dataclasses.dataclass(frozen=True)
class HawkesModel:
    baseline: tuple
    kernels: tuple

    def __post_init__(self):
        baseline = tuple(float(v) for v in self.baseline)
        kernels = tuple(tuple(row) for row in self.kernels)
        p = len(baseline)
        if p == 0:
            raise exception.InvalidModel(reason='no processes')
        if len(kernels) != p or any(len(row) != p for row in kernels):
            raise exception.InvalidModel(
                reason='kernel grid must be %dx%d' % (p, p))
        if any(not math.isfinite(v) or v < 0 for v in baseline):
            raise exception.InvalidModel(
                reason='baseline entries must be finite and >= 0')
        if not any(v > 0 for v in baseline):
            raise exception.InvalidModel(
                reason='at least one baseline entry must be > 0')
        object.__setattr__(self, 'baseline', baseline)
        object.__setattr__(self, 'kernels', kernels)
        # Integrability is checked eagerly; divergent kernels raise here.
        object.__setattr__(self, '_l1', np.array(
            [[k.l1_norm() for k in row] for row in kernels]))

    @property
    def p(self):
        return len(self.baseline)

    @property
    def u(self):
        return np.array(self.baseline)

    def l1_matrix(self):
        return self._l1.copy()

    def kernel(self, i, j):
        return self.kernels[i][j]

    def phi(self, omega):
        """Return the complex kernel matrix at ``omega`` rad/second."""
        return np.array([[k.fourier(omega) for k in row]
                         for row in self.kernels], dtype=complex)

    def evaluate(self, t):
        return np.array([[k.evaluate(t) for k in row]
                         for row in self.kernels], dtype=float)

    def all_exponential(self):
        return all(k.kind in ('exponential', 'zero')
                   for row in self.kernels for k in row)

    def with_kernel(self, i, j, kernel):
        rows = [list(row) for row in self.kernels]
        rows[i][j] = kernel
        return HawkesModel(self.baseline, rows)

    def with_baseline(self, baseline):
        return HawkesModel(tuple(baseline), self.kernels)

    def horizon(self, tail_mass=None):
        if tail_mass is None:
            tail_mass = CONF.simulation.tail_mass
        horizon = max(k.horizon(tail_mass)
                      for row in self.kernels for k in row)
        cap = CONF.simulation.max_history
        if horizon > cap:
            LOG.warning('History window %.6g s capped at %.6g s', horizon,
                        cap)
            horizon = cap
        return horizon

    def discretize(self, delta, tail_mass=None):
        """INAR(delta) lag weights.

        :param delta: Bin width in seconds.
        :param tail_mass: Truncation mass, see ``horizon``.
        :returns: Array ``W`` of shape ``(L, p, p)`` where ``W[tau - 1]``
            is ``Phi(tau * delta) * delta``.
        """
        if not delta > 0:
            raise exception.PreconditionFailed(reason='delta must be > 0')
        lags = max(1, int(math.ceil(self.horizon(tail_mass) / delta)))
        t = delta * np.arange(1, lags + 1)
        weights = np.empty((lags, self.p, self.p))
        for i, row in enumerate(self.kernels):
            for j, k in enumerate(row):
                weights[:, i, j] = k.evaluate(t) * delta
        return weights

    def discrete_kernel_fourier(self, delta, theta, weights=None):
        """Per-bin kernel transform ``sum_tau W_tau exp(-i theta tau)``."""
        if weights is None:
            weights = self.discretize(delta)
        tau = np.arange(1, weights.shape[0] + 1)
        phase = np.exp(-1j * theta * tau)
        return np.tensordot(phase, weights, axes=(0, 0))

    def discrete_transfer(self, delta, theta, weights=None):
        """Per-bin transfer ``(I - Phi_delta(theta))^-1``."""
        phi = self.discrete_kernel_fourier(delta, theta, weights)
        return _invert(np.eye(self.p) - phi, theta)

    def to_dict(self):
        return {'p': self.p,
                'baseline': list(self.baseline),
                'kernels': [[kernel_to_dict(k) for k in row]
                            for row in self.kernels]}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        try:
            model = cls(tuple(data['baseline']),
                        [[kernel_from_dict(k) for k in row]
                         for row in data['kernels']])
        except (KeyError, TypeError) as e:
            raise exception.InvalidModel(reason='malformed document: %s'
                                         % e)
        if 'p' in data and data['p'] != model.p:
            raise exception.InvalidModel(
                reason='declared p=%s but baseline has %d entries'
                % (data['p'], model.p))
        return model

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _perron_radius(matrix, tol=POWER_TOLERANCE, max_iter=POWER_MAX_ITER):
    # Power iteration on I + G: the shift makes the Perron root strictly
    # dominant even when G is reducible or nilpotent.
    p = matrix.shape[0]
    if not np.all(np.isfinite(matrix)):
        raise exception.NotConverged(routine='power iteration',
                                     iterations=0, last=float('nan'))
    shifted = np.eye(p) + matrix
    x = np.full(p, 1.0 / math.sqrt(p))
    estimate = 1.0
    for iteration in range(1, max_iter + 1):
        y = shifted @ x
        norm = linalg.norm(y)
        if abs(norm - estimate) <= tol * max(1.0, norm):
            return max(0.0, norm - 1.0), iteration
        estimate = norm
        x = y / norm
    # Defective Perron roots (one-way excitation chains) only converge
    # like 1/k under power iteration.
    try:
        radius = float(np.max(np.abs(linalg.eigvals(matrix))))
    except linalg.LinAlgError:
        raise exception.NotConverged(routine='power iteration',
                                     iterations=max_iter,
                                     last=estimate - 1.0)
    LOG.debug('Power iteration stalled at %.6g; dense eigenvalues give '
              '%.6g', estimate - 1.0, radius)
    return radius, max_iter


def check_stability(model):
    """Compute the L1-norm matrix, its spectral radius and Lambda*.

    :param model: ``HawkesModel``
    :returns: ``StabilityReport``
    :raises: NotConverged if the power iteration stalls
    """
    g = model.l1_matrix()
    radius, iterations = _perron_radius(g)
    stable = radius < 1.0
    lam = None
    if stable:
        lam = linalg.solve(np.eye(model.p) - g, model.u)
    LOG.debug('Spectral radius %.6g after %d iterations', radius,
              iterations)
    return StabilityReport(g, radius, lam, stable, iterations)


def _invert(matrix, omega):
    cond = np.linalg.cond(matrix)
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise exception.SingularTransfer(omega=omega, cond=cond)
    return linalg.inv(matrix)


def transfer_matrix(model, omega, report=None):
    """Return ``H(omega) = (I - Phi(omega))^-1`` for a stable model."""
    report = report or check_stability(model)
    if not report.stable:
        raise exception.UnstableModel(radius=report.spectral_radius)
    return _invert(np.eye(model.p) - model.phi(omega), omega)


def require_stable(model):
    report = check_stability(model)
    if not report.stable:
        raise exception.UnstableModel(radius=report.spectral_radius)
    return report


def random_model(p, kind, seed, radius=0.7, rng=None):
    """Sample a dense model from the benchmark simulation regime.

    Exponential kernels draw ``alpha ~ U(0.1, 0.5)``,
    ``beta ~ U(0.5, 2)``; power-law kernels ``alpha ~ U(0.5, 1.2)``,
    ``beta ~ U(0.1, 0.8)``, ``c ~ U(1.3, 1.8)`` truncated at the default
    horizon; rectangular kernels start in ``[0, 1)`` with width
    ``U(0.5, 1.5)`` and mass ``U(0.1, 0.5)``. Baselines are
    ``U(0.1, 0.2)``. All excitation is rescaled by one factor when the
    spectral radius would exceed ``radius``.
    """
    rng = rng or utils.generator(seed, utils.STREAM_MODEL)
    baseline = rng.uniform(0.1, 0.2, size=p)
    kernels = []
    for _i in range(p):
        row = []
        for _j in range(p):
            if kind == 'exponential':
                row.append(Exponential(rng.uniform(0.1, 0.5),
                                       rng.uniform(0.5, 2.0)))
            elif kind == 'powerlaw':
                row.append(PowerLaw(rng.uniform(0.5, 1.2),
                                    rng.uniform(0.1, 0.8),
                                    rng.uniform(1.3, 1.8)))
            elif kind == 'rectangular':
                start = rng.uniform(0.0, 1.0)
                width = rng.uniform(0.5, 1.5)
                mass = rng.uniform(0.1, 0.5)
                row.append(Rectangular(mass / width, start, start + width))
            elif kind == 'zero':
                row.append(Zero())
            else:
                raise exception.InvalidKernel(kind=kind,
                                              reason='unknown kind')
        kernels.append(row)
    model = HawkesModel(tuple(baseline), kernels)
    rho = check_stability(model).spectral_radius
    if rho > radius:
        factor = radius / rho
        model = HawkesModel(model.baseline,
                            [[k.scaled(factor) for k in row]
                             for row in model.kernels])
    return model


INTERVENTION_KINDS = ('hard', 'soft')


@dataclasses.dataclass(frozen=True)
class Intervention:
    """Change of the kernel from ``source`` to ``target``.

    A hard intervention replaces the kernel amplitude (``alpha`` or the
    rectangular ``height``) with ``value``; a soft one multiplies it.
    """

    target: int
    source: int
    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in INTERVENTION_KINDS:
            raise exception.InvalidModel(
                reason='unknown intervention kind %r' % self.kind)
        if not math.isfinite(self.value) or self.value < 0:
            raise exception.InvalidModel(
                reason='intervention value must be finite and >= 0')

    def apply(self, model):
        if not (0 <= self.target < model.p and 0 <= self.source < model.p):
            raise exception.DimensionMismatch(
                expected='indices below %d' % model.p,
                actual=(self.target, self.source))
        kernel = model.kernel(self.target, self.source)
        if self.kind == 'soft':
            return model.with_kernel(self.target, self.source,
                                     kernel.scaled(self.value))
        if kernel.kind == 'zero':
            if self.value:
                raise exception.InvalidKernel(
                    kind=kernel.kind,
                    reason='hard intervention needs a kernel shape')
            return model
        field = 'height' if kernel.kind == 'rectangular' else 'alpha'
        return model.with_kernel(
            self.target, self.source,
            dataclasses.replace(kernel, **{field: self.value}))

    def to_dict(self):
        return dataclasses.asdict(self)
