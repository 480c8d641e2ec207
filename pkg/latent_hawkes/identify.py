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

"""Kernel DAG embedding, environment systems and kernel recovery.

Nodes of a kernel DAG are indexed ``0 .. N-1``. ``matrix[j, c]`` is the
weight of the edge ``j -> c``. Observed columns obey::

    K = F (I - M^T)^-1

so column ``j`` of ``K`` equals ``F_j + sum_c M[j, c] K_c``. A kernel
snapshot ``Phi`` (row target, column source) embeds as the bipartite DAG
from the lagged copies ``0 .. p-1`` to the current copies ``p .. 2p-1``,
with each lagged node tied to its current twin through a shared mixing
column.
"""

import dataclasses
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


def _is_acyclic(support):
    power = support.astype(int)
    for _ in range(support.shape[0]):
        if not power.any():
            return True
        power = (power @ support.astype(int) > 0).astype(int)
    return not power.any()


@dataclasses.dataclass(frozen=True)
class KernelDag:
    matrix: np.ndarray
    twins: tuple = ()
    threshold: float = None
    p: int = None

    def __post_init__(self):
        matrix = np.array(self.matrix)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise exception.ShapeMismatch(
                reason='kernel DAG matrix must be square, got %s'
                % (matrix.shape,))
        if not np.all(np.isfinite(matrix)):
            raise exception.PreconditionFailed(
                reason='kernel DAG entries must be finite')
        if self.threshold is None:
            object.__setattr__(self, 'threshold',
                               CONF.identify.child_threshold)
        object.__setattr__(self, 'matrix', matrix)
        twins = tuple((int(a), int(b)) for a, b in self.twins)
        for a, b in twins:
            if not (0 <= a < self.size and 0 <= b < self.size) or a == b:
                raise exception.PreconditionFailed(
                    reason='invalid twin pair (%d, %d)' % (a, b))
        object.__setattr__(self, 'twins', twins)
        if not _is_acyclic(self.support):
            raise exception.PreconditionFailed(
                reason='kernel DAG support has a cycle')

    @property
    def size(self):
        return self.matrix.shape[0]

    @property
    def support(self):
        return np.abs(self.matrix) > self.threshold

    def children(self, node):
        return tuple(int(c) for c in np.flatnonzero(self.support[node]))

    def descendants(self, node):
        seen = set()
        stack = list(self.children(node))
        while stack:
            child = stack.pop()
            if child not in seen:
                seen.add(child)
                stack.extend(self.children(child))
        return seen

    def sink_twin(self, node):
        """Return the twin of ``node`` when that twin has no children."""
        for a, b in self.twins:
            other = b if a == node else a if b == node else None
            if other is not None and not self.children(other):
                return other
        return None

    def resolvent(self):
        """``(I - M)^-1`` as the finite power series of a nilpotent M."""
        out = np.eye(self.size, dtype=self.matrix.dtype)
        power = np.eye(self.size, dtype=self.matrix.dtype)
        for _ in range(self.size):
            power = power @ self.matrix
            if not power.any():
                break
            out = out + power
        return out

    def mixed(self, node_mixing):
        """Forward map ``F_G (I - M^T)^-1``."""
        node_mixing = np.asarray(node_mixing)
        if node_mixing.shape[1] != self.size:
            raise exception.ShapeMismatch(
                reason='mixing has %d columns for %d nodes'
                % (node_mixing.shape[1], self.size))
        return node_mixing @ self.resolvent().T

    def to_dict(self):
        data = {'p': self.p, 'size': self.size,
                'twins': [list(t) for t in self.twins],
                'children': [list(self.children(j))
                             for j in range(self.size)]}
        if np.iscomplexobj(self.matrix):
            data['matrix'] = utils.complex_to_pairs(self.matrix)
        else:
            data['matrix'] = self.matrix.tolist()
        return data


def embed_kernel_dag(phi, threshold=None):
    """Embed a ``p x p`` kernel snapshot into its ``2p`` node DAG.

    :param phi: Snapshot with ``phi[i, j]`` the kernel from ``j`` to
        ``i``; real or complex.
    :returns: ``KernelDag`` with lagged node ``j`` tied to current node
        ``p + j``.
    """
    phi = np.asarray(phi)
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
        raise exception.ShapeMismatch(
            reason='kernel snapshot must be square, got %s' % (phi.shape,))
    if not np.all(np.isfinite(phi)):
        raise exception.PreconditionFailed(
            reason='kernel snapshot entries must be finite')
    p = phi.shape[0]
    matrix = np.zeros((2 * p, 2 * p), dtype=np.result_type(phi, float))
    matrix[:p, p:] = phi.T
    return KernelDag(matrix, tuple((j, p + j) for j in range(p)),
                     threshold, p)


def bipartite_support(p):
    """Full bipartite template used when the kernel pattern is unknown."""
    return embed_kernel_dag(np.ones((p, p)))


def bipartite_mixing(mixing):
    """Node mixing ``[F, F]`` of a bipartite embedding."""
    mixing = np.asarray(mixing)
    return np.concatenate([mixing, mixing], axis=1)


def generic_support(p):
    # Everything except the lower-left block and self loops. The count is
    # 3p^2 - 2p.
    support = np.ones((2 * p, 2 * p), dtype=bool)
    support[p:, :p] = False
    np.fill_diagonal(support, False)
    return support


@dataclasses.dataclass(frozen=True)
class EnvironmentSet:
    """Transfer snapshots of several environments at one frequency.

    :param snapshots: Array ``(E, n, N)``; environment 0 is the
        reference.
    :param dag: ``KernelDag`` whose support lists the candidate edges.
    :param perturbed: One collection of ``(source, target)`` node pairs
        per environment naming the edges it changed.
    """

    snapshots: np.ndarray
    dag: KernelDag
    perturbed: tuple = None
    labels: tuple = None

    def __post_init__(self):
        try:
            snapshots = np.stack([np.asarray(s) for s in self.snapshots])
        except ValueError as e:
            raise exception.ShapeMismatch(reason=str(e))
        if snapshots.ndim != 3:
            raise exception.ShapeMismatch(
                reason='snapshots must be a stack of matrices')
        if snapshots.shape[2] != self.dag.size:
            raise exception.ShapeMismatch(
                reason='snapshots have %d columns, DAG has %d nodes'
                % (snapshots.shape[2], self.dag.size))
        count = snapshots.shape[0]
        perturbed = self.perturbed
        if perturbed is None:
            perturbed = ((),) * count
        perturbed = tuple(frozenset(tuple(e) for e in env)
                          for env in perturbed)
        if len(perturbed) != count:
            raise exception.ShapeMismatch(
                reason='%d intervention records for %d environments'
                % (len(perturbed), count))
        labels = self.labels
        if labels is None:
            labels = tuple('env%d' % k for k in range(count))
        object.__setattr__(self, 'snapshots', snapshots)
        object.__setattr__(self, 'perturbed', perturbed)
        object.__setattr__(self, 'labels', tuple(labels))

    @property
    def count(self):
        return self.snapshots.shape[0]

    def perturbed_sources(self, k):
        return {source for source, _target in self.perturbed[k]}

    def usable(self, node):
        """Environments that keep the out-edges of ``node`` unchanged."""
        return [k for k in range(self.count)
                if node not in self.perturbed_sources(k)]


def detect_targets(transfers, threshold=None):
    """Kernel entries each environment changed against the reference.

    Each snapshot ``G`` gives ``Phi = I - G^-1``. Entry ``(i, j)`` of
    environment ``k`` is a target when its largest change over the
    snapshots exceeds ``threshold`` times the largest entry magnitude of
    the two environments at that snapshot.

    :param transfers: Array ``(E, S, p, p)`` of per-bin transfer
        snapshots; environment 0 is the reference.
    :param threshold: Defaults to ``[identify] change_threshold``.
    :returns: ``tuple`` with one ``tuple`` of bipartite edges
        ``(j, p + i)`` per environment, empty for the reference.
    """
    if threshold is None:
        threshold = CONF.identify.change_threshold
    transfers = np.asarray(transfers)
    if transfers.ndim != 4 or transfers.shape[-1] != transfers.shape[-2]:
        raise exception.ShapeMismatch(
            reason='transfer snapshots must be (E, S, p, p), got %s'
            % (transfers.shape,))
    p = transfers.shape[-1]
    phis = np.eye(p) - np.linalg.inv(transfers)
    ref = phis[0]
    targets = [()]
    for k in range(1, len(phis)):
        scale = np.maximum(np.abs(ref).max(axis=(1, 2)),
                           np.abs(phis[k]).max(axis=(1, 2)))
        scale = np.where(scale > 0, scale, 1.0)[:, np.newaxis, np.newaxis]
        change = np.max(np.abs(phis[k] - ref) / scale, axis=0)
        rows, cols = np.nonzero(change > threshold)
        edges = tuple((int(j), p + int(i)) for i, j in zip(rows, cols))
        LOG.info('Environment %d changed kernel entries %s', k,
                 [(int(i), int(j)) for i, j in zip(rows, cols)] or 'none')
        targets.append(edges)
    return tuple(targets)


@dataclasses.dataclass(frozen=True)
class NodeSystem:
    node: int
    children: tuple
    anchor: np.ndarray
    anchor_rhs: np.ndarray
    block: np.ndarray
    block_rhs: np.ndarray

    @property
    def unknowns(self):
        return self.matrix.shape[1]

    @property
    def matrix(self):
        return np.concatenate([self.anchor, self.block])

    @property
    def rhs(self):
        return np.concatenate([self.anchor_rhs, self.block_rhs])


def _empty(cols, dtype):
    return np.zeros((0, cols), dtype=dtype), np.zeros(0, dtype=dtype)


def _generic_system(envs, node, children):
    # K_j = F_j + K_ch M[j, ch] with both M[j, ch] and F_j unknown.
    n = envs.snapshots.shape[1]
    usable = envs.usable(node)
    ch = list(children)
    identity = np.eye(n, dtype=envs.snapshots.dtype)
    anchor = np.concatenate(
        [np.concatenate([envs.snapshots[k][:, ch], identity], axis=1)
         for k in usable])
    anchor_rhs = np.concatenate([envs.snapshots[k][:, node]
                                 for k in usable])
    block, block_rhs = _empty(len(ch) + n, envs.snapshots.dtype)
    return NodeSystem(node, children, anchor, anchor_rhs, block, block_rhs)


def assemble_polysystem(envs, generic=False):
    """Build one linear system per source node.

    Anchor rows use a sink twin: ``K_ch x = K_j - K_twin`` in every
    environment that leaves the out-edges of ``j`` alone. Block rows
    ``M[j]`` difference those environments against the reference,
    ``dK_ch x = dK_j``, and are empty when every descendant of ``j`` is
    a child.

    The generic mode drops twins and differencing. Each node then solves
    ``[K_ch, I] [M[j, ch]; F_j] = K_j`` over the full support with the
    mixing column ``F_j`` unknown. On one environment the identity block
    leaves ``|ch(j)|`` free coordinates per node whatever the data, which
    is the single-environment lower bound.

    :returns: ``list`` of ``NodeSystem``, one per node with children.
    """
    if not generic and envs.count < 2:
        raise exception.NotEnoughEnvironments(required=2, count=envs.count)
    dag = envs.dag
    dtype = envs.snapshots.dtype
    support = dag.support
    if generic:
        if dag.p is None:
            raise exception.PreconditionFailed(
                reason='generic assembly needs a bipartite embedding')
        support = generic_support(dag.p)
    systems = []
    for node in range(dag.size):
        children = tuple(int(c) for c in np.flatnonzero(support[node]))
        if not children:
            continue
        if generic:
            systems.append(_generic_system(envs, node, children))
            continue
        anchor, anchor_rhs = _empty(len(children), dtype)
        block, block_rhs = _empty(len(children), dtype)
        ch = list(children)
        usable = envs.usable(node)
        twin = dag.sink_twin(node)
        if twin is not None:
            anchor = np.concatenate(
                [envs.snapshots[k][:, ch] for k in usable])
            anchor_rhs = np.concatenate(
                [envs.snapshots[k][:, node]
                 - envs.snapshots[k][:, twin] for k in usable])
        if dag.descendants(node) != set(children):
            ref = envs.snapshots[0]
            diffs = [envs.snapshots[k] - ref for k in usable if k]
            if diffs:
                block = np.concatenate([d[:, ch] for d in diffs])
                block_rhs = np.concatenate([d[:, node] for d in diffs])
        systems.append(NodeSystem(node, children, anchor, anchor_rhs,
                                  block, block_rhs))
    LOG.debug('Assembled %d node systems from %d environments',
              len(systems), envs.count)
    return systems


def numerical_rank(matrix, rank_factor=None, rank_threshold=None):
    """Rank with ``max(rows, cols) * eps * sigma_max * rank_factor``.

    ``rank_threshold`` replaces the rule with a relative singular value
    cutoff.
    """
    matrix = np.asarray(matrix)
    if matrix.size == 0:
        return 0
    if rank_factor is None:
        rank_factor = CONF.identify.rank_factor
    if rank_threshold is None:
        rank_threshold = CONF.identify.rank_threshold
    sv = linalg.svdvals(matrix)
    if sv[0] == 0:
        return 0
    if rank_threshold is not None:
        tol = rank_threshold * sv[0]
    else:
        tol = (max(matrix.shape) * np.finfo(float).eps * sv[0]
               * rank_factor)
    return int(np.sum(sv > tol))


@dataclasses.dataclass(frozen=True)
class NodeRank:
    node: int
    children: int
    rank: int
    consistent: bool
    unknowns: int

    @property
    def free(self):
        return self.unknowns - self.rank

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class VarietyReport:
    variety_dim: int
    per_node: tuple

    @property
    def identifiable(self):
        return self.variety_dim == 0 and all(n.consistent
                                             for n in self.per_node)

    def to_dict(self):
        return {'variety_dim': self.variety_dim,
                'identifiable': self.identifiable,
                'per_node': [n.to_dict() for n in self.per_node]}


def variety_dimension(systems, rank_factor=None, rank_threshold=None,
                      consistency_threshold=None):
    """Dimension ``sum_j (unknowns_j - rank M[j])`` of the solution set.

    A node has ``|ch(j)|`` unknowns, plus its mixing column when the
    system came from the generic assembly.

    Inconsistent augmented ranks are flagged on the node, never raised.
    """
    if consistency_threshold is None:
        consistency_threshold = CONF.identify.consistency_threshold
    if consistency_threshold is None:
        consistency_threshold = rank_threshold
    per_node = []
    for system in systems:
        rank = numerical_rank(system.matrix, rank_factor, rank_threshold)
        augmented = numerical_rank(
            np.column_stack([system.matrix, system.rhs]), rank_factor,
            consistency_threshold)
        per_node.append(NodeRank(system.node, len(system.children), rank,
                                 augmented == rank, system.unknowns))
    dim = sum(n.free for n in per_node)
    report = VarietyReport(dim, tuple(per_node))
    if dim:
        LOG.info('Variety dimension %d: the kernel entries are not '
                 'identifiable from these environments', dim)
    return report


def _lstsq(matrix, rhs):
    x, *_ = linalg.lstsq(matrix, rhs)
    resid = matrix @ x - rhs
    scale = linalg.norm(rhs)
    residual = linalg.norm(resid) / scale if scale else linalg.norm(resid)
    rows, cols = matrix.shape
    if rows > cols:
        s2 = float(np.real(np.vdot(resid, resid))) / (rows - cols)
        cov = s2 * linalg.pinv(matrix.conj().T @ matrix)
        stderr = np.sqrt(np.abs(np.diag(cov)))
    else:
        stderr = np.zeros(cols)
    return x, float(residual), stderr


@dataclasses.dataclass(frozen=True)
class KernelSolution:
    matrix: np.ndarray
    stderr: np.ndarray
    node_mixing: np.ndarray
    residual: float
    per_environment: tuple
    p: int = None

    @property
    def phi(self):
        p = self.p
        return self.matrix[:p, p:].T

    @property
    def phi_stderr(self):
        p = self.p
        return self.stderr[:p, p:].T

    def environment_phi(self, k):
        p = self.p
        return self.per_environment[k][:p, p:].T

    def to_dict(self):
        data = {'residual': self.residual}
        if self.p is not None:
            data['phi'] = utils.complex_to_pairs(self.phi)
            data['phi_stderr'] = self.phi_stderr.tolist()
            data['per_environment'] = [
                utils.complex_to_pairs(self.environment_phi(k))
                for k in range(len(self.per_environment))]
        else:
            data['matrix'] = utils.complex_to_pairs(self.matrix)
            data['stderr'] = self.stderr.tolist()
        return data


def solve_kernels(envs, report=None, systems=None, threads=None):
    """Least-squares kernel entries of an identifiable environment set.

    :param envs: ``EnvironmentSet``.
    :param report: ``VarietyReport``; computed when omitted.
    :returns: ``KernelSolution``; ``node_mixing`` is ``K (I - M^T)`` on
        the reference environment.
    :raises: NotIdentifiable when the variety is not zero dimensional.
    """
    systems = systems or assemble_polysystem(envs)
    report = report or variety_dimension(systems)
    if report.variety_dim > 0:
        raise exception.NotIdentifiable(variety_dim=report.variety_dim,
                                        report=report)
    dag = envs.dag
    dtype = np.result_type(envs.snapshots.dtype, float)
    size = dag.size
    matrix = np.zeros((size, size), dtype=dtype)
    stderr = np.zeros((size, size))
    results = utils.parallel_map(
        lambda s: _lstsq(s.matrix, s.rhs), systems, threads)
    residual = 0.0
    for system, (x, res, se) in zip(systems, results):
        matrix[system.node, list(system.children)] = x
        stderr[system.node, list(system.children)] = se
        residual = max(residual, res)
    per_env = []
    for k in range(envs.count):
        env_matrix = matrix.copy()
        snap = envs.snapshots[k]
        for system in systems:
            if system.node not in envs.perturbed_sources(k):
                continue
            ch = list(system.children)
            twin = dag.sink_twin(system.node)
            if twin is None:
                env_matrix[system.node, ch] = np.nan
                continue
            x, *_ = _lstsq(snap[:, ch], snap[:, system.node]
                           - snap[:, twin])
            env_matrix[system.node, ch] = x
        per_env.append(env_matrix)
    ref = envs.snapshots[0]
    node_mixing = ref @ (np.eye(size) - matrix.T)
    LOG.info('Solved %d node systems, worst relative residual %.3g',
             len(systems), residual)
    return KernelSolution(matrix, stderr, node_mixing, residual,
                          tuple(per_env), dag.p)


def recover_baseline(obs_mean, k_hat, h0_hat=None, delta=1.0):
    """Baseline from the first moment ``E[O] = K H(0) u delta``.

    Negative entries are clipped to zero.

    :returns: ``(u, clip)`` with ``clip`` the largest clipped magnitude.
    :raises: RankDeficient when ``K H(0)`` lacks full column rank.
    """
    k_hat = np.asarray(k_hat, dtype=float)
    design = k_hat
    if h0_hat is not None:
        design = k_hat @ np.real(np.asarray(h0_hat))
    rank = numerical_rank(design)
    if rank < design.shape[1]:
        raise exception.RankDeficient(
            reason='mixed transfer has rank %d < %d'
            % (rank, design.shape[1]))
    u, *_ = linalg.lstsq(design * delta, np.asarray(obs_mean, dtype=float))
    clip = float(max(0.0, -u.min()))
    if clip:
        LOG.warning('Clipped negative baseline entries, largest %.3g',
                    clip)
    return np.clip(u, 0.0, None), clip


@dataclasses.dataclass(frozen=True)
class Alignment:
    """Recovered column ``permutation[i]`` equals ``scales[i]`` times
    true column ``i``.
    """

    permutation: np.ndarray
    scales: np.ndarray
    matched: np.ndarray

    @property
    def similarity(self):
        return float(np.mean(self.matched))

    def kernel(self, phi_hat):
        phi_hat = np.asarray(phi_hat)
        perm = self.permutation
        return (phi_hat[np.ix_(perm, perm)] * self.scales[:, np.newaxis]
                / self.scales[np.newaxis, :])

    def baseline(self, u_hat):
        return np.asarray(u_hat)[self.permutation] * self.scales

    def latents(self, z_hat):
        return np.asarray(z_hat)[:, self.permutation] * self.scales

    def to_dict(self):
        return {'permutation': self.permutation.tolist(),
                'scales': self.scales.tolist(),
                'matched': self.matched.tolist(),
                'similarity': self.similarity}


def align(recovered, truth):
    """Match recovered columns to true ones by absolute cosine.

    :returns: ``Alignment``
    """
    recovered = np.asarray(recovered, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if recovered.shape != truth.shape:
        raise exception.ShapeMismatch(
            reason='recovered %s vs truth %s' % (recovered.shape,
                                                 truth.shape))
    rn = linalg.norm(recovered, axis=0)
    tn = linalg.norm(truth, axis=0)
    with np.errstate(invalid='ignore', divide='ignore'):
        cos = np.abs(truth.T @ recovered) / np.outer(tn, rn)
    cos = np.nan_to_num(cos)
    rows, cols = optimize.linear_sum_assignment(cos, maximize=True)
    perm = cols[np.argsort(rows)]
    matched = cos[np.arange(truth.shape[1]), perm]
    scales = np.ones(truth.shape[1])
    for i, j in enumerate(perm):
        if tn[i] > 0:
            scales[i] = recovered[:, j] @ truth[:, i] / tn[i] ** 2
            if scales[i] == 0:
                scales[i] = 1.0
    return Alignment(perm, scales, matched)


def align_latents(recovered, truth):
    """Align recovered latent series to true ones.

    Series are centered first. The result uses the same convention as
    ``align`` on mixing columns, so ``latents`` maps the recovered series
    back onto the true ones.
    """
    recovered = np.asarray(recovered, dtype=float)
    truth = np.asarray(truth, dtype=float)
    found = align(recovered - recovered.mean(axis=0),
                  truth - truth.mean(axis=0))
    return Alignment(found.permutation, 1.0 / found.scales, found.matched)


def _exponential_snapshot(alpha, beta, delta, theta):
    z = np.exp(-(beta * delta + 1j * theta))
    return alpha * delta * z / (1 - z)


def fit_exponential(frequencies, phis, delta):
    """Fit ``alpha exp(-beta t)`` to each entry of per-bin snapshots.

    :param frequencies: Frequencies in radians per bin.
    :param phis: Array ``(S, p, p)`` of snapshots at those frequencies.
    :returns: ``dict`` with ``alpha``, ``beta`` and ``residual`` grids.
    """
    theta = np.asarray(frequencies, dtype=float)
    phis = np.asarray(phis, dtype=complex)
    p = phis.shape[1]
    alpha = np.zeros((p, p))
    beta = np.ones((p, p))
    residual = np.zeros((p, p))
    for i, j in itertools.product(range(p), range(p)):
        target = phis[:, i, j]
        if np.max(np.abs(target)) <= CONF.identify.child_threshold:
            continue

        def resid(x, target=target):
            diff = _exponential_snapshot(x[0], x[1], delta, theta) - target
            return np.concatenate([diff.real, diff.imag])

        # Start from beta = 1 with alpha matching the zero-frequency mass.
        z0 = math.exp(-delta)
        start = max(abs(target[0]), 1e-6) * (1 - z0) / (delta * z0)
        result = optimize.least_squares(
            resid, [start, 1.0], bounds=([0.0, 1e-6], [np.inf, np.inf]))
        alpha[i, j], beta[i, j] = result.x
        scale = linalg.norm(target)
        residual[i, j] = linalg.norm(result.fun) / scale
    return {'alpha': alpha.tolist(), 'beta': beta.tolist(),
            'residual': residual.tolist()}


@dataclasses.dataclass(frozen=True)
class IdentReport:
    variety_dim: int
    per_node: tuple
    identifiable: bool
    snapshots: tuple
    solved_kernels: tuple = ()
    baseline: tuple = None
    baseline_clip: float = 0.0
    alignment: Alignment = None
    mcc: float = None
    kernel_fit: dict = None
    targets: tuple = ()

    def to_dict(self):
        return {
            'variety_dim': self.variety_dim,
            'targets': [sorted(list(edge) for edge in env)
                        for env in self.targets],
            'per_node': [n.to_dict() for n in self.per_node],
            'identifiable': self.identifiable,
            'snapshots': list(self.snapshots),
            'solved_kernels': [s.to_dict() for s in self.solved_kernels],
            'baseline': (None if self.baseline is None
                         else list(self.baseline)),
            'baseline_clip': self.baseline_clip,
            'alignment': (None if self.alignment is None
                          else self.alignment.to_dict()),
            'mcc': self.mcc,
            'kernel_fit': self.kernel_fit,
        }


def identify(env_sets, frequencies, threads=None, rank_threshold=None,
             consistency_threshold=None):
    """Run assembly, the dimension test and the solve at every snapshot.

    :param env_sets: One ``EnvironmentSet`` per snapshot frequency.
    :param rank_threshold: See ``numerical_rank``.
    :param consistency_threshold: See ``variety_dimension``.
    :returns: ``IdentReport`` with the worst-case dimension.
    :raises: NotIdentifiable carrying the report.
    """
    if len(env_sets) != len(frequencies):
        raise exception.ShapeMismatch(
            reason='%d environment sets for %d frequencies'
            % (len(env_sets), len(frequencies)))
    assembled = [assemble_polysystem(envs) for envs in env_sets]
    reports = [variety_dimension(systems, rank_threshold=rank_threshold,
                                 consistency_threshold=consistency_threshold)
               for systems in assembled]
    worst = max(reports, key=lambda r: (r.variety_dim,
                                        not r.identifiable))
    report = IdentReport(worst.variety_dim, worst.per_node,
                         all(r.identifiable for r in reports),
                         tuple(float(f) for f in frequencies),
                         targets=env_sets[0].perturbed)
    if worst.variety_dim:
        raise exception.NotIdentifiable(variety_dim=worst.variety_dim,
                                        report=report)
    solved = tuple(solve_kernels(envs, r, systems, threads)
                   for envs, r, systems in zip(env_sets, reports,
                                               assembled))
    return dataclasses.replace(report, solved_kernels=solved)
