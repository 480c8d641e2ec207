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

"""Pipeline stages: simulate, estimate, identify and evaluate.

Stages talk to each other only through files under the output
directory, so each one can be rerun on its own.
"""

import dataclasses

import numpy as np
from oslo_log import log
from scipy import linalg

import latent_hawkes.conf
from latent_hawkes import cumulants
from latent_hawkes import evaluate
from latent_hawkes import exception
from latent_hawkes import identify
from latent_hawkes import model as hawkes_model
from latent_hawkes.pipeline import artifacts
from latent_hawkes import simulator
from latent_hawkes import spectral
from latent_hawkes import utils


CONF = latent_hawkes.conf.CONF
LOG = log.getLogger(__name__)


# Inputs


def build_model(config):
    spec = config.section('model')
    if 'path' in spec:
        return hawkes_model.HawkesModel.from_dict(
            artifacts.read_json(config.resolve(spec['path'])))
    if 'random' in spec:
        random = spec['random']
        return hawkes_model.random_model(random['p'], random['kind'],
                                         config.seed,
                                         random.get('radius', 0.7))
    return hawkes_model.HawkesModel.from_dict(spec)


def build_mixing(config, p):
    spec = config.section('mixing')
    if 'path' in spec:
        return simulator.mixing_from_dict(
            artifacts.read_json(config.resolve(spec['path'])))
    if spec['kind'] == 'linear':
        return simulator.make_generic_linear(spec['n'], p, config.seed)
    return simulator.make_generic_mlp(spec['n'], p, config.seed,
                                      spec.get('layers', 2),
                                      spec.get('slope'))


def build_interventions(config, model):
    """One intervention per non-reference environment."""
    spec = config.section('environments')
    if spec.get('interventions') is not None:
        return [hawkes_model.Intervention(**item)
                for item in spec['interventions']]
    count = spec['count']
    if not count:
        return []
    p = model.p
    entries = [(i, j) for i in range(p) for j in range(p)
               if model.kernel(i, j).kind != 'zero']
    entries = entries or [(i, j) for i in range(p) for j in range(p)]
    rng = utils.generator(config.seed, utils.STREAM_ENVIRONMENT)
    picks = rng.choice(len(entries), size=count,
                       replace=count > len(entries))
    return [hawkes_model.Intervention(entries[k][0], entries[k][1],
                                      spec['kind'], spec['factor'])
            for k in picks]


def environment_count(root):
    return len(artifacts.read_json(root / 'environments.json')
               ['environments'])


# Stages


def run_simulate(config, manifest):
    """Write the models, the mixing map and per-environment data."""
    root = config.output_dir
    sim = config.section('simulation')
    model = build_model(config)
    hawkes_model.require_stable(model)
    mixing = build_mixing(config, model.p)
    interventions = build_interventions(config, model)
    models = [model] + [iv.apply(model) for iv in interventions]
    noise = simulator.noise_from_dict(sim.get('noise'))

    manifest.record(utils.write_json(root / 'model.json', model.to_dict()))
    manifest.record(utils.write_json(root / 'mixing.json',
                                     mixing.to_dict()))
    manifest.record(utils.write_json(root / 'environments.json', {
        'reference': 0,
        'environments': [
            {'label': 'env%d' % k,
             'intervention': None if not k
             else interventions[k - 1].to_dict()}
            for k in range(len(models))]}))

    delta = sim['delta']
    horizon = sim['horizon']
    for k, env_model in enumerate(models):
        hawkes_model.require_stable(env_model)
        folder = artifacts.env_dir(root, k)
        seed = utils.derive_seed(config.seed, utils.STREAM_ENVIRONMENT, k)
        if sim['method'] == 'thinning':
            events = simulator.simulate(env_model, horizon, seed)
            manifest.record(artifacts.write_events(
                folder / 'events.csv', events))
            counts = simulator.bin_events(events, delta)
        else:
            counts = simulator.simulate_inar(env_model, delta, horizon,
                                             seed, noise)
        obs = simulator.mix(counts, mixing)
        manifest.record(utils.write_json(folder / 'model.json',
                                         env_model.to_dict()))
        manifest.record(artifacts.write_series(
            folder / 'counts.csv', delta, counts.counts, 'z', '%d'))
        manifest.record(artifacts.write_series(
            folder / 'observations.csv', delta, obs.data, 'o'))
        LOG.info('Environment %d: %d bins, %d latent events', k,
                 len(counts), int(counts.counts.sum()))
    return models


def run_estimate(config, manifest):
    """Cumulants and CP factors of the reference, spectra of everyone."""
    root = config.output_dir
    est = config.section('estimation')
    cp = est['cp']
    count = environment_count(root)
    p = cp.get('rank') or artifacts.read_json(root / 'model.json')['p']

    observations = [artifacts.read_series(
        artifacts.env_dir(root, k) / 'observations.csv')
        for k in range(count)]
    prepared = cumulants.preprocess(observations[0], est['preprocess'])
    orders = sorted(set(est['orders']))
    order = est.get('order') or orders[-1]
    scan = cumulants.nonzero_cumulant_scan(prepared, est['scan_order'])
    if order not in scan:
        LOG.warning('Order %d cumulant is not distinguishable from zero; '
                    'the decomposition may be meaningless', order)
    tensors = {}
    for d in orders:
        tensors[d] = cumulants.estimate_cumulant(prepared, d)
        manifest.record(utils.write_json(
            root / ('cumulant_d%d.json' % d), tensors[d].to_dict()))
    factors = cumulants.cp_decompose(
        tensors[order], p, restarts=cp.get('restarts'), tol=cp.get('tol'),
        seed=config.seed, max_residual=cp.get('max_residual'))
    kruskal = cumulants.kruskal_check(factors.factors, order)
    summary = factors.to_dict()
    summary['kruskal'] = dataclasses.asdict(kruskal)
    summary['kruskal']['margin'] = kruskal.margin
    summary['nonzero_orders'] = sorted(scan)
    manifest.record(utils.write_json(root / 'cp_factors.json', summary))

    unmixing = cumulants.fit_unmixing(observations[0], factors.factors,
                                      est['unmixing'])
    manifest.record(utils.write_json(root / 'unmixing.json',
                                     unmixing.to_dict()))
    delta = config.section('simulation')['delta']

    def per_environment(k):
        folder = artifacts.env_dir(root, k)
        latents = unmixing.apply(observations[k])
        density = spectral.estimate_psd(latents, est['n_freq'],
                                        est['taper'], est['segments'])
        factor = spectral.recover_transfer(density)
        return folder, latents, density, factor

    for folder, latents, density, factor in utils.parallel_map(
            per_environment, range(count), config.threads):
        manifest.record(artifacts.write_series(
            folder / 'latents.csv', delta, latents, 'zhat'))
        manifest.record(utils.write_json(folder / 'spectrum.json',
                                         density.to_dict()))
        manifest.record(utils.write_json(folder / 'transfer.json',
                                         factor.to_dict()))
    return factors


def snapshot_index(theta, n_freq):
    """Nearest grid index of ``theta`` radians per bin."""
    return int(round(theta * n_freq / (2 * np.pi))) % n_freq


def mixed_snapshot(mixing, transfer):
    """Bipartite snapshot ``[F (2I - G^-1), F]``."""
    p = mixing.shape[1]
    lagged = mixing @ (2 * np.eye(p) - linalg.inv(transfer))
    return np.concatenate([lagged, mixing.astype(complex)], axis=1)


def run_identify(config, manifest):
    """Solve the kernel snapshots and the baseline."""
    root = config.output_dir
    spec = config.section('identify')
    count = environment_count(root)
    unmixing = cumulants.Unmixing.from_dict(
        artifacts.read_json(root / 'unmixing.json'))
    mixing = unmixing.mixing
    p = mixing.shape[1]
    transfers = [spectral.SpectralFactor.from_dict(artifacts.read_json(
        artifacts.env_dir(root, k) / 'transfer.json')).transfer
        for k in range(count)]
    n_freq = transfers[0].shape[0]
    frequencies = spec.get('snapshot_frequencies')
    if frequencies is None:
        frequencies = CONF.identify.snapshot_frequencies
    support = identify.bipartite_support(p)
    indices = [snapshot_index(theta, n_freq) for theta in frequencies]
    perturbed = identify.detect_targets(
        [g[indices] for g in transfers], spec.get('change_threshold'))
    env_sets = []
    for index in indices:
        env_sets.append(identify.EnvironmentSet(
            [mixed_snapshot(mixing, g[index]) for g in transfers],
            support, perturbed))
    try:
        report = identify.identify(
            env_sets, frequencies, config.threads,
            rank_threshold=spec.get('rank_threshold'),
            consistency_threshold=spec.get('consistency_threshold'))
    except exception.NotIdentifiable as e:
        manifest.record(utils.write_json(root / 'ident_report.json',
                                         e.kwargs['report'].to_dict()))
        raise
    obs = artifacts.read_series(artifacts.env_dir(root, 0)
                                / 'observations.csv')
    delta = config.section('simulation')['delta']
    baseline, clip = identify.recover_baseline(
        obs.mean(axis=0) - unmixing.floor, mixing, transfers[0][0], delta)
    fit = None
    if spec.get('fit_exponential'):
        phis = [s.phi for s in report.solved_kernels]
        fit = identify.fit_exponential(frequencies, phis, delta)
    report = dataclasses.replace(report, baseline=tuple(baseline.tolist()),
                                 baseline_clip=clip, kernel_fit=fit)
    manifest.record(utils.write_json(root / 'ident_report.json',
                                     report.to_dict()))
    return report


def _true_mixing(root):
    mixing = simulator.mixing_from_dict(
        artifacts.read_json(root / 'mixing.json'))
    if mixing.kind == simulator.LinearMixing.kind:
        return mixing.matrix
    return None


def _kernel_scores(report, models, alignment, delta):
    scores = []
    for snapshot, theta in zip(report['solved_kernels'],
                               report['snapshots']):
        per_env = []
        for k, env_phi in enumerate(snapshot['per_environment']):
            truth = models[k].discrete_kernel_fourier(delta, theta)
            error, relative = evaluate.kernel_error(
                utils.pairs_to_complex(env_phi), truth, alignment)
            per_env.append({'error': error, 'relative': relative})
        scores.append({'frequency': theta, 'environments': per_env})
    return scores


def _fit_scores(fit, model, alignment):
    if fit is None or not model.all_exponential():
        return None
    alpha = alignment.kernel(np.asarray(fit['alpha']))
    perm = alignment.permutation
    beta = np.asarray(fit['beta'])[np.ix_(perm, perm)]
    true_alpha = np.array([[getattr(k, 'alpha', 0.0) for k in row]
                           for row in model.kernels])
    alpha_error, relative = evaluate.kernel_error(alpha, true_alpha)
    return {'alpha': alpha.tolist(), 'beta': beta.tolist(),
            'alpha_error': alpha_error, 'relative': relative}


def _target_scores(report, root, alignment):
    """Declared interventions against detected targets, in true indices."""
    detected = report.get('targets') or []
    environments = artifacts.read_json(
        root / 'environments.json')['environments']
    perm = alignment.permutation
    p = len(perm)
    true_index = {int(r): i for i, r in enumerate(perm)}
    per_env = []
    for env, edges in zip(environments[1:], detected[1:]):
        found = sorted([true_index[target - p], true_index[source]]
                       for source, target in edges)
        declared = env['intervention']
        entry = (None if declared is None
                 else [declared['target'], declared['source']])
        per_env.append({'declared': entry, 'detected': found,
                        'found': entry in found})
    if not per_env:
        return None
    recall = float(np.mean([e['found'] for e in per_env]))
    return {'environments': per_env, 'recall': recall}


def run_evaluate(config, manifest):
    """Score the recovered latents, kernels and baseline."""
    root = config.output_dir
    spec = config.section('evaluate')
    delta = config.section('simulation')['delta']
    count = environment_count(root)
    models = [hawkes_model.HawkesModel.from_dict(artifacts.read_json(
        artifacts.env_dir(root, k) / 'model.json')) for k in range(count)]
    folder = artifacts.env_dir(root, 0)
    truth = artifacts.read_series(folder / 'counts.csv')
    latents = artifacts.read_series(folder / 'latents.csv')
    result = evaluate.mcc(latents, truth, spec['correlation'])

    true_mixing = _true_mixing(root)
    if true_mixing is not None:
        recovered = np.asarray(artifacts.read_json(
            root / 'cp_factors.json')['factors'])
        alignment = identify.align(recovered, true_mixing)
    else:
        alignment = identify.align_latents(latents, truth)

    report = artifacts.read_json(root / 'ident_report.json')
    scores = {'mcc': result.to_dict(), 'alignment': alignment.to_dict(),
              'kernels': _kernel_scores(report, models, alignment, delta)}
    if report.get('baseline') is not None:
        u_hat = alignment.baseline(report['baseline'])
        error, relative = evaluate.kernel_error(u_hat, models[0].u)
        scores['baseline'] = {'estimate': u_hat.tolist(), 'error': error,
                              'relative': relative}
    scores['kernel_fit'] = _fit_scores(report.get('kernel_fit'),
                                       models[0], alignment)
    scores['targets'] = _target_scores(report, root, alignment)

    conv = spec.get('convergence')
    if conv is not None:
        suite = evaluate.convergence_suite(models[0], conv['deltas'],
                                           conv['horizon'], conv['seeds'],
                                           config.threads)
        manifest.record(utils.atomic_write(root / 'convergence.csv',
                                           suite.to_csv()))
        manifest.record(utils.write_json(root / 'convergence.json',
                                         suite.to_dict()))
        scores['convergence'] = {
            'deltas': list(suite.deltas),
            'mean_rate_gap': suite.mean_rate_gap.tolist()}

    report['alignment'] = alignment.to_dict()
    report['mcc'] = result.score
    manifest.record(utils.write_json(root / 'ident_report.json', report))
    manifest.record(utils.write_json(root / 'scores.json', scores))
    LOG.info('MCC %.4f', result.score)
    return scores


STAGES = {
    'simulate': (run_simulate,),
    'estimate': (run_estimate,),
    'identify': (run_identify,),
    'evaluate': (run_evaluate,),
    'pipeline': (run_simulate, run_estimate, run_identify, run_evaluate),
}


def run(name, config):
    """Run a command and always leave a manifest behind.

    :returns: the ``Manifest`` of the run.
    :raises: whatever the failing stage raised, after recording it.
    """
    manifest = artifacts.Manifest(config.output_dir, config.digest)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    try:
        for stage in STAGES[name]:
            with manifest.stage(stage.__name__[len('run_'):]):
                stage(config, manifest)
    except Exception as e:
        LOG.error('%s failed: %s', name, e)
        manifest.write(e)
        raise
    manifest.write()
    return manifest
