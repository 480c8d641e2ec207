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

"""Pipeline configuration document.

The document is a single JSON object; ``docs/pipeline-config.md``
describes every field. Validation is hand written so that failures name
the offending field path and, when it can be located, its line.
"""

import copy
import dataclasses
import hashlib
import json
import math
import os
import pathlib

from oslo_log import log

import latent_hawkes.conf
from latent_hawkes import exception
from latent_hawkes import model as hawkes_model


CONF = latent_hawkes.conf.CONF
LOG = log.getLogger(__name__)

ENV_OUTPUT_DIR = 'LATENT_HAWKES_OUTPUT_DIR'
ENV_THREADS = 'LATENT_HAWKES_THREADS'

DEFAULTS = {
    'simulation': {'method': 'thinning', 'noise': {'kind': 'poisson'}},
    'environments': {'interventions': None, 'count': 0, 'kind': 'soft',
                     'factor': 2.0},
    'estimation': {'n_freq': 64, 'taper': 'hann', 'segments': None,
                   'orders': [3], 'order': None, 'preprocess': 'center',
                   'unmixing': 'linear',
                   'scan_order': 4,
                   'cp': {'rank': None, 'restarts': None, 'tol': None,
                          'max_residual': 0.5}},
    'identify': {'rank_threshold': None, 'consistency_threshold': 0.05,
                 'change_threshold': None, 'snapshot_frequencies': None,
                 'fit_exponential': True},
    'evaluate': {'correlation': 'pearson', 'convergence': None},
}

TOP_LEVEL = ('seed', 'model', 'mixing', 'simulation', 'environments',
             'estimation', 'identify', 'evaluate', 'output_dir', 'threads')
NOISE_KINDS = ('poisson', 'gaussian_rounded', 'mixture')
MIXING_KINDS = ('linear', 'mlp')


class _Violation(Exception):
    def __init__(self, path, reason):
        super().__init__('%s: %s' % (path, reason))
        self.path = path
        self.reason = reason


def _type_name(value):
    return type(value).__name__


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value):
    return (isinstance(value, (int, float))
            and not isinstance(value, bool) and math.isfinite(value))


def _object(value, path, allowed=None, required=()):
    if not isinstance(value, dict):
        raise _Violation(path, 'must be an object, got %s'
                         % _type_name(value))
    for key in required:
        if key not in value:
            raise _Violation('%s.%s' % (path, key), 'is required')
    if allowed is not None:
        for key in value:
            if key not in allowed:
                raise _Violation('%s.%s' % (path, key), 'unknown field')
    return value


def _int(value, path, minimum=None, maximum=None, optional=False):
    if value is None and optional:
        return
    if not _is_int(value):
        raise _Violation(path, 'must be an integer, got %s'
                         % _type_name(value))
    if minimum is not None and value < minimum:
        raise _Violation(path, 'must be >= %s' % minimum)
    if maximum is not None and value > maximum:
        raise _Violation(path, 'must be <= %s' % maximum)


def _number(value, path, positive=False, nonneg=False, optional=False):
    if value is None and optional:
        return
    if not _is_number(value):
        raise _Violation(path, 'must be a finite number, got %s'
                         % _type_name(value))
    if positive and value <= 0:
        raise _Violation(path, 'must be > 0')
    if nonneg and value < 0:
        raise _Violation(path, 'must be >= 0')


def _choice(value, path, choices):
    if value not in choices:
        raise _Violation(path, 'must be one of %s, got %r'
                         % ('/'.join(choices), value))


def _list(value, path, check, min_items=0):
    if not isinstance(value, list):
        raise _Violation(path, 'must be a list, got %s'
                         % _type_name(value))
    if len(value) < min_items:
        raise _Violation(path, 'needs at least %d items' % min_items)
    for i, item in enumerate(value):
        check(item, '%s[%d]' % (path, i))


def _check_kernel(value, path):
    _object(value, path, ('kind', 'params'), ('kind',))
    _choice(value['kind'], path + '.kind', hawkes_model.KERNEL_KINDS)
    params = _object(value.get('params', {}), path + '.params')
    for key, item in params.items():
        if item is not None:
            _number(item, '%s.params.%s' % (path, key))


def _check_model(value, path):
    _object(value, path, ('path', 'random', 'p', 'baseline', 'kernels'))
    forms = [k for k in ('path', 'random', 'baseline') if k in value]
    if len(forms) != 1:
        raise _Violation(path, 'give exactly one of path, random or '
                               'baseline/kernels')
    if 'path' in value:
        if not isinstance(value['path'], str):
            raise _Violation(path + '.path', 'must be a string')
    elif 'random' in value:
        random = _object(value['random'], path + '.random',
                         ('p', 'kind', 'radius'), ('p', 'kind'))
        _int(random['p'], path + '.random.p', minimum=1)
        _choice(random['kind'], path + '.random.kind',
                hawkes_model.KERNEL_KINDS)
        if 'radius' in random:
            _number(random['radius'], path + '.random.radius',
                    positive=True)
    else:
        _object(value, path, required=('baseline', 'kernels'))
        _list(value['baseline'], path + '.baseline', _number, 1)
        p = len(value['baseline'])

        def row(item, row_path):
            _list(item, row_path, _check_kernel)
            if len(item) != p:
                raise _Violation(row_path, 'needs %d kernels' % p)

        _list(value['kernels'], path + '.kernels', row)
        if len(value['kernels']) != p:
            raise _Violation(path + '.kernels', 'needs %d rows' % p)


def _check_mixing(value, path):
    _object(value, path, ('path', 'kind', 'n', 'layers', 'slope'))
    if 'path' in value:
        if not isinstance(value['path'], str):
            raise _Violation(path + '.path', 'must be a string')
        return
    _object(value, path, required=('kind', 'n'))
    _choice(value['kind'], path + '.kind', MIXING_KINDS)
    _int(value['n'], path + '.n', minimum=1)
    if 'layers' in value:
        _int(value['layers'], path + '.layers', minimum=1)
    if 'slope' in value:
        _number(value['slope'], path + '.slope')


def _check_noise(value, path):
    _object(value, path, ('kind', 'sigma', 'weights', 'means', 'sigmas'),
            ('kind',))
    _choice(value['kind'], path + '.kind', NOISE_KINDS)
    if value['kind'] == 'gaussian_rounded':
        _number(value.get('sigma'), path + '.sigma', nonneg=True)
    if value['kind'] == 'mixture':
        for key in ('weights', 'means', 'sigmas'):
            _list(value.get(key), '%s.%s' % (path, key), _number, 2)


def _check_simulation(value, path):
    _object(value, path, ('horizon', 'delta', 'method', 'noise'),
            ('horizon', 'delta'))
    _number(value['horizon'], path + '.horizon', positive=True)
    _number(value['delta'], path + '.delta', positive=True)
    if 'method' in value:
        _choice(value['method'], path + '.method', ('thinning', 'inar'))
    if 'noise' in value:
        _check_noise(value['noise'], path + '.noise')


def _check_intervention(value, path):
    _object(value, path, ('target', 'source', 'kind', 'value'),
            ('target', 'source', 'kind', 'value'))
    _int(value['target'], path + '.target', minimum=0)
    _int(value['source'], path + '.source', minimum=0)
    _choice(value['kind'], path + '.kind', hawkes_model.INTERVENTION_KINDS)
    _number(value['value'], path + '.value', nonneg=True)


def _check_environments(value, path):
    _object(value, path, ('interventions', 'count', 'kind', 'factor'))
    if value.get('interventions') is not None:
        _list(value['interventions'], path + '.interventions',
              _check_intervention)
    if 'count' in value:
        _int(value['count'], path + '.count', minimum=0)
    if 'kind' in value:
        _choice(value['kind'], path + '.kind',
                hawkes_model.INTERVENTION_KINDS)
    if 'factor' in value:
        _number(value['factor'], path + '.factor', nonneg=True)


def _check_order(value, path):
    _int(value, path, minimum=2, maximum=4)


def _check_estimation(value, path):
    _object(value, path, ('n_freq', 'taper', 'segments', 'orders', 'order',
                          'preprocess', 'unmixing', 'scan_order', 'cp'))
    if 'n_freq' in value:
        _int(value['n_freq'], path + '.n_freq', minimum=2)
    if 'taper' in value:
        _choice(value['taper'], path + '.taper', ('none', 'hann'))
    _int(value.get('segments'), path + '.segments', minimum=1,
         optional=True)
    if 'orders' in value:
        _list(value['orders'], path + '.orders', _check_order, 1)
    if value.get('order') is not None:
        _check_order(value['order'], path + '.order')
        orders = value.get('orders', DEFAULTS['estimation']['orders'])
        if value['order'] not in orders:
            raise _Violation(path + '.order', 'must be listed in orders')
    if 'preprocess' in value:
        _choice(value['preprocess'], path + '.preprocess',
                ('center', 'difference'))
    if 'unmixing' in value:
        _choice(value['unmixing'], path + '.unmixing',
                ('linear', 'jacobian'))
    if 'scan_order' in value:
        _check_order(value['scan_order'], path + '.scan_order')
    if 'cp' in value:
        cp = _object(value['cp'], path + '.cp',
                     ('rank', 'restarts', 'tol', 'max_residual'))
        _int(cp.get('rank'), path + '.cp.rank', minimum=1, optional=True)
        _int(cp.get('restarts'), path + '.cp.restarts', minimum=1,
             optional=True)
        _number(cp.get('tol'), path + '.cp.tol', positive=True,
                optional=True)
        _number(cp.get('max_residual'), path + '.cp.max_residual',
                positive=True, optional=True)


def _check_identify(value, path):
    _object(value, path, ('rank_threshold', 'consistency_threshold',
                          'change_threshold', 'snapshot_frequencies',
                          'fit_exponential'))
    for key in ('rank_threshold', 'consistency_threshold',
                'change_threshold'):
        _number(value.get(key), '%s.%s' % (path, key), positive=True,
                optional=True)
    if value.get('snapshot_frequencies') is not None:
        _list(value['snapshot_frequencies'],
              path + '.snapshot_frequencies', _number, 1)
    if 'fit_exponential' in value and not isinstance(
            value['fit_exponential'], bool):
        raise _Violation(path + '.fit_exponential', 'must be a boolean')


def _check_evaluate(value, path):
    _object(value, path, ('correlation', 'convergence'))
    if 'correlation' in value:
        _choice(value['correlation'], path + '.correlation',
                ('pearson', 'spearman'))
    conv = value.get('convergence')
    if conv is not None:
        _object(conv, path + '.convergence', ('deltas', 'horizon', 'seeds'),
                ('deltas', 'horizon', 'seeds'))
        _list(conv['deltas'], path + '.convergence.deltas', _number, 1)
        _number(conv['horizon'], path + '.convergence.horizon',
                positive=True)
        _list(conv['seeds'], path + '.convergence.seeds', _int, 1)


_SECTIONS = {
    'model': _check_model,
    'mixing': _check_mixing,
    'simulation': _check_simulation,
    'environments': _check_environments,
    'estimation': _check_estimation,
    'identify': _check_identify,
    'evaluate': _check_evaluate,
}


def _check_document(data):
    _object(data, '$', TOP_LEVEL, ('seed', 'model', 'mixing',
                                   'simulation'))
    _int(data['seed'], '$.seed', minimum=0)
    for key, check in _SECTIONS.items():
        if key in data:
            check(data[key], '$.' + key)
    if 'output_dir' in data and not isinstance(data['output_dir'], str):
        raise _Violation('$.output_dir', 'must be a string')
    _int(data.get('threads'), '$.threads', minimum=1, optional=True)


def validate_config(data):
    """Validate a decoded pipeline document.

    :returns: ``(is_valid, message)``
    """
    try:
        _check_document(data)
    except _Violation as e:
        return False, str(e)
    return True, 'Configuration is valid'


def _line_of(text, path):
    key = path.rsplit('.', 1)[-1].split('[', 1)[0]
    if key in ('$', ''):
        return None
    needle = '"%s"' % key
    for number, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return number
    return None


def _merge(defaults, values):
    out = copy.deepcopy(defaults)
    for key, value in values.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclasses.dataclass(frozen=True)
class PipelineConfig:
    document: dict
    base_dir: pathlib.Path
    digest: str
    output_dir: pathlib.Path
    threads: int

    def section(self, name):
        return self.document.get(name, {})

    @property
    def seed(self):
        return self.document['seed']

    def resolve(self, path):
        path = pathlib.Path(path)
        return path if path.is_absolute() else self.base_dir / path


def config_digest(data):
    canonical = json.dumps(data, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _override(cli_value, env_name, file_value, conf_value, convert):
    if cli_value is not None:
        return convert(cli_value)
    env_value = os.environ.get(env_name)
    if env_value:
        try:
            return convert(env_value)
        except ValueError:
            raise exception.ConfigInvalid(
                field=env_name, reason='cannot parse %r' % env_value)
    if file_value is not None:
        return convert(file_value)
    return convert(conf_value)


def load_config(path, output_dir=None, threads=None):
    """Read, validate and complete a pipeline document.

    Output directory and thread count come from the command line, then
    the environment, then the document, then the registered options.

    :raises: ConfigInvalid with a field path and line when known.
    """
    path = pathlib.Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise exception.ConfigInvalid(field=str(path), reason=str(e))
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise exception.ConfigInvalid(
            field='line %d column %d' % (e.lineno, e.colno), reason=e.msg)
    try:
        _check_document(data)
    except _Violation as e:
        line = _line_of(text, e.path)
        field = e.path if line is None else '%s (line %d)' % (e.path, line)
        raise exception.ConfigInvalid(field=field, reason=e.reason)
    document = _merge(DEFAULTS, data)
    out = _override(output_dir, ENV_OUTPUT_DIR, data.get('output_dir'),
                    CONF.output_dir, pathlib.Path)
    count = _override(threads, ENV_THREADS, data.get('threads'),
                      CONF.threads, int)
    if count < 1:
        raise exception.ConfigInvalid(field='threads',
                                      reason='must be >= 1')
    base_dir = path.resolve().parent
    if not out.is_absolute():
        out = pathlib.Path.cwd() / out
    LOG.debug('Loaded %s (output %s, %d threads)', path, out, count)
    return PipelineConfig(document, base_dir, config_digest(data), out,
                          count)
