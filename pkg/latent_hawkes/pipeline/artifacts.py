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

"""Artifact files shared by the pipeline stages."""

import contextlib
import io
import pathlib
import platform
import time

import numpy as np
import scipy
from oslo_log import log

import latent_hawkes
from latent_hawkes import exception
from latent_hawkes import simulator
from latent_hawkes import utils


LOG = log.getLogger(__name__)

MANIFEST = 'manifest.json'


def env_dir(root, k):
    return pathlib.Path(root) / ('env%d' % k)


def _table(header, columns, fmt):
    buf = io.StringIO()
    np.savetxt(buf, np.column_stack(columns), fmt=fmt, delimiter=',',
               header=','.join(header), comments='')
    return buf.getvalue()


def write_events(path, events):
    """Events as ``process_id,timestamp`` rows in time order.

    Process ids are 1-based.
    """
    ids = np.concatenate([np.full(e.size, i + 1, dtype=np.int64)
                          for i, e in enumerate(events.events)])
    times = np.concatenate(events.events)
    order = np.lexsort((ids, times))
    text = _table(('process_id', 'timestamp'),
                  (ids[order], times[order]), ('%d', '%.12f'))
    return utils.atomic_write(path, text)


def read_events(path, p, horizon):
    data = _load(path, 2)
    ids = data[:, 0].astype(int)
    return simulator.EventSequence(
        horizon, tuple(data[ids == i + 1, 1] for i in range(p)))


def write_series(path, delta, data, prefix, fmt='%.17g'):
    """Per-bin table ``t0,<prefix>_1..<prefix>_d``."""
    data = np.asarray(data)
    t0 = delta * np.arange(data.shape[0])
    header = ('t0',) + tuple('%s_%d' % (prefix, i + 1)
                             for i in range(data.shape[1]))
    fmts = ['%.12g'] + [fmt] * data.shape[1]
    return utils.atomic_write(path, _table(header, (t0, data), fmts))


def read_series(path):
    """Return the value columns of a per-bin table."""
    return _load(path, None)[:, 1:]


def _load(path, width):
    path = pathlib.Path(path)
    if not path.exists():
        raise exception.ArtifactMissing(path=str(path))
    data = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
    if width is not None and data.size == 0:
        data = data.reshape(0, width)
    return data


def read_json(path):
    path = pathlib.Path(path)
    if not path.exists():
        raise exception.ArtifactMissing(path=str(path))
    return utils.read_json(path)


def _error_dict(error):
    if error is None:
        return None
    if isinstance(error, exception.LatentHawkesException):
        return error.to_dict()
    return {'type': type(error).__name__, 'message': str(error),
            'details': {}}


class Manifest:
    """Artifact list, versions and stage timings of one run."""

    def __init__(self, root, digest):
        self.root = pathlib.Path(root)
        self.digest = digest
        self.artifacts = []
        self.timings = {}

    def record(self, path):
        rel = pathlib.Path(path).resolve().relative_to(self.root.resolve())
        if str(rel) not in self.artifacts:
            self.artifacts.append(str(rel))
        return path

    @contextlib.contextmanager
    def stage(self, name):
        start = time.perf_counter()
        LOG.info('Starting stage %s', name)
        try:
            yield
        finally:
            self.timings[name] = time.perf_counter() - start
            LOG.info('Stage %s took %.2f s', name, self.timings[name])

    def to_dict(self, error=None):
        return {
            'config_hash': self.digest,
            'status': 'failed' if error else 'ok',
            'error': _error_dict(error),
            'artifacts': sorted(a for a in self.artifacts
                                if (self.root / a).exists()),
            'versions': {'latent_hawkes': latent_hawkes.__version__,
                         'numpy': np.__version__,
                         'scipy': scipy.__version__,
                         'python': platform.python_version()},
            'timings': self.timings,
        }

    def write(self, error=None):
        return utils.write_json(self.root / MANIFEST, self.to_dict(error))
