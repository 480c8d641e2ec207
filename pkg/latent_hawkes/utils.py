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

"""Shared helpers: random streams, thread pools and artifact writing."""

from concurrent import futures
import json
import os
import pathlib
import tempfile

import numpy as np
from oslo_log import log

import latent_hawkes.conf


CONF = latent_hawkes.conf.CONF
LOG = log.getLogger(__name__)

# Substream namespaces so that, for one seed, thinning, INAR noise and
# mixing draws never share a generator.
STREAM_THINNING = 1
STREAM_INAR = 2
STREAM_MIXING = 3
STREAM_MODEL = 4
STREAM_CP = 5
STREAM_ENVIRONMENT = 6


def generator(seed, *key):
    """Return a Philox generator for ``seed`` and a spawn key.

    :param seed: Non-negative integer seed.
    :param key: Integers naming the substream, for example
        ``(STREAM_INAR, process_index)``.
    :returns: ``numpy.random.Generator``
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(sequence))


def substreams(seed, stream, count):
    return [generator(seed, stream, i) for i in range(count)]


def derive_seed(seed, *key):
    """Integer seed for an independent child run, such as one
    environment of a pipeline.
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(key))
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def thread_count(threads=None):
    if threads is None:
        threads = CONF.threads
    return max(1, int(threads))


def parallel_map(func, items, threads=None):
    """Apply ``func`` to ``items`` on a thread pool, preserving order."""
    items = list(items)
    workers = min(thread_count(threads), max(1, len(items)))
    if workers == 1:
        return [func(item) for item in items]
    with futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def complex_to_pairs(array):
    array = np.asarray(array)
    return np.stack([array.real, array.imag], axis=-1).tolist()


def pairs_to_complex(pairs):
    pairs = np.asarray(pairs, dtype=float)
    return pairs[..., 0] + 1j * pairs[..., 1]


def dump_json(data):
    return json.dumps(data, indent=2, sort_keys=True) + '\n'


def atomic_write(path, text):
    """Write ``text`` to ``path`` through a rename in the same directory."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix='.' + path.name)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        pathlib.Path(tmp_name).replace(path)
    except OSError:
        pathlib.Path(tmp_name).unlink(missing_ok=True)
        raise
    LOG.debug('Wrote %s', path)
    return path


def write_json(path, data):
    return atomic_write(path, dump_json(data))


def read_json(path):
    with pathlib.Path(path).open(encoding='utf-8') as f:
        return json.load(f)
