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

"""Test cases for shared helpers and option registration."""

import pathlib
import threading

import fixtures
import numpy as np
from oslo_config import cfg
from testtools import matchers

import latent_hawkes.conf
from latent_hawkes import utils
from tests import test


class TestRandomStreams(test.NoDBTestCase):

    def test_same_key_same_draws(self):
        a = utils.generator(7, utils.STREAM_INAR, 0).random(5)
        b = utils.generator(7, utils.STREAM_INAR, 0).random(5)
        self.assertTrue(np.array_equal(a, b))

    def test_streams_are_distinct(self):
        draws = [utils.generator(7, *key).random(3)
                 for key in ((utils.STREAM_INAR, 0), (utils.STREAM_INAR, 1),
                             (utils.STREAM_THINNING,), ())]
        for i in range(len(draws)):
            for j in range(i):
                self.assertFalse(np.array_equal(draws[i], draws[j]))

    def test_derived_seeds(self):
        seeds = {utils.derive_seed(3, utils.STREAM_ENVIRONMENT, k)
                 for k in range(20)}
        self.assertEqual(20, len(seeds))
        self.assertEqual(utils.derive_seed(3, 1),
                         utils.derive_seed(3, 1))


class TestParallelMap(test.NoDBTestCase):

    def test_preserves_order(self):
        self.assertEqual([i * i for i in range(50)],
                         utils.parallel_map(lambda i: i * i, range(50), 4))

    def test_single_thread_stays_inline(self):
        self.flags(threads=1)
        seen = utils.parallel_map(lambda _: threading.get_ident(), range(3))
        self.assertEqual({threading.get_ident()}, set(seen))

    def test_thread_count(self):
        self.flags(threads=6)
        self.assertEqual(6, utils.thread_count())
        self.assertEqual(2, utils.thread_count(2))
        self.assertEqual(1, utils.thread_count(0))


class TestFiles(test.NoDBTestCase):

    def test_complex_pairs(self):
        z = np.array([[1 + 2j, -0.5j], [3.0, 0.25 - 1j]])
        pairs = utils.complex_to_pairs(z)
        self.assertEqual([1.0, 2.0], pairs[0][0])
        self.assertTrue(np.array_equal(z, utils.pairs_to_complex(pairs)))

    def test_atomic_write_leaves_no_temporaries(self):
        root = pathlib.Path(self.useFixture(fixtures.TempDir()).path)
        path = utils.write_json(root / 'nested' / 'scores.json',
                                {'mcc': 0.5, 'kernels': [1, 2]})
        self.assertEqual({'mcc': 0.5, 'kernels': [1, 2]},
                         utils.read_json(path))
        self.assertEqual(['scores.json'],
                         [p.name for p in path.parent.iterdir()])


class TestOptions(test.NoDBTestCase):

    def test_list_opts_covers_every_group(self):
        listed = latent_hawkes.conf.list_opts()
        groups = [None if group is None else group.name
                  for group, _ in listed]
        self.assertEqual([None, 'simulation', 'spectral', 'cumulants',
                          'identify'], groups)
        for _, opts in listed:
            self.assertThat(len(opts), matchers.GreaterThan(0))
            for opt in opts:
                self.assertIsInstance(opt, cfg.Opt)

    def test_registered_defaults(self):
        conf = latent_hawkes.conf.CONF
        self.assertEqual('latent-hawkes-out', conf.output_dir)
        self.assertEqual(1, conf.threads)
