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

"""Test cases for artifact files and the run manifest."""

import pathlib

import fixtures
import numpy as np
from testtools import matchers

from latent_hawkes import exception
from latent_hawkes import simulator
from latent_hawkes import utils
from latent_hawkes.pipeline import artifacts
from tests import test


class TestTables(test.NoDBTestCase):

    def setUp(self):
        super().setUp()
        self.root = pathlib.Path(self.useFixture(fixtures.TempDir()).path)

    def test_events_in_time_order(self):
        events = simulator.EventSequence(
            10.0, (np.array([0.5, 2.25, 7.0]), np.array([1.0, 2.25])))
        path = artifacts.write_events(self.root / 'env0' / 'events.csv',
                                      events)
        lines = path.read_text().splitlines()
        self.assertEqual('process_id,timestamp', lines[0])
        self.assertEqual(['1', '2', '1', '2', '1'],
                         [row.split(',')[0] for row in lines[1:]])
        back = artifacts.read_events(path, 2, 10.0)
        for got, want in zip(back.events, events.events):
            self.assertAllClose(got, want)

    def test_empty_process_survives(self):
        events = simulator.EventSequence(5.0, (np.array([1.5]),
                                               np.array([])))
        path = artifacts.write_events(self.root / 'events.csv', events)
        back = artifacts.read_events(path, 2, 5.0)
        self.assertEqual([1, 0], back.counts().tolist())

    def test_series(self):
        counts = np.array([[0, 3], [1, 0], [2, 2]])
        path = artifacts.write_series(self.root / 'counts.csv', 0.5,
                                      counts, 'z', '%d')
        lines = path.read_text().splitlines()
        self.assertEqual('t0,z_1,z_2', lines[0])
        self.assertEqual('1,2,2', lines[3])
        self.assertAllClose(artifacts.read_series(path), counts)

    def test_full_precision(self):
        data = np.random.default_rng(0).normal(size=(4, 3))
        path = artifacts.write_series(self.root / 'observations.csv', 0.1,
                                      data, 'o')
        self.assertTrue(np.array_equal(data, artifacts.read_series(path)))

    def test_missing(self):
        self.assertRaises(exception.ArtifactMissing, artifacts.read_series,
                          self.root / 'env3' / 'latents.csv')
        exc = self.assertRaises(exception.ArtifactMissing,
                                artifacts.read_json,
                                self.root / 'cp_factors.json')
        self.assertThat(exc.message, matchers.Contains('cp_factors.json'))


class TestManifest(test.NoDBTestCase):

    def setUp(self):
        super().setUp()
        self.root = pathlib.Path(self.useFixture(fixtures.TempDir()).path)
        self.manifest = artifacts.Manifest(self.root, 'abc123')

    def test_records_existing_artifacts(self):
        with self.manifest.stage('simulate'):
            self.manifest.record(utils.write_json(
                artifacts.env_dir(self.root, 1) / 'model.json', {}))
            self.manifest.record(utils.write_json(self.root / 'a.json', {}))
            self.manifest.record(self.root / 'a.json')
            self.manifest.record(self.root / 'never-written.json')
        path = self.manifest.write()
        data = utils.read_json(path)
        self.assertEqual(artifacts.MANIFEST, path.name)
        self.assertEqual('abc123', data['config_hash'])
        self.assertEqual('ok', data['status'])
        self.assertIsNone(data['error'])
        self.assertEqual(['a.json', 'env1/model.json'], data['artifacts'])
        self.assertThat(data['timings']['simulate'],
                        matchers.GreaterThan(-1e-9))
        self.assertEqual({'latent_hawkes', 'numpy', 'scipy', 'python'},
                         set(data['versions']))

    def test_failure_details(self):
        error = exception.UnstableModel(radius=1.2)
        data = utils.read_json(self.manifest.write(error))
        self.assertEqual('failed', data['status'])
        self.assertEqual('UnstableModel', data['error']['type'])
        self.assertEqual({'radius': 1.2}, data['error']['details'])

    def test_foreign_error(self):
        data = self.manifest.to_dict(RuntimeError('boom'))
        self.assertEqual({'type': 'RuntimeError', 'message': 'boom',
                          'details': {}}, data['error'])

    def test_stage_timing_survives_failure(self):
        def fail():
            with self.manifest.stage('estimate'):
                raise exception.ArtifactMissing(path='x')

        self.assertRaises(exception.ArtifactMissing, fail)
        self.assertThat(self.manifest.timings, matchers.Contains('estimate'))
