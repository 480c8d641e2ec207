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

"""Test cases for pipeline document validation and loading."""

import json
import pathlib

import fixtures
from testtools import matchers

from latent_hawkes import exception
from latent_hawkes.pipeline import config as pipeline_config
from tests.local_fixtures import models
from tests import test


class TestValidateConfig(test.NoDBTestCase):

    def test_valid_document(self):
        self.assertEqual(
            (True, 'Configuration is valid'),
            pipeline_config.validate_config(models.zero_pipeline_document()))

    def test_missing_seed(self):
        document = models.zero_pipeline_document()
        del document['seed']
        is_valid, message = pipeline_config.validate_config(document)
        self.assertFalse(is_valid)
        self.assertEqual('$.seed: is required', message)

    def test_wrong_types(self):
        cases = [
            ('seed', -1, '$.seed'),
            ('threads', 0, '$.threads'),
            ('output_dir', 3, '$.output_dir'),
        ]
        for key, value, path in cases:
            document = models.zero_pipeline_document()
            document[key] = value
            is_valid, message = pipeline_config.validate_config(document)
            self.assertFalse(is_valid, key)
            self.assertThat(message, matchers.StartsWith(path))

    def test_nested_violations(self):
        document = models.zero_pipeline_document()
        document['model']['kernels'][1] = [{'kind': 'zero'}]
        is_valid, message = pipeline_config.validate_config(document)
        self.assertFalse(is_valid)
        self.assertThat(message, matchers.Contains('needs 2 kernels'))

        document = models.zero_pipeline_document()
        document['mixing']['kind'] = 'quadratic'
        self.assertFalse(pipeline_config.validate_config(document)[0])

        document = models.zero_pipeline_document()
        document['simulation']['noise'] = {'kind': 'gaussian_rounded'}
        self.assertFalse(pipeline_config.validate_config(document)[0])

    def test_model_forms_are_exclusive(self):
        document = models.zero_pipeline_document()
        document['model']['random'] = {'p': 2, 'kind': 'exponential'}
        is_valid, message = pipeline_config.validate_config(document)
        self.assertFalse(is_valid)
        self.assertThat(message, matchers.Contains('exactly one'))


class TestLoadConfig(test.NoDBTestCase):

    def _workspace(self, document, raw=False):
        return self.useFixture(models.PipelineWorkspace(document, raw))

    def test_defaults_are_merged(self):
        ws = self._workspace(models.zero_pipeline_document())
        config = pipeline_config.load_config(ws.config_path, ws.out)
        estimation = config.section('estimation')
        self.assertEqual('hann', estimation['taper'])
        self.assertEqual(4, estimation['cp']['restarts'])
        self.assertEqual(0.5, estimation['cp']['max_residual'])
        self.assertEqual('thinning', config.section('simulation')['method'])
        self.assertEqual(0, config.seed)
        self.assertEqual(ws.out, config.output_dir)
        self.assertEqual(ws.root, config.base_dir)

    def test_unknown_field_reports_line(self):
        document = models.zero_pipeline_document()
        document['simulation']['colour'] = 'blue'
        ws = self._workspace(document)
        text = ws.config_path.read_text().splitlines()
        line = next(n for n, row in enumerate(text, 1) if '"colour"' in row)
        exc = self.assertRaises(exception.ConfigInvalid,
                                pipeline_config.load_config, ws.config_path)
        self.assertEqual('$.simulation.colour (line %d)' % line,
                         exc.kwargs['field'])
        self.assertThat(exc.message, matchers.Contains('unknown field'))

    def test_malformed_json(self):
        ws = self._workspace('{\n  "seed": 0,\n  "model": }\n', raw=True)
        exc = self.assertRaises(exception.ConfigInvalid,
                                pipeline_config.load_config, ws.config_path)
        self.assertThat(exc.kwargs['field'], matchers.StartsWith('line 3'))

    def test_missing_file(self):
        ws = self._workspace(models.zero_pipeline_document())
        self.assertRaises(exception.ConfigInvalid,
                          pipeline_config.load_config,
                          ws.root / 'absent.json')

    def test_override_precedence(self):
        """Command line beats environment beats document beats options."""
        for name in (pipeline_config.ENV_THREADS,
                     pipeline_config.ENV_OUTPUT_DIR):
            self.useFixture(fixtures.EnvironmentVariable(name))
        document = models.zero_pipeline_document()
        ws = self._workspace(document)
        document['threads'] = 2
        document['output_dir'] = str(ws.root / 'from-file')
        ws.config_path.write_text(json.dumps(document))
        self.flags(threads=7)

        config = pipeline_config.load_config(ws.config_path)
        self.assertEqual(2, config.threads)
        self.assertEqual(ws.root / 'from-file', config.output_dir)

        self.useFixture(fixtures.EnvironmentVariable(
            pipeline_config.ENV_THREADS, '3'))
        self.useFixture(fixtures.EnvironmentVariable(
            pipeline_config.ENV_OUTPUT_DIR, str(ws.root / 'from-env')))
        config = pipeline_config.load_config(ws.config_path)
        self.assertEqual(3, config.threads)
        self.assertEqual(ws.root / 'from-env', config.output_dir)

        config = pipeline_config.load_config(ws.config_path, ws.out, 4)
        self.assertEqual(4, config.threads)
        self.assertEqual(ws.out, config.output_dir)

    def test_registered_option_is_last_resort(self):
        ws = self._workspace(models.zero_pipeline_document())
        self.useFixture(fixtures.EnvironmentVariable(
            pipeline_config.ENV_THREADS))
        self.flags(threads=5)
        config = pipeline_config.load_config(ws.config_path, ws.out)
        self.assertEqual(5, config.threads)

    def test_bad_environment_value(self):
        ws = self._workspace(models.zero_pipeline_document())
        self.useFixture(fixtures.EnvironmentVariable(
            pipeline_config.ENV_THREADS, 'many'))
        exc = self.assertRaises(exception.ConfigInvalid,
                                pipeline_config.load_config,
                                ws.config_path, ws.out)
        self.assertEqual(pipeline_config.ENV_THREADS, exc.kwargs['field'])

    def test_digest_ignores_key_order(self):
        document = models.zero_pipeline_document()
        shuffled = dict(reversed(list(document.items())))
        self.assertEqual(pipeline_config.config_digest(document),
                         pipeline_config.config_digest(shuffled))
        ws = self._workspace(document)
        config = pipeline_config.load_config(ws.config_path, ws.out)
        self.assertEqual(pipeline_config.config_digest(document),
                         config.digest)
        self.assertNotEqual(
            config.digest,
            pipeline_config.config_digest(models.zero_pipeline_document(1)))

    def test_resolve_relative_paths(self):
        ws = self._workspace(models.zero_pipeline_document())
        config = pipeline_config.load_config(ws.config_path, ws.out)
        self.assertEqual(ws.root / 'model.json', config.resolve('model.json'))
        self.assertEqual(ws.out, config.resolve(ws.out))

    def test_shipped_examples_validate(self):
        etc = pathlib.Path(__file__).resolve().parents[2] / 'etc'
        documents = sorted(etc.glob('pipeline*.json'))
        self.assertThat(len(documents), matchers.GreaterThan(1))
        for path in documents:
            self.assertEqual(
                (True, 'Configuration is valid'),
                pipeline_config.validate_config(json.loads(path.read_text())),
                path.name)
