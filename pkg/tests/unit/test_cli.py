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

"""Test cases for the command line entry point."""

import io
from unittest import mock

import fixtures
from testtools import matchers

from latent_hawkes.cmd import cli
from latent_hawkes.pipeline import artifacts
from latent_hawkes.pipeline import stages
from latent_hawkes import utils
from tests.local_fixtures import models
from tests import test


def _unstable_document():
    document = models.zero_pipeline_document()
    document['model'] = {
        'baseline': [0.2],
        'kernels': [[{'kind': 'exponential',
                      'params': {'alpha': 1.2, 'beta': 1.0}}]]}
    document['mixing'] = {'kind': 'linear', 'n': 2}
    return document


class TestCli(test.NoDBTestCase):

    def setUp(self):
        super().setUp()
        self.stderr = io.StringIO()
        self.useFixture(fixtures.MockPatch('sys.stderr', self.stderr))

    def _workspace(self, document=None, raw=False):
        if document is None:
            document = models.zero_pipeline_document()
        return self.useFixture(models.PipelineWorkspace(document, raw))

    def _manifest(self, ws):
        return utils.read_json(ws.out / artifacts.MANIFEST)

    def test_pipeline_smoke(self):
        ws = self._workspace()
        self.assertEqual(cli.EXIT_OK, cli.main(ws.argv('pipeline')))
        report = utils.read_json(ws.out / 'ident_report.json')
        self.assertEqual(0, report['variety_dim'])
        self.assertEqual(2, len(report['targets']))
        self.assertEqual([], report['targets'][0])
        self.assertEqual(2, len(report['baseline']))
        scores = utils.read_json(ws.out / 'scores.json')
        self.assertEqual(1, len(scores['targets']['environments']))
        self.assertThat(scores['mcc']['score'], matchers.GreaterThan(0.9))
        manifest = self._manifest(ws)
        self.assertEqual('ok', manifest['status'])
        self.assertEqual(['simulate', 'estimate', 'identify', 'evaluate'],
                         list(manifest['timings']))
        self.assertThat(manifest['artifacts'],
                        matchers.Contains('env1/observations.csv'))

    def test_thread_count_does_not_change_results(self):
        """Two runs of one document agree byte for byte."""
        ws = self._workspace()
        first = ws.root / 'first'
        second = ws.root / 'second'
        self.assertEqual(cli.EXIT_OK, cli.main(
            ws.argv('pipeline')[:-1] + [str(first), '--threads', '1']))
        self.assertEqual(cli.EXIT_OK, cli.main(
            ws.argv('pipeline')[:-1] + [str(second), '--threads', '3']))
        names = sorted(str(p.relative_to(first)) for p in first.rglob('*')
                       if p.is_file() and p.name != artifacts.MANIFEST)
        self.assertThat(names, matchers.Contains('scores.json'))
        self.assertEqual(names, sorted(
            str(p.relative_to(second)) for p in second.rglob('*')
            if p.is_file() and p.name != artifacts.MANIFEST))
        for name in names:
            self.assertEqual((first / name).read_bytes(),
                             (second / name).read_bytes(), name)

    def test_unstable_model_fails(self):
        ws = self._workspace(_unstable_document())
        self.assertEqual(cli.EXIT_FAILURE, cli.main(ws.argv('simulate')))
        manifest = self._manifest(ws)
        self.assertEqual('failed', manifest['status'])
        self.assertEqual('UnstableModel', manifest['error']['type'])
        self.assertThat(self.stderr.getvalue(),
                        matchers.Contains('not stable'))

    def test_config_errors(self):
        ws = self._workspace('{"seed": ', raw=True)
        self.assertEqual(cli.EXIT_CONFIG, cli.main(ws.argv('pipeline')))
        self.assertFalse(ws.out.exists())

        document = models.zero_pipeline_document()
        del document['mixing']
        ws = self._workspace(document)
        self.assertEqual(cli.EXIT_CONFIG, cli.main(ws.argv('simulate')))
        self.assertThat(self.stderr.getvalue(),
                        matchers.Contains('$.mixing'))

        self.assertEqual(cli.EXIT_CONFIG, cli.main(
            ['simulate', str(ws.root / 'absent.json')]))

    @mock.patch.object(stages, 'run', autospec=True)
    def test_command_line_parsing(self, mock_run):
        ws = self._workspace()
        argv = ['identify', str(ws.config_path), '--out', str(ws.out),
                '--threads', '2']
        self.assertEqual(cli.EXIT_OK, cli.main(argv))
        name, config = mock_run.call_args[0]
        self.assertEqual('identify', name)
        self.assertEqual(ws.root.resolve(), config.base_dir)
        self.assertEqual(ws.out, config.output_dir)
        self.assertEqual(2, config.threads)

    @mock.patch.object(stages, 'run', autospec=True,
                       side_effect=RuntimeError('disk on fire'))
    def test_unexpected_failure(self, mock_run):
        ws = self._workspace()
        self.assertEqual(cli.EXIT_FAILURE, cli.main(ws.argv('estimate')))
        self.assertEqual('estimate', mock_run.call_args[0][0])
        self.assertThat(self.stderr.getvalue(),
                        matchers.Contains('disk on fire'))

    def test_stages_run_separately(self):
        ws = self._workspace()
        self.assertEqual(cli.EXIT_OK, cli.main(ws.argv('simulate')))
        self.assertTrue((ws.out / 'env0' / 'events.csv').exists())
        self.assertFalse((ws.out / 'cp_factors.json').exists())

        self.assertEqual(cli.EXIT_OK, cli.main(ws.argv('estimate')))
        manifest = self._manifest(ws)
        self.assertEqual(['estimate'], list(manifest['timings']))
        for k in range(2):
            folder = artifacts.env_dir(ws.out, k)
            self.assertTrue((folder / 'latents.csv').exists())
            self.assertTrue((folder / 'transfer.json').exists())
        self.assertFalse((ws.out / 'ident_report.json').exists())

    def test_stage_without_inputs(self):
        ws = self._workspace()
        self.assertEqual(cli.EXIT_FAILURE, cli.main(ws.argv('identify')))
        manifest = self._manifest(ws)
        self.assertEqual('ArtifactMissing', manifest['error']['type'])
        self.assertThat(self.stderr.getvalue(),
                        matchers.Contains('environments.json'))
