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

"""Planted models and pipeline workspaces shared by the unit tests."""

import json
import pathlib

import fixtures
import numpy as np

from latent_hawkes import model as hawkes_model


def exponential_single():
    """p=1, alpha=0.3, beta=1.0, u=0.2; stationary rate 0.2 / 0.7."""
    return hawkes_model.HawkesModel(
        (0.2,), [[hawkes_model.Exponential(0.3, 1.0)]])


def zero_model(baseline):
    p = len(baseline)
    return hawkes_model.HawkesModel(
        tuple(baseline), [[hawkes_model.Zero()] * p for _ in range(p)])


def exponential_triple():
    alpha = np.array([[0.2, 0.1, 0.0],
                      [0.15, 0.25, 0.1],
                      [0.0, 0.2, 0.2]])
    beta = np.array([[1.0, 1.5, 1.0],
                     [0.8, 1.2, 2.0],
                     [1.0, 1.0, 1.6]])
    kernels = [[hawkes_model.Exponential(alpha[i, j], beta[i, j])
                if alpha[i, j] else hawkes_model.Zero()
                for j in range(3)] for i in range(3)]
    return hawkes_model.HawkesModel((0.15, 0.1, 0.12), kernels)


def zero_pipeline_document(seed=0):
    """Small Poisson-latent pipeline that finishes in seconds."""
    return {
        'seed': seed,
        'model': {'baseline': [0.5, 0.8],
                  'kernels': [[{'kind': 'zero'}, {'kind': 'zero'}],
                              [{'kind': 'zero'}, {'kind': 'zero'}]]},
        'mixing': {'kind': 'linear', 'n': 3},
        'simulation': {'horizon': 2000.0, 'delta': 0.5},
        'environments': {'count': 1, 'kind': 'soft', 'factor': 2.0},
        'estimation': {'n_freq': 32, 'orders': [3],
                       'preprocess': 'center',
                       'cp': {'restarts': 4}},
        'identify': {'fit_exponential': False},
    }


class PipelineWorkspace(fixtures.Fixture):
    """Temporary directory holding a pipeline document.

    :param document: Decoded JSON document, or raw text when ``raw`` is
        set, written to ``config.json``.
    """

    def __init__(self, document, raw=False):
        super().__init__()
        self.document = document
        self.raw = raw

    def setUp(self):
        super().setUp()
        self.root = pathlib.Path(self.useFixture(fixtures.TempDir()).path)
        self.config_path = self.root / 'config.json'
        self.out = self.root / 'out'
        text = self.document if self.raw else json.dumps(self.document,
                                                         indent=2)
        self.config_path.write_text(text)

    def argv(self, command, *extra):
        return [command, str(self.config_path),
                '--out', str(self.out)] + list(extra)
