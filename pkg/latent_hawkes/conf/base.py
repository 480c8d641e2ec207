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

import os

from oslo_config import cfg


base_opts = [
    cfg.StrOpt('output_dir',
               default='latent-hawkes-out',
               help='Directory that receives pipeline artifacts. The '
                    'LATENT_HAWKES_OUTPUT_DIR environment variable and '
                    'the --out flag take precedence.'),
    cfg.IntOpt('threads',
               default=os.cpu_count() or 1,
               sample_default='<number of CPUs>',
               min=1,
               help='Worker threads used across seeds, restarts and '
                    'frequencies. Never used inside a single stochastic '
                    'trajectory.'),
]

ALL_OPTS = base_opts


def register_opts(conf):
    conf.register_opts(ALL_OPTS)
