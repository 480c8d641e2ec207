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

import math

from oslo_config import cfg
from oslo_config import types


identify_group = cfg.OptGroup(
    'identify',
    title='Identifiability options',
    help='Kernel DAG embedding and variety dimension settings.')

identify_opts = [
    cfg.FloatOpt('child_threshold',
                 default=1e-10,
                 help='Kernel entries with magnitude at or below this '
                      'value are not edges of the kernel DAG.'),
    cfg.FloatOpt('rank_factor',
                 default=1.0,
                 help='Multiplier on max(rows, cols) * eps * sigma_max '
                      'for numerical rank decisions.'),
    cfg.FloatOpt('rank_threshold',
                 help='Relative singular value threshold overriding the '
                      'machine precision rule. Leave unset for exact '
                      'synthetic systems.'),
    cfg.FloatOpt('consistency_threshold',
                 help='Relative singular value threshold for the '
                      'augmented rank check only. Estimated snapshots '
                      'from different environments never agree exactly, '
                      'so pipelines set this to the expected noise level. '
                      'Unset uses the coefficient rank rule.'),
    cfg.FloatOpt('change_threshold',
                 default=0.2,
                 min=0.0,
                 help='Relative change of an estimated kernel snapshot '
                      'entry, against the largest reference entry, above '
                      'which an environment counts as having perturbed '
                      'that entry.'),
    cfg.ListOpt('snapshot_frequencies',
                item_type=types.Float(),
                default=[0.0, math.pi / 4, math.pi / 2],
                help='Frequencies in radians per bin at which transfer '
                     'snapshots are taken.'),
]

ALL_OPTS = identify_opts


def register_opts(conf):
    conf.register_group(identify_group)
    conf.register_opts(ALL_OPTS, group=identify_group)
