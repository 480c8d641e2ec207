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

from oslo_config import cfg


simulation_group = cfg.OptGroup(
    'simulation',
    title='Simulation options',
    help='Hawkes thinning, INAR(delta) sampling and mixing generation.')

simulation_opts = [
    cfg.FloatOpt('explosion_factor',
                 default=1e6,
                 min=1.0,
                 help='Thinning aborts when the intensity bound exceeds '
                      'this multiple of the summed stationary '
                      'intensity.'),
    cfg.FloatOpt('tail_mass',
                 default=1e-6,
                 min=0.0,
                 help='INAR history window ends where the remaining L1 '
                      'mass of every kernel is below this value.'),
    cfg.FloatOpt('max_history',
                 default=200.0,
                 min=0.0,
                 help='Upper bound in seconds on the INAR history window '
                      'and on the windowed thinning history.'),
    cfg.FloatOpt('powerlaw_t_max',
                 default=50.0,
                 min=0.0,
                 help='Truncation horizon in seconds for power-law '
                      'kernels whose exponent is at most 1.'),
    cfg.FloatOpt('inar_warning_threshold',
                 default=1.0,
                 help='Warn when delta times the discretized intensity '
                      'exceeds this value.'),
    cfg.IntOpt('generation_attempts',
               default=8,
               min=1,
               help='Attempts before giving up on a full-rank random '
                    'mixing matrix.'),
    cfg.FloatOpt('rank_tolerance',
                 default=1e-8,
                 help='Smallest-to-largest singular value ratio below '
                      'which a linear mixing map is rank deficient.'),
    cfg.FloatOpt('leaky_slope',
                 default=0.2,
                 help='Negative-side slope of the leaky ReLU used by MLP '
                      'mixing maps.'),
]

ALL_OPTS = simulation_opts


def register_opts(conf):
    conf.register_group(simulation_group)
    conf.register_opts(ALL_OPTS, group=simulation_group)
