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


cumulants_group = cfg.OptGroup(
    'cumulants',
    title='Cumulant estimation and CP decomposition options')

cumulants_opts = [
    cfg.FloatOpt('als_tolerance',
                 default=1e-9,
                 help='Relative factor change that ends an ALS run.'),
    cfg.IntOpt('max_sweeps',
               default=2000,
               min=1,
               help='ALS sweep cap per restart.'),
    cfg.IntOpt('restarts',
               default=10,
               min=1,
               help='Random initializations tried by cp_decompose.'),
    cfg.FloatOpt('failure_residual',
                 default=0.1,
                 help='Relative residual above which the decomposition '
                      'is reported as failed.'),
    cfg.StrOpt('preprocess',
               default='difference',
               choices=[('center', 'Subtract the column mean'),
                        ('difference', 'First differences of each '
                                       'column')],
               help='Preprocessing applied to observations before '
                    'cumulant estimation in the pipeline.'),
    cfg.StrOpt('unmixing',
               default='linear',
               choices=[('linear', 'Pseudo-inverse of the CP factors'),
                        ('jacobian', 'Non-negative decoding against the '
                                     'CP factors read as the Jacobian of '
                                     'the mixing at rest')],
               help='How latent series are recovered from observations '
                    'once the CP factors are known.'),
    cfg.IntOpt('scan_blocks',
               default=20,
               min=2,
               help='Blocks used for the standard error estimate of '
                    'nonzero_cumulant_scan.'),
    cfg.FloatOpt('scan_threshold',
                 default=5.0,
                 help='Standard errors a cumulant norm has to exceed to '
                      'count as nonzero.'),
]

ALL_OPTS = cumulants_opts


def register_opts(conf):
    conf.register_group(cumulants_group)
    conf.register_opts(ALL_OPTS, group=cumulants_group)
