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


spectral_group = cfg.OptGroup(
    'spectral',
    title='Spectral estimation options',
    help='Welch periodogram and Wilson factorization settings.')

spectral_opts = [
    cfg.StrOpt('non_power_of_two',
               default='reject',
               choices=[('reject', 'Raise InvalidFrequencyGrid'),
                        ('resample', 'Round n_freq down to a power of '
                                     'two'),
                        ('allow', 'Use the grid as given')],
               help='Policy for frequency grids that are not a power of '
                    'two.'),
    cfg.FloatOpt('ridge',
                 default=1e-8,
                 min=0.0,
                 help='Ridge added as ridge * mean trace * I before '
                      'factorization.'),
    cfg.FloatOpt('wilson_tolerance',
                 default=1e-8,
                 help='Relative reconstruction residual accepted by the '
                      'Wilson iteration.'),
    cfg.IntOpt('wilson_max_iter',
               default=500,
               min=1,
               help='Iteration cap for the Wilson factorization.'),
    cfg.FloatOpt('recover_tolerance',
                 default=1e-2,
                 help='Residual accepted when factorizing estimated '
                      'observation spectra.'),
    cfg.FloatOpt('rank_deficient_fraction',
                 default=0.1,
                 help='Fraction of frequencies allowed to fall below '
                      'the latent rank before recover_transfer fails.'),
]

ALL_OPTS = spectral_opts


def register_opts(conf):
    conf.register_group(spectral_group)
    conf.register_opts(ALL_OPTS, group=spectral_group)
