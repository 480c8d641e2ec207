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

from latent_hawkes.conf import base
from latent_hawkes.conf import cumulants
from latent_hawkes.conf import identify
from latent_hawkes.conf import simulation
from latent_hawkes.conf import spectral


CONF = cfg.CONF

base.register_opts(CONF)
simulation.register_opts(CONF)
spectral.register_opts(CONF)
cumulants.register_opts(CONF)
identify.register_opts(CONF)


def list_opts():
    """Entry point for oslo-config-generator."""
    return [
        (None, base.ALL_OPTS),
        (simulation.simulation_group, simulation.ALL_OPTS),
        (spectral.spectral_group, spectral.ALL_OPTS),
        (cumulants.cumulants_group, cumulants.ALL_OPTS),
        (identify.identify_group, identify.ALL_OPTS),
    ]
