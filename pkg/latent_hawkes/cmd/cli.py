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

"""``latent-hawkes`` command line.

Usage::

    latent-hawkes simulate|estimate|identify|evaluate|pipeline \
        <config> [--out <dir>] [--threads N]

Exit codes are 0 on success, 1 when a stage fails and 2 when the
configuration is invalid.
"""

import sys

from oslo_config import cfg
from oslo_log import log

import latent_hawkes
import latent_hawkes.conf
from latent_hawkes import exception
from latent_hawkes.pipeline import config as pipeline_config
from latent_hawkes.pipeline import stages


CONF = latent_hawkes.conf.CONF
LOG = log.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

COMMANDS = {
    'simulate': 'Simulate every environment and write event, count and '
                'observation files.',
    'estimate': 'Estimate cumulants, CP factors, spectra and transfer '
                'factors from the observation files.',
    'identify': 'Solve kernel snapshots and the baseline from the '
                'estimated transfer factors.',
    'evaluate': 'Score recovered latents and kernels against the '
                'simulated truth.',
    'pipeline': 'Run simulate, estimate, identify and evaluate in order.',
}


def add_command_parsers(subparsers):
    for name, help_text in COMMANDS.items():
        parser = subparsers.add_parser(name, help=help_text)
        parser.add_argument('config',
                            help='Pipeline JSON document.')
        parser.add_argument('--out',
                            help='Output directory. Overrides %s and the '
                                 'document.' % pipeline_config.ENV_OUTPUT_DIR)
        parser.add_argument('--threads', type=int, dest='cli_threads',
                            help='Worker threads. Overrides %s and the '
                                 'document.' % pipeline_config.ENV_THREADS)


command_opt = cfg.SubCommandOpt('command',
                                title='Commands',
                                help='Pipeline stage to run.',
                                handler=add_command_parsers)

CONF.register_cli_opt(command_opt)
log.register_options(CONF)


def main(argv=None):
    """Run one subcommand and return the process exit code."""
    argv = sys.argv[1:] if argv is None else argv
    CONF(argv, project='latent-hawkes', version=latent_hawkes.__version__)
    log.setup(CONF, 'latent-hawkes')
    command = CONF.command
    try:
        config = pipeline_config.load_config(command.config, command.out,
                                             command.cli_threads)
    except exception.ConfigInvalid as exc:
        sys.stderr.write(f'Error: {exc.message}\n')
        return EXIT_CONFIG
    CONF.set_override('threads', config.threads)
    try:
        stages.run(command.name, config)
    except Exception as exc:
        sys.stderr.write(f'Error: {exc}\n')
        LOG.debug('Stage failure details', exc_info=True)
        return EXIT_FAILURE
    finally:
        CONF.clear_override('threads')
    LOG.info('Artifacts written to %s', config.output_dir)
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
