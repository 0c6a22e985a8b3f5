"""Command line interface: ``ragrec prepare | run | report | mf-train |
dump-prompts``.

Exit codes: 0 success, 1 configuration or input error, 2 failed (or
unparseable) trials above the configured threshold, 3 run aborted.

"""
import asyncio
import functools
import logging
import os

import click

import ragrec.util as util
from ragrec.runner.config import load_config, mf_config
from ragrec.runner.controller import Controller, prepare
from ragrec.runner.report import report as make_report

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2
EXIT_ABORTED = 3

logger = logging.getLogger(__name__)


def _overrides(**options):
    """Nested config overrides from ``section__key`` options that were
    given on the command line."""
    overrides = {}
    for name, value in options.items():
        if value is None:
            continue
        section, key = name.split('__')
        overrides.setdefault(section, {})[key] = value
    return overrides


def handle_errors(func):
    """Report validation errors and exit with code 1."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ValueError as e:
            logger.debug('Error details', exc_info=True)
            click.echo('Error: %s' % e, err=True)
            raise SystemExit(EXIT_CONFIG)
    return wrapper


def config_options(func):
    """Options shared by the commands that read an experiment config."""
    options = [
        click.option('--config', '-c', 'config_path',
                     type=click.Path(exists=True, dir_okay=False),
                     help='Experiment config (YAML)'),
        click.option('--dataset', 'dataset__path',
                     help='Rating file (overrides dataset.path)'),
        click.option('--seed', 'run__seed', type=int,
                     help='Master seed (overrides run.seed)'),
        click.option('--output-dir', '-o', 'run__output_dir',
                     help='Output directory (overrides run.output_dir)'),
        click.option('--sample-size', 'cohort__sample_size', type=int,
                     help='Users sampled per group'),
        click.option('--groups', 'cohort__groups',
                     callback=util.validate_str_list,
                     help='Comma-separated user groups (hot, cold)'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
@click.option('--log-level', '-l', default='info', show_default=True,
              type=click.Choice(['debug', 'info', 'warning', 'error',
                                 'critical']),
              help='Log level')
@click.option('--log-file', '-lf', default=None,
              help='Log file (debug messages will be stored in that file)')
def main(log_level, log_file):
    """Retrieval-augmented LLM recommendation benchmark."""
    util.initialize_logger(log_level, log_file)


@main.command('prepare')
@config_options
@handle_errors
def prepare_command(config_path, **options):
    """Load and split the dataset and sample the evaluation cohort."""
    config = load_config(config_path, _overrides(**options))
    prepared = prepare(config)
    cohort = prepared.cohort
    click.echo('%d users, %d items; cohort: %d hot, %d cold (median %d)' %
               (prepared.dataset.matrix.n_users,
                prepared.dataset.matrix.n_items, len(cohort.hot_users),
                len(cohort.cold_users), cohort.median_count))


def exit_code(summary, config):
    if summary.aborted:
        return EXIT_ABORTED
    if summary.failure_rate > config.run['failure_threshold']:
        return EXIT_PARTIAL
    min_parse_rate = config.run['min_parse_rate']
    if min_parse_rate is not None and summary.parse_rate is not None and \
            summary.parse_rate < min_parse_rate:
        return EXIT_PARTIAL
    return EXIT_OK


@main.command('run')
@config_options
@click.option('--strategies', 'sweep__strategies',
              callback=util.validate_str_list,
              help='Comma-separated prompt strategies')
@click.option('--k-values', 'sweep__k_values',
              callback=util.validate_int_list,
              help='Comma-separated neighbor counts')
@click.option('--fractions', 'sweep__fractions',
              callback=util.validate_float_list,
              help='Comma-separated sampling fractions')
@click.option('--backend', 'backend__type',
              help='Backend type (mock kind or chat_completions)')
@click.option('--concurrency', 'gateway__concurrency', type=int,
              help='Requests in flight')
@click.option('--live', is_flag=True, default=False,
              help='Allow a backend that calls a live API')
@click.option('--resume/--fresh', default=True, show_default=True,
              help='Continue the run recorded in the output directory')
@handle_errors
def run_command(config_path, live, resume, **options):
    """Run the experiment sweep and write results and report."""
    config = load_config(config_path, _overrides(**options), live=live)
    ctrl, obs = Controller.factory(config, resume=resume)
    summary = asyncio.run(ctrl.run_experiment())
    click.echo('%d trials, %d failed (%.1f%%), parse rate %s%s' % (
        summary.n_trials, summary.n_failed, 100 * summary.failure_rate,
        '-' if summary.parse_rate is None else
        '%.1f%%' % (100 * summary.parse_rate),
        ', ABORTED' if summary.aborted else ''))
    raise SystemExit(exit_code(summary, config))


@main.command('report')
@click.argument('results_dir', type=click.Path(exists=True, file_okay=False))
@handle_errors
def report_command(results_dir):
    """Write aggregates, CDFs and the MF comparison of RESULTS_DIR."""
    rows = make_report(results_dir)
    click.echo('%d aggregate rows written to %s' %
               (len(rows), os.path.join(results_dir, 'report')))


@main.command('mf-train')
@config_options
@click.option('--grid/--no-grid', default=False, show_default=True,
              help='Search latent dimensions and batch sizes (mf.grid)')
@click.option('--workers', default=1, show_default=True, type=int,
              help='Processes for the grid search')
@handle_errors
def mf_train_command(config_path, grid, workers, **options):
    """Train the MF baseline and store its checkpoint."""
    overrides = _overrides(**options)
    config = load_config(config_path, overrides)
    if grid and config.mf['grid'] is None:
        overrides.setdefault('mf', {})['grid'] = {}
        config = load_config(config_path, overrides)
    ctrl = Controller(config)
    model = ctrl.train_mf(workers)
    click.echo('Trained MF model (d=%d) on %d users x %d items' %
               (model.d, model.n_users, model.n_items))
    logger.debug('MF config: %s', mf_config(config))


@main.command('dump-prompts')
@config_options
@click.argument('directory', type=click.Path(file_okay=False))
@click.option('--users', callback=util.validate_int_list,
              help='Comma-separated user indices')
@click.option('--strategies', callback=util.validate_str_list,
              help='Comma-separated prompt strategies')
@click.option('--k-values', callback=util.validate_int_list,
              help='Comma-separated neighbor counts')
@click.option('--fractions', callback=util.validate_float_list,
              help='Comma-separated sampling fractions')
@handle_errors
def dump_prompts_command(config_path, directory, users, strategies,
                         k_values, fractions, **options):
    """Render the prompts of the sweep into DIRECTORY."""
    overrides = _overrides(**options)
    for key, value in (('strategies', strategies), ('k_values', k_values),
                       ('fractions', fractions)):
        if value:
            overrides.setdefault('sweep', {})[key] = value
    config = load_config(config_path, overrides)
    ctrl = Controller(config)
    paths = ctrl.dump_prompts(directory, users=set(users or ()))
    click.echo('%d prompts written to %s' % (len(paths), directory))


if __name__ == '__main__':
    main()
