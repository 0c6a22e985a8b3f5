"""Experiment configuration: defaults, YAML loading and validation.

An experiment file is a YAML mapping with ``version: 1`` and the sections
below; every key is optional except ``dataset.path`` and ``run.seed``.
Command line overrides are merged on top of the file.

"""
import copy
import logging
import numbers
import os
from collections import namedtuple

import yaml

import ragrec.util as util
from ragrec.ingest.cohort import GROUPS
from ragrec.ingest.ratings import DELIMITERS
from ragrec.ingest.split import MASK_MODES
from ragrec.llm_gateway.backends import (DEFAULT_API_KEY_ENV,
                                         DEFAULT_BASE_URL, MOCK_KINDS)
from ragrec.metrics.scoring import HIT_METRICS
from ragrec.mf_baseline.training import MFConfig
from ragrec.promptgen.render import STRATEGIES
from ragrec.promptgen.templates import TEMPLATE_VERSION
from ragrec.retrieval.sampling import SAMPLE_ORDERS

logger = logging.getLogger(__name__)

CONFIG_VERSION = 1

LIVE_BACKENDS = ('chat_completions', 'custom')

DATASET_CONFIG = {
    'path': None,
    'delimiter': 'tab',
    'mask_fraction': 0.2,
    'mask_mode': 'random',
}

COHORT_CONFIG = {
    'sample_size': 350,
    'groups': list(GROUPS),
}

SWEEP_CONFIG = {
    'strategies': list(STRATEGIES),
    'k_values': [5, 10, 20],
    'fractions': [0.25, 0.5, 0.75, 1.0],
    'sample_order': 'sample_then_filter',
}

BACKEND_CONFIG = {
    'type': 'popularity',       # a mock kind, chat_completions or custom
    'text': None,               # echo mock answer
    'model': None,
    'base_url': DEFAULT_BASE_URL,
    'api_key_env': DEFAULT_API_KEY_ENV,
    'temperature': 0.0,
    'max_tokens': None,
    'class': None,              # 'module:Class' of a custom backend
    'options': None,            # keyword arguments of a custom backend
}

GATEWAY_CONFIG = {
    'concurrency': 4,
    'timeout': 60.0,            # seconds per attempt
    'max_retries': 5,
    'backoff_base': 1.0,        # seconds
    'backoff_factor': 2.0,
    'jitter': True,
    'requests_per_second': None,
    'transcript': None,         # JSON lines file of live exchanges
}

MF_CONFIG = {
    'enabled': True,
    'd': 32,
    'learning_rate': 0.01,
    'l2': 0.05,
    'epochs': 200,
    'patience': 20,
    'min_epochs': 50,           # epochs before patience applies
    'validation_fraction': 0.1,
    'batch_size': 1,            # 0 for one full batch per epoch
    'init_std': 0.1,
    'grid': None,   # {'dimensions': [...], 'batch_sizes': [...]}
}

RUN_CONFIG = {
    'seed': None,
    'output_dir': 'results',
    'template_version': TEMPLATE_VERSION,
    'hit_metric': 'normalized',
    'failure_threshold': 0.1,   # failed share above which the exit code is 2
    'min_parse_rate': None,     # required share of parseable responses
    'abort_after': 10,          # consecutive transport errors
    'workers': 4,               # render / score threads
}

DEFAULTS = {
    'version': CONFIG_VERSION,
    'dataset': DATASET_CONFIG,
    'cohort': COHORT_CONFIG,
    'sweep': SWEEP_CONFIG,
    'backend': BACKEND_CONFIG,
    'gateway': GATEWAY_CONFIG,
    'mf': MF_CONFIG,
    'run': RUN_CONFIG,
}

SECTIONS = ('dataset', 'cohort', 'sweep', 'backend', 'gateway', 'mf', 'run')

# Keys that only affect scheduling or file locations, not results
SCHEDULING_KEYS = {
    'gateway': ('concurrency', 'requests_per_second', 'transcript'),
    'run': ('output_dir', 'workers', 'failure_threshold', 'min_parse_rate',
            'abort_after'),
}

# Dataset keys that determine the prepared data snapshot
PREPARED_KEYS = {
    'dataset': ('path', 'delimiter', 'mask_fraction', 'mask_mode'),
    'cohort': ('sample_size',),
    'run': ('seed',),
}

ExperimentConfig = namedtuple('ExperimentConfig',
                              'version, ' + ', '.join(SECTIONS))


class ConfigError(ValueError):
    """Invalid configuration; *errors* lists every problem found."""
    def __init__(self, errors):
        super().__init__('invalid configuration:\n  ' +
                         '\n  '.join(errors))
        self.errors = list(errors)


def _merge(base, update, path, errors):
    for key, value in update.items():
        where = '%s.%s' % (path, key) if path else key
        if key not in base:
            errors.append('unknown key %s' % where)
        elif isinstance(base[key], dict) and isinstance(value, dict):
            _merge(base[key], value, where, errors)
        elif isinstance(base[key], dict):
            errors.append('%s must be a mapping' % where)
        else:
            base[key] = value


def read_config_file(path):
    try:
        with open(path, encoding='utf-8') as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(['cannot read config file %s: %s' % (path, e)])
    except yaml.YAMLError as e:
        raise ConfigError(['config file %s is not valid YAML: %s' %
                           (path, e)])
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(['config file %s must hold a mapping' % path])
    return data


def load_config(path=None, overrides=None, live=False):
    """Build an :class:`ExperimentConfig` from the defaults, the YAML file
    at *path* and the nested *overrides* dict (in this order).

    :param live: Whether the caller opted in to a live backend.
    :raises ConfigError: listing all problems at once.

    """
    data = copy.deepcopy(DEFAULTS)
    errors = []
    if path is not None:
        _merge(data, read_config_file(path), '', errors)
    if overrides:
        _merge(data, overrides, '', errors)
    errors += validate(data, live)
    if errors:
        raise ConfigError(errors)
    if data['dataset']['path']:
        data['dataset']['path'] = os.path.expanduser(data['dataset']['path'])
    return ExperimentConfig(**data)


def _is_int(value):
    return isinstance(value, numbers.Integral) and not isinstance(value,
                                                                   bool)


def _is_real(value):
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


def _check_list(errors, name, values, check, what):
    if not isinstance(values, list) or not values:
        errors.append('%s must be a non-empty list' % name)
        return
    for v in values:
        if not check(v):
            errors.append('%s: %r is not %s' % (name, v, what))
    if len(set(map(repr, values))) != len(values):
        errors.append('%s contains duplicates' % name)


def validate(data, live=False):
    """Return the list of problems of the merged config *data*."""
    errors = []
    if data['version'] != CONFIG_VERSION:
        errors.append('version must be %d, got %r' % (CONFIG_VERSION,
                                                      data['version']))
    ds, cohort, sweep = data['dataset'], data['cohort'], data['sweep']
    backend, gw, mf, run = data['backend'], data['gateway'], data['mf'], \
        data['run']

    if not isinstance(ds['path'], str) or not ds['path']:
        errors.append('dataset.path is required')
    if not isinstance(ds['delimiter'], str) or not ds['delimiter']:
        errors.append('dataset.delimiter must be a separator or one of %s' %
                      ', '.join(DELIMITERS))
    if not (_is_real(ds['mask_fraction']) and
            0 < ds['mask_fraction'] < 1):
        errors.append('dataset.mask_fraction must be in (0, 1)')
    if ds['mask_mode'] not in MASK_MODES:
        errors.append('dataset.mask_mode must be one of %s' %
                      ', '.join(MASK_MODES))

    if not (_is_int(cohort['sample_size']) and cohort['sample_size'] > 0):
        errors.append('cohort.sample_size must be a positive integer')
    _check_list(errors, 'cohort.groups', cohort['groups'],
                lambda g: g in GROUPS, 'one of %s' % ', '.join(GROUPS))

    _check_list(errors, 'sweep.strategies', sweep['strategies'],
                lambda s: s in STRATEGIES, 'one of %s' %
                ', '.join(STRATEGIES))
    _check_list(errors, 'sweep.k_values', sweep['k_values'],
                lambda k: _is_int(k) and k >= 1, 'an integer >= 1')
    _check_list(errors, 'sweep.fractions', sweep['fractions'],
                lambda f: _is_real(f) and 0 < f <= 1, 'in (0, 1]')
    if sweep['sample_order'] not in SAMPLE_ORDERS:
        errors.append('sweep.sample_order must be one of %s' %
                      ', '.join(SAMPLE_ORDERS))

    kind = backend['type']
    if kind not in MOCK_KINDS + LIVE_BACKENDS:
        errors.append('backend.type must be one of %s' %
                      ', '.join(MOCK_KINDS + LIVE_BACKENDS))
    elif kind in LIVE_BACKENDS and not live:
        errors.append('backend.type %s calls a live API; pass --live to '
                      'allow it' % kind)
    if kind == 'chat_completions' and not backend['model']:
        errors.append('backend.model is required for chat_completions')
    if kind == 'custom' and not backend['class']:
        errors.append('backend.class is required for a custom backend')
    if backend['options'] is not None and not isinstance(backend['options'],
                                                         dict):
        errors.append('backend.options must be a mapping')

    if not (_is_int(gw['concurrency']) and gw['concurrency'] >= 1):
        errors.append('gateway.concurrency must be an integer >= 1')
    if not (_is_real(gw['timeout']) and gw['timeout'] > 0):
        errors.append('gateway.timeout must be positive')
    if not (_is_int(gw['max_retries']) and gw['max_retries'] >= 0):
        errors.append('gateway.max_retries must be an integer >= 0')
    for key in ('backoff_base', 'backoff_factor'):
        if not (_is_real(gw[key]) and gw[key] >= 0):
            errors.append('gateway.%s must be >= 0' % key)
    rps = gw['requests_per_second']
    if rps is not None and not (_is_real(rps) and rps > 0):
        errors.append('gateway.requests_per_second must be positive')

    for key in ('d', 'epochs', 'patience'):
        if not (_is_int(mf[key]) and mf[key] >= 1):
            errors.append('mf.%s must be an integer >= 1' % key)
    for key in ('min_epochs', 'batch_size'):
        if not (_is_int(mf[key]) and mf[key] >= 0):
            errors.append('mf.%s must be an integer >= 0' % key)
    for key in ('learning_rate', 'init_std'):
        if not (_is_real(mf[key]) and mf[key] > 0):
            errors.append('mf.%s must be positive' % key)
    if not (_is_real(mf['l2']) and mf['l2'] >= 0):
        errors.append('mf.l2 must be >= 0')
    if not (_is_real(mf['validation_fraction']) and
            0 <= mf['validation_fraction'] < 1):
        errors.append('mf.validation_fraction must be in [0, 1)')
    if mf['grid'] is not None:
        grid = mf['grid']
        if not isinstance(grid, dict) or set(grid) - {'dimensions',
                                                      'batch_sizes'}:
            errors.append('mf.grid may only hold dimensions and batch_sizes')
        else:
            for key in ('dimensions', 'batch_sizes'):
                if key in grid:
                    _check_list(errors, 'mf.grid.%s' % key, grid[key],
                                lambda v: _is_int(v) and v >= 1,
                                'an integer >= 1')

    if not _is_int(run['seed']):
        errors.append('run.seed must be an integer')
    if run['template_version'] != TEMPLATE_VERSION:
        errors.append('run.template_version %r does not match the '
                      'templates (%s)' % (run['template_version'],
                                          TEMPLATE_VERSION))
    if run['hit_metric'] not in HIT_METRICS:
        errors.append('run.hit_metric must be one of %s' %
                      ', '.join(HIT_METRICS))
    if not (_is_real(run['failure_threshold']) and
            0 <= run['failure_threshold'] <= 1):
        errors.append('run.failure_threshold must be in [0, 1]')
    mpr = run['min_parse_rate']
    if mpr is not None and not (_is_real(mpr) and 0 <= mpr <= 1):
        errors.append('run.min_parse_rate must be in [0, 1]')
    if not (_is_int(run['abort_after']) and run['abort_after'] >= 1):
        errors.append('run.abort_after must be an integer >= 1')
    if not (_is_int(run['workers']) and run['workers'] >= 1):
        errors.append('run.workers must be an integer >= 1')
    if not isinstance(run['output_dir'], str) or not run['output_dir']:
        errors.append('run.output_dir is required')
    return errors


def as_dict(config):
    return {'version': config.version,
            **{s: copy.deepcopy(getattr(config, s)) for s in SECTIONS}}


def _select(config, keys=None, exclude=None):
    data = as_dict(config)
    if keys is not None:
        return {s: {k: data[s][k] for k in ks} for s, ks in keys.items()}
    for section, ks in (exclude or {}).items():
        for k in ks:
            data[section].pop(k)
    return data


def experiment_hash(config):
    """Hash of all result-affecting settings; runs that differ only in
    scheduling (concurrency, output paths) share it."""
    return util.config_hash(_select(config, exclude=SCHEDULING_KEYS))


def prepared_fingerprint(config):
    """Hash of the settings that determine the prepared dataset."""
    return util.config_hash(_select(config, keys=PREPARED_KEYS))


def mf_config(config):
    """The :class:`~ragrec.mf_baseline.training.MFConfig` of the ``mf``
    section, seeded from the master seed."""
    mf = config.mf
    return MFConfig(d=mf['d'], learning_rate=mf['learning_rate'],
                    l2=mf['l2'], epochs=mf['epochs'],
                    patience=mf['patience'], min_epochs=mf['min_epochs'],
                    validation_fraction=mf['validation_fraction'],
                    batch_size=mf['batch_size'], init_std=mf['init_std'],
                    seed=util.stable_seed(config.run['seed'], 'mf'))


def dump_config(config, path):
    with open(path, 'w', encoding='utf-8') as f:
        yaml.safe_dump(as_dict(config), f, sort_keys=True)
