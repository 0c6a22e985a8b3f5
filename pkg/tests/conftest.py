import os

import numpy as np
import pytest

from ragrec.runner.config import load_config

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), 'fixtures', 'golden')

TOY_COUNTS = [30, 24, 20, 17, 15, 13, 12, 11, 10, 9, 8, 8, 7, 7, 6, 6, 5, 5,
              4, 4]
TOY_ITEMS = 100


def toy_lines(seed=7, counts=TOY_COUNTS, n_items=TOY_ITEMS):
    """Rating lines of a small Zipf-shaped dataset: popular items are
    rated by many users, raw ids start at 1 and timestamps are distinct.
    """
    rng = np.random.default_rng(seed)
    weights = 1.0 / np.arange(1, n_items + 1) ** 1.2
    weights /= weights.sum()
    lines = []
    for user, count in enumerate(counts):
        items = rng.choice(n_items, size=count, replace=False, p=weights)
        ratings = rng.integers(1, 6, size=count)
        for j, (item, rating) in enumerate(zip(items.tolist(),
                                               ratings.tolist())):
            lines.append((user + 1, item + 1, rating,
                          880000000 + 1000 * user + 37 * j))
    return lines


def write_lines(path, lines, sep='\t'):
    with open(path, 'w', newline='\n') as f:
        for line in lines:
            f.write(sep.join(str(v) for v in line) + '\n')
    return str(path)


@pytest.fixture
def toy_ratings(tmp_path):
    return write_lines(tmp_path / 'u.data', toy_lines())


@pytest.fixture
def make_config(toy_ratings, tmp_path):
    """Factory of toy experiment configs; keyword arguments update the
    config sections, e.g. ``make_config('out', backend={'type': 'echo'})``.
    """
    def make(output='run', live=False, **sections):
        overrides = {
            'dataset': {'path': toy_ratings},
            'cohort': {'sample_size': 5},
            'sweep': {'k_values': [3, 5], 'fractions': [0.5, 1.0]},
            'backend': {'type': 'oracle_leak'},
            'gateway': {'backoff_base': 0.0, 'jitter': False,
                        'concurrency': 4},
            'mf': {'d': 4, 'epochs': 20, 'patience': 5},
            'run': {'seed': 42, 'output_dir': str(tmp_path / output),
                    'workers': 2},
        }
        for section, values in sections.items():
            overrides.setdefault(section, {}).update(values)
        return load_config(None, overrides, live=live)
    return make
