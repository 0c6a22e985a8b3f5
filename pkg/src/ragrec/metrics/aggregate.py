"""Evaluation records, per-group aggregation, empirical CDFs and the CSV
files they are exchanged in."""
import csv
import logging
import math
from collections import namedtuple

import ragrec.util as util
from ragrec.metrics.scoring import MetricError

logger = logging.getLogger(__name__)

OUTCOMES = ('ok', 'short', 'failed')
METHODS = ('baseline', 'sentiment', 'reasoning', 'full_reasoning', 'mf')

RESULT_COLUMNS = ('user', 'group', 'method', 'k', 'fraction', 'ndcg',
                  'hit_score', 'hit_any', 'latency_ms', 'prompt_tokens',
                  'outcome')
# The partial trial ledger also keeps the flat Hit@10, which is published
# in its own per-trial file next to the results
TRIAL_COLUMNS = RESULT_COLUMNS + ('hit_flat',)
HIT_FLAT_COLUMNS = ('user', 'group', 'method', 'k', 'fraction', 'hit_flat')
DEFAULT_GROUP_BY = ('group', 'method', 'k', 'fraction')
METRIC_COLUMNS = ('ndcg', 'hit_score', 'hit_any', 'hit_flat', 'latency_ms',
                  'prompt_tokens')
AGGREGATE_STATS = ('n', 'n_failed', 'failure_rate', 'short_rate')
CDF_COLUMNS = ('value', 'cum_fraction')

# *latency* in seconds; the metrics and latency are None for failed trials
EvalRecord = namedtuple(
    'EvalRecord',
    'user, group, method, k, fraction, ndcg, hit_score, hit_any, latency, '
    'prompt_tokens, outcome, hit_flat')
EvalRecord.__new__.__defaults__ = (None,)

CdfSeries = namedtuple('CdfSeries', 'values, cum_fractions')


class SchemaError(ValueError):
    pass


def canonical_key(record):
    return (record.user, METHODS.index(record.method)
            if record.method in METHODS else len(METHODS), record.method,
            record.k, record.fraction)


def canonical_sort(records):
    return sorted(records, key=canonical_key)


def _value(record, field):
    if field == 'latency_ms':
        return None if record.latency is None else record.latency * 1000.0
    return getattr(record, field)


def _mean_std(values):
    if not values:
        return None, None
    mean = math.fsum(values) / len(values)
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) /
                    len(values))
    return mean, std


def aggregate(records, group_by=DEFAULT_GROUP_BY):
    """Mean and (population) standard deviation of the metric columns per
    *group_by* cell.

    Failed trials count towards ``n`` and ``failure_rate`` but not towards
    the means.  Sums use :func:`math.fsum`, so the result does not depend
    on the record order.  Rows are sorted by their cell key.

    """
    cells = {}
    for record in records:
        key = tuple(getattr(record, f) for f in group_by)
        cells.setdefault(key, []).append(record)

    rows = []
    for key in sorted(cells):
        cell = cells[key]
        done = [r for r in cell if r.outcome != 'failed']
        row = dict(zip(group_by, key))
        row['n'] = len(cell)
        row['n_failed'] = len(cell) - len(done)
        row['failure_rate'] = row['n_failed'] / len(cell)
        row['short_rate'] = sum(r.outcome == 'short' for r in cell) / \
            len(cell)
        for field in METRIC_COLUMNS:
            values = [float(_value(r, field)) for r in done
                      if _value(r, field) is not None]
            row[field + '_mean'], row[field + '_std'] = _mean_std(values)
        rows.append(row)
    return rows


def aggregate_columns(group_by=DEFAULT_GROUP_BY):
    columns = list(group_by) + list(AGGREGATE_STATS)
    for field in METRIC_COLUMNS:
        columns += [field + '_mean', field + '_std']
    return columns


def cdf(values):
    """Empirical CDF of *values*: one point per distinct value with the
    fraction of values less than or equal to it."""
    if len(values) == 0:
        raise MetricError('cdf of an empty sample')
    ordered = sorted(values)
    n = len(ordered)
    xs, fractions = [], []
    for i, v in enumerate(ordered, 1):
        if i < n and ordered[i] == v:
            continue
        xs.append(v)
        fractions.append(i / n)
    return CdfSeries(xs, fractions)


def _fmt(value, fmt='%.6f'):
    if value is None:
        return ''
    if isinstance(value, float):
        return fmt % value
    return str(value)


def _write_header(f, header):
    if header:
        f.write('# %s\n' % ' '.join('%s=%s' % (k, header[k])
                                    for k in sorted(header)))


def format_record(record, columns=RESULT_COLUMNS):
    values = {
        'user': str(record.user), 'group': record.group,
        'method': record.method, 'k': str(record.k),
        'fraction': util.format_fraction(record.fraction),
        'ndcg': _fmt(record.ndcg), 'hit_score': _fmt(record.hit_score),
        'hit_any': _fmt(record.hit_any), 'hit_flat': _fmt(record.hit_flat),
        'latency_ms': _fmt(_value(record, 'latency_ms'), '%.3f'),
        'prompt_tokens': _fmt(record.prompt_tokens),
        'outcome': record.outcome,
    }
    return [values[c] for c in columns]


def write_results(path, records, header=None, columns=RESULT_COLUMNS):
    """Write *records* (in the given order) as results CSV with a
    ``# key=value ...`` *header* comment line."""
    with open(path, 'w', newline='', encoding='utf-8') as f:
        _write_header(f, header)
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for record in records:
            writer.writerow(format_record(record, columns))


def _parse_optional(value, kind):
    return None if value in ('', None) else kind(value)


def read_header(path):
    """The ``key=value`` pairs of the leading comment line of *path*."""
    with open(path, encoding='utf-8') as f:
        first = f.readline()
    if not first.startswith('#'):
        return {}
    return dict(part.split('=', 1) for part in first[1:].split()
                if '=' in part)


def read_results(path):
    """Read a results CSV back into :class:`EvalRecord` objects.

    :raises SchemaError: naming the first missing column.

    """
    with open(path, newline='', encoding='utf-8') as f:
        lines = [line for line in f if not line.startswith('#')]
    reader = csv.DictReader(lines)
    for column in RESULT_COLUMNS:
        if column not in (reader.fieldnames or ()):
            raise SchemaError('results file %s lacks column %r' %
                              (path, column))
    records = []
    for row in reader:
        latency_ms = _parse_optional(row['latency_ms'], float)
        records.append(EvalRecord(
            int(row['user']), row['group'], row['method'], int(row['k']),
            float(row['fraction']), _parse_optional(row['ndcg'], float),
            _parse_optional(row['hit_score'], float),
            _parse_optional(row['hit_any'], float),
            None if latency_ms is None else latency_ms / 1000.0,
            _parse_optional(row['prompt_tokens'], int), row['outcome'],
            _parse_optional(row.get('hit_flat'), float)))
    return records


def read_hit_flat(path):
    """The flat Hit@10 per trial key (user, method, k, fraction) of a file
    written with :data:`HIT_FLAT_COLUMNS`."""
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.DictReader(line for line in f
                                if not line.startswith('#'))
        return {(int(row['user']), row['method'], int(row['k']),
                 float(row['fraction'])):
                _parse_optional(row['hit_flat'], float) for row in reader}


def write_aggregate(path, rows, group_by=DEFAULT_GROUP_BY, header=None):
    columns = aggregate_columns(group_by)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        _write_header(f, header)
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([util.format_fraction(row[c])
                             if c == 'fraction' else _fmt(row[c])
                             for c in columns])


def write_cdf(path, series, header=None):
    with open(path, 'w', newline='', encoding='utf-8') as f:
        _write_header(f, header)
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(CDF_COLUMNS)
        for value, fraction in zip(series.values, series.cum_fractions):
            writer.writerow([_fmt(float(value)), '%.6f' % fraction])
