"""Report tables computed from a results file: per-cell aggregates, latency
and prompt-size CDFs and the comparison against the MF baseline."""
import logging
import os

import ragrec.util as util
from ragrec.metrics.aggregate import (DEFAULT_GROUP_BY, aggregate, cdf,
                                      read_header, read_hit_flat,
                                      read_results, write_aggregate,
                                      write_cdf)
from ragrec.runner.core.management import MF_METHOD

logger = logging.getLogger(__name__)

REPORT_DIR = 'report'
HIT_FLAT_FILE = 'hit_flat.csv'
AGGREGATE_FILE = 'aggregate.csv'
MF_COMPARISON_FILE = 'mf_comparison.csv'
CDF_METRICS = ('latency_ms', 'prompt_tokens')
COMPARISON_COLUMNS = ('group', 'method', 'k', 'fraction', 'ndcg', 'hit',
                      'mf_ndcg', 'mf_hit', 'ndcg_vs_mf', 'hit_vs_mf')


def _metric_value(record, metric):
    if metric == 'latency_ms':
        return None if record.latency is None else record.latency * 1000.0
    return record.prompt_tokens


def _cdf_name(metric, *parts):
    return 'cdf_%s_%s.csv' % (metric, '_'.join(parts))


def _write_cdfs(directory, records, header):
    """One CDF file per metric and (group, method, k, f) cell and per
    (group, f) over all LLM methods."""
    cells, by_fraction = {}, {}
    for r in records:
        if r.method == MF_METHOD or r.outcome == 'failed':
            continue
        cells.setdefault((r.group, r.method, r.k, r.fraction), []).append(r)
        by_fraction.setdefault((r.group, r.fraction), []).append(r)

    paths = []
    for metric in CDF_METRICS:
        for (group, method, k, fraction), cell in sorted(cells.items()):
            name = _cdf_name(metric, group, method, 'k%d' % k,
                             'f%s' % util.format_fraction(fraction))
            paths += _write_cdf(directory, name, cell, metric, header)
        for (group, fraction), cell in sorted(by_fraction.items()):
            name = _cdf_name(metric, group,
                             'f%s' % util.format_fraction(fraction))
            paths += _write_cdf(directory, name, cell, metric, header)
    return paths


def _write_cdf(directory, name, records, metric, header):
    values = [_metric_value(r, metric) for r in records]
    values = [v for v in values if v is not None]
    if not values:
        return []
    path = os.path.join(directory, name)
    write_cdf(path, cdf(values), header)
    return [path]


def _relative(value, base):
    if value is None or not base:
        return None
    return (value - base) / base


def mf_comparison(rows):
    """LLM cells of an aggregate table next to the MF means of the same
    user group, with the relative improvement over MF."""
    mf = {row['group']: row for row in rows if row['method'] == MF_METHOD}
    table = []
    for row in rows:
        if row['method'] == MF_METHOD or row['group'] not in mf:
            continue
        base = mf[row['group']]
        table.append({
            'group': row['group'], 'method': row['method'], 'k': row['k'],
            'fraction': row['fraction'],
            'ndcg': row['ndcg_mean'], 'hit': row['hit_score_mean'],
            'mf_ndcg': base['ndcg_mean'], 'mf_hit': base['hit_score_mean'],
            'ndcg_vs_mf': _relative(row['ndcg_mean'], base['ndcg_mean']),
            'hit_vs_mf': _relative(row['hit_score_mean'],
                                   base['hit_score_mean']),
        })
    return table


def _write_comparison(path, table, header):
    def fmt(value):
        return '' if value is None else '%.6f' % value

    with open(path, 'w', newline='\n', encoding='utf-8') as f:
        if header:
            f.write('# %s\n' % ' '.join('%s=%s' % (k, header[k])
                                        for k in sorted(header)))
        f.write(','.join(COMPARISON_COLUMNS) + '\n')
        for row in table:
            f.write(','.join(
                [row['group'], row['method'], str(row['k']),
                 util.format_fraction(row['fraction'])] +
                [fmt(row[c]) for c in COMPARISON_COLUMNS[4:]]) + '\n')


def report(results_dir, results_file='results.csv'):
    """Write the aggregate table, CDF files and MF comparison for the
    results file in *results_dir* into its ``report`` subdirectory.  The
    flat Hit@10 of each trial is taken from ``hit_flat.csv`` if present.

    The outputs depend on the results file only, so running the report
    twice gives byte-identical files.

    :raises SchemaError: if the results file lacks a column.

    """
    path = os.path.join(results_dir, results_file)
    records = read_results(path)
    flat_path = os.path.join(results_dir, HIT_FLAT_FILE)
    if os.path.exists(flat_path):
        flat = read_hit_flat(flat_path)
        records = [r._replace(hit_flat=flat.get(
            (r.user, r.method, r.k, r.fraction))) for r in records]
    header = read_header(path)
    out = os.path.join(results_dir, REPORT_DIR)
    os.makedirs(out, exist_ok=True)

    rows = aggregate(records, DEFAULT_GROUP_BY)
    write_aggregate(os.path.join(out, AGGREGATE_FILE), rows,
                    DEFAULT_GROUP_BY, header)
    cdf_paths = _write_cdfs(out, records, header)
    _write_comparison(os.path.join(out, MF_COMPARISON_FILE),
                      mf_comparison(rows), header)
    logger.info('Report of %d records: %d aggregate rows, %d CDF files in '
                '%s', len(records), len(rows), len(cdf_paths), out)
    return rows
