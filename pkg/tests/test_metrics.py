import math

import numpy as np
import pytest

from ragrec.metrics import (HIT_FLAT_COLUMNS, RESULT_COLUMNS, TRIAL_COLUMNS,
                            EvalRecord, MetricError, SchemaError, aggregate,
                            canonical_sort, cdf, hit_any, hit_at_10,
                            hit_flat_at_10, hit_score, ndcg_at_10,
                            read_header, read_hit_flat, read_results,
                            write_results)


def dcg(ranks):
    return sum(1.0 / math.log2(r + 1) for r in ranks)


CASES = [
    # recommended, masked, ndcg, hit
    ([1, 2, 9, 4], {7, 9}, 0.5 / (1 + 1 / math.log2(3)), 0.5),
    (list(range(10)), set(range(10, 20)), 0.0, 0.0),
    (list(range(10)), set(range(10)), 1.0, 1.0),
    (list(range(10)), set(range(25)), 1.0, 1.0),
    (list(range(10)), {0}, 1.0, 1.0),
    (list(range(10)), {9}, dcg([10]), 1.0),
    (list(range(10)), {0, 1}, 1.0, 1.0),
    (list(range(10)), {1, 0, 50}, dcg([1, 2]) / dcg([1, 2, 3]), 2 / 3),
    (list(range(10)), {5}, dcg([6]), 1.0),
    (list(range(10)), {2, 4, 6}, dcg([3, 5, 7]) / dcg([1, 2, 3]), 1.0),
    (list(range(10)), {0, 99}, 1.0 / dcg([1, 2]), 0.5),
    (list(range(10)), {99, 98}, 0.0, 0.0),
    ([], {3}, 0.0, 0.0),
    ([3], {3}, 1.0, 1.0),
    ([4, 3], {3}, dcg([2]), 1.0),
    ([4, 3], {3, 4}, 1.0, 1.0),
    (list(range(12)), {10, 11}, 0.0, 0.0),
    (list(range(12)), {9, 10}, dcg([10]) / dcg([1, 2]), 0.5),
    (list(range(10)), set(range(5, 15)), dcg(range(6, 11)) / dcg(range(1, 11)),
     0.5),
    (list(range(10)), set(range(0, 20, 2)), dcg(range(1, 11, 2)) /
     dcg(range(1, 11)), 0.5),
    ([7, 8, 9], {7, 8, 9, 10}, dcg([1, 2, 3]) / dcg([1, 2, 3, 4]), 0.75),
]


@pytest.mark.parametrize('recommended, masked, ndcg, hit', CASES)
def test_enumerated_cases(recommended, masked, ndcg, hit):
    assert abs(ndcg_at_10(recommended, masked) - ndcg) <= 1e-9
    assert abs(hit_at_10(recommended, masked) - hit) <= 1e-9


def test_single_hit_at_rank_three():
    assert ndcg_at_10([1, 2, 9], {7, 9}) == pytest.approx(0.3066, abs=1e-4)


def _brute_force(recommended, masked):
    rel = [1 if item in masked else 0 for item in recommended[:10]]
    dcg_value = sum(r / math.log2(i + 2) for i, r in enumerate(rel))
    ideal = sum(1 / math.log2(i + 2) for i in range(min(10, len(masked))))
    return dcg_value / ideal, sum(rel) / min(10, len(masked))


def test_fuzzed_against_brute_force():
    rng = np.random.default_rng(99)
    for _ in range(1000):
        n_items = int(rng.integers(5, 40))
        recommended = rng.permutation(n_items)[:int(rng.integers(0, 15))]
        masked = set(rng.choice(n_items, size=int(rng.integers(1, 15)),
                                replace=True).tolist())
        ndcg, hit = _brute_force(recommended.tolist(), masked)
        got_ndcg = ndcg_at_10(recommended.tolist(), masked)
        got_hit = hit_at_10(recommended.tolist(), masked)
        assert abs(got_ndcg - ndcg) <= 1e-9
        assert abs(got_hit - hit) <= 1e-9
        assert 0.0 <= got_ndcg <= 1.0
        assert 0.0 <= got_hit <= 1.0


def test_ndcg_ignores_order_of_irrelevant_items():
    masked = {3, 8}
    assert ndcg_at_10([3, 1, 8, 2, 4], masked) == \
        ndcg_at_10([3, 2, 8, 1, 4], masked)
    assert ndcg_at_10([3, 1, 8, 2, 4], masked) == \
        ndcg_at_10([3, 1, 8, 4, 2], masked)


def test_ndcg_rewards_better_rank():
    masked = {5}
    scores = [ndcg_at_10([i for i in range(10) if i != 5][:rank] + [5], masked)
              for rank in range(9, -1, -1)]
    assert scores == sorted(scores)
    assert len(set(scores)) == len(scores)


def test_metric_preconditions():
    with pytest.raises(MetricError):
        ndcg_at_10([1, 2], set())
    with pytest.raises(MetricError):
        hit_at_10([1, 1], {1})


def test_hit_variants():
    recommended = list(range(10))
    masked = {0, 1, 50}
    assert hit_at_10(recommended, masked) == pytest.approx(2 / 3)
    assert hit_flat_at_10(recommended, masked) == pytest.approx(0.2)
    assert hit_any(recommended, masked) == 1.0
    assert hit_any(recommended, {50}) == 0.0
    assert hit_score(recommended, masked, 'flat') == \
        hit_flat_at_10(recommended, masked)
    with pytest.raises(MetricError):
        hit_score(recommended, masked, 'weighted')


def record(user=0, group='hot', method='reasoning', k=5, fraction=1.0,
           ndcg=0.5, hit=0.5, latency=0.25, tokens=100, outcome='ok',
           flat=None):
    return EvalRecord(user, group, method, k, fraction, ndcg, hit,
                      None if ndcg is None else float(hit > 0), latency,
                      tokens, outcome, flat)


def test_aggregate_mean_and_failures():
    records = [record(user=1, ndcg=0.2), record(user=2, ndcg=0.4),
               record(user=3, ndcg=None, hit=None, latency=None,
                      outcome='failed'),
               record(user=4, group='cold', ndcg=0.9)]
    rows = aggregate(records)
    assert [(r['group'], r['n']) for r in rows] == [('cold', 1), ('hot', 3)]
    hot = rows[1]
    assert hot['ndcg_mean'] == pytest.approx(0.3)
    assert hot['ndcg_std'] == pytest.approx(0.1)
    assert hot['n_failed'] == 1
    assert hot['failure_rate'] == pytest.approx(1 / 3)
    assert hot['latency_ms_mean'] == pytest.approx(250.0)


def test_aggregate_empty():
    assert aggregate([]) == []


def test_aggregate_is_order_independent():
    rng = np.random.default_rng(4)
    records = [record(user=u, k=int(rng.choice([5, 10])),
                      ndcg=float(rng.random()), hit=float(rng.random()))
               for u in range(200)]
    expected = aggregate(records)
    for _ in range(5):
        shuffled = [records[i] for i in rng.permutation(len(records))]
        assert aggregate(shuffled) == expected


def test_aggregate_custom_group_by():
    records = [record(user=1, k=5), record(user=2, k=10)]
    rows = aggregate(records, ('group',))
    assert len(rows) == 1
    assert rows[0]['n'] == 2


def test_cdf_points():
    series = cdf([3, 1, 2])
    assert series.values == [1, 2, 3]
    assert series.cum_fractions == pytest.approx([1 / 3, 2 / 3, 1.0])


def test_cdf_constant_values():
    series = cdf([4.0, 4.0, 4.0])
    assert series.values == [4.0]
    assert series.cum_fractions == [1.0]


def test_cdf_empty():
    with pytest.raises(MetricError):
        cdf([])


def test_cdf_matches_threshold_counting():
    rng = np.random.default_rng(17)
    values = np.round(rng.exponential(size=1000), 2).tolist()
    series = cdf(values)
    for x, fraction in zip(series.values, series.cum_fractions):
        assert fraction == sum(v <= x for v in values) / len(values)
    assert series.cum_fractions[-1] == 1.0


def test_results_file_round_trip(tmp_path):
    records = [record(user=2, method='mf', k=0, fraction=0.0, latency=None,
                      tokens=None),
               record(user=1, fraction=0.25),
               record(user=1, ndcg=None, hit=None, latency=None,
                      outcome='failed')]
    path = str(tmp_path / 'results.csv')
    write_results(path, canonical_sort(records), {'config_hash': 'abc',
                                                  'template_version': 'v1'})
    assert read_header(path) == {'config_hash': 'abc',
                                 'template_version': 'v1'}
    loaded = read_results(path)
    assert [r.user for r in loaded] == [1, 1, 2]
    assert loaded[0].fraction == 0.25
    assert loaded[1].outcome == 'failed'
    assert loaded[1].ndcg is None
    assert loaded[2].latency is None
    assert loaded[0].latency == pytest.approx(0.25)


def test_results_missing_column(tmp_path):
    path = tmp_path / 'results.csv'
    path.write_text('user,group,method,k,fraction,ndcg\n1,hot,mf,0,0,0.5\n')
    with pytest.raises(SchemaError, match='hit_score'):
        read_results(str(path))


def test_aggregate_flat_hit():
    records = [record(user=1, flat=0.1), record(user=2, flat=0.3),
               record(user=3, ndcg=None, hit=None, latency=None,
                      outcome='failed')]
    row = aggregate(records)[0]
    assert row['hit_flat_mean'] == pytest.approx(0.2)
    assert row['hit_flat_std'] == pytest.approx(0.1)
    assert aggregate([record()])[0]['hit_flat_mean'] is None


def test_flat_hit_file(tmp_path):
    records = canonical_sort([record(user=2, flat=0.4),
                              record(user=1, fraction=0.25, flat=0.1),
                              record(user=1, method='mf', k=0, fraction=0.0,
                                     flat=0.0)])
    results = str(tmp_path / 'results.csv')
    flat = str(tmp_path / 'hit_flat.csv')
    write_results(results, records)
    write_results(flat, records, columns=HIT_FLAT_COLUMNS)
    with open(results) as f:
        assert f.readline().strip() == ','.join(RESULT_COLUMNS)
    assert all(r.hit_flat is None for r in read_results(results))
    assert read_hit_flat(flat) == {(1, 'reasoning', 5, 0.25): 0.1,
                                   (1, 'mf', 0, 0.0): 0.0,
                                   (2, 'reasoning', 5, 1.0): 0.4}


def test_trial_ledger_keeps_flat_hit(tmp_path):
    path = str(tmp_path / 'results.partial.csv')
    write_results(path, [record(flat=0.3)], columns=TRIAL_COLUMNS)
    assert read_results(path)[0].hit_flat == pytest.approx(0.3)
