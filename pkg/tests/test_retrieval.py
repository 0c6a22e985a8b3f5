import math

import numpy as np
import pytest

from ragrec.ingest import RatingMatrix
from ragrec.retrieval import (NeighborContext, RetrievalError,
                              SimilarityIndex, cosine_similarity,
                              dense_similarities, popularity_stats,
                              read_neighbor_cache, sample_neighbor_ratings,
                              top_k_neighbors, write_neighbor_cache)
from ragrec.retrieval.similarity import Neighbor


def random_matrix(rng, n_users, n_items, density=0.2):
    users, items, ratings = [], [], []
    for u in range(n_users):
        n = max(1, int(rng.binomial(n_items, density)))
        for i in rng.choice(n_items, size=n, replace=False).tolist():
            users.append(u)
            items.append(i)
            ratings.append(int(rng.integers(1, 6)))
    return RatingMatrix(users, items, ratings, range(len(users)), n_users,
                        n_items)


def matrix_from_rows(rows):
    users, items, ratings = [], [], []
    for u, row in enumerate(rows):
        for i, r in enumerate(row):
            if r:
                users.append(u)
                items.append(i)
                ratings.append(r)
    return RatingMatrix(users, items, ratings, range(len(users)), len(rows),
                        len(rows[0]))


@pytest.mark.parametrize('a, b, expected', [
    ((5, 0, 3), (5, 0, 3), 1.0),
    ((5, 0, 0), (0, 3, 0), 0.0),
    ((5, 0, 3), (4, 2, 0), 20 / math.sqrt(34 * 20)),
    ((0, 0, 0), (1, 2, 3), 0.0),
])
def test_cosine_similarity(a, b, expected):
    assert cosine_similarity(a, b) == pytest.approx(expected, abs=1e-12)
    sparse_a = {i: v for i, v in enumerate(a) if v}
    sparse_b = {i: v for i, v in enumerate(b) if v}
    assert cosine_similarity(sparse_a, sparse_b) == \
        pytest.approx(expected, abs=1e-12)


def test_cosine_example_value():
    assert cosine_similarity((5, 0, 3), (4, 2, 0)) == \
        pytest.approx(0.76697, abs=1e-5)


def test_cosine_length_mismatch():
    with pytest.raises(RetrievalError):
        cosine_similarity((1, 2), (1, 2, 3))


def test_cosine_symmetric_and_bounded():
    rng = np.random.default_rng(1)
    for _ in range(200):
        a = rng.integers(0, 6, size=12)
        b = rng.integers(0, 6, size=12)
        sim = cosine_similarity(a, b)
        assert sim == cosine_similarity(b, a)
        assert 0.0 <= sim <= 1.0
        if a.any():
            assert cosine_similarity(a, a) == pytest.approx(1.0)


def test_top_k_caps_at_other_users():
    matrix = matrix_from_rows([(5, 1, 0), (4, 0, 2), (0, 3, 3)])
    context = top_k_neighbors(matrix, 0, 10)
    assert len(context.neighbors) == 2
    assert context.target == 0
    assert 0 not in {n.user for n in context.neighbors}


def test_top_k_ties_by_user_index():
    matrix = matrix_from_rows([(5, 1, 0), (0, 0, 4), (5, 1, 0), (5, 1, 0)])
    neighbors = top_k_neighbors(matrix, 2, 3).neighbors
    assert [n.user for n in neighbors] == [0, 3, 1]
    assert neighbors[0].similarity == pytest.approx(1.0)
    assert neighbors[1].similarity == pytest.approx(1.0)


def test_top_k_attaches_known_ratings():
    matrix = matrix_from_rows([(5, 1, 0), (4, 0, 2), (0, 3, 3)])
    context = top_k_neighbors(matrix, 0, 1)
    assert context.neighbors[0].user == 1
    assert context.neighbor_ratings == (((0, 4), (2, 2)),)
    assert not context.is_sampled


def test_top_k_rejects_bad_arguments():
    matrix = matrix_from_rows([(5, 1), (4, 0)])
    with pytest.raises(RetrievalError):
        top_k_neighbors(matrix, 2, 1)
    with pytest.raises(RetrievalError):
        top_k_neighbors(matrix, 0, 0)


def _brute_force(matrix, target):
    dense = np.asarray(matrix.to_csr().todense())
    sims = [(u, cosine_similarity(dense[target], dense[u]))
            for u in range(matrix.n_users) if u != target]
    return sorted(sims, key=lambda p: (-p[1], p[0]))


def test_top_k_matches_brute_force():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        n_users = int(rng.integers(2, 201))
        n_items = int(rng.integers(5, 101))
        matrix = random_matrix(rng, n_users, n_items)
        index = SimilarityIndex(matrix)
        target = int(rng.integers(0, n_users))
        k = int(rng.integers(1, n_users + 3))
        got = top_k_neighbors(index, target, k).neighbors
        full = _brute_force(matrix, target)
        expected = full[:k]
        assert len(got) == min(k, n_users - 1)
        for n, (user, sim) in zip(got, expected):
            assert abs(n.similarity - sim) <= 1e-9
            if n.user != user:
                # only users with equal similarity may swap places
                assert abs(n.similarity - dict(full)[n.user]) <= 1e-9


def test_sparse_and_dense_similarities_agree():
    rng = np.random.default_rng(5)
    matrix = random_matrix(rng, 60, 40)
    index = SimilarityIndex(matrix)
    for target in (0, 17, 59):
        np.testing.assert_allclose(index.similarities(target),
                                   dense_similarities(matrix, target),
                                   atol=1e-12)


def test_neighbor_cache_round_trip(tmp_path):
    rankings = {3: [Neighbor(1, 0.5), Neighbor(0, 0.25)], 0: []}
    path = str(tmp_path / 'neighbors.tsv')
    write_neighbor_cache(path, rankings)
    assert read_neighbor_cache(path) == rankings


def _context(sizes):
    neighbors = [Neighbor(u + 1, 1.0 / (u + 1)) for u in range(len(sizes))]
    ratings = [[(i, 1 + i % 5) for i in range(n)] for n in sizes]
    return NeighborContext(0, neighbors, ratings)


def test_sample_full_fraction_returns_everything():
    context = _context([12])
    sampled = sample_neighbor_ratings(context, 1.0, seed=3)
    assert sampled.sampled_ratings == context.neighbor_ratings
    assert sampled.fraction == 1.0


def test_sample_size_is_ceiling():
    sampled = sample_neighbor_ratings(_context([8, 3, 1]), 0.25, seed=3)
    assert [len(s) for s in sampled.sampled_ratings] == [2, 1, 1]


def test_sample_is_deterministic_and_sorted():
    context = _context([30, 17])
    a = sample_neighbor_ratings(context, 0.5, seed=11)
    b = sample_neighbor_ratings(context, 0.5, seed=11)
    assert a == b
    for sampled in a.sampled_ratings:
        assert list(sampled) == sorted(sampled)


def test_sample_is_independent_of_neighbor_order():
    context = _context([30, 17])
    reversed_context = NeighborContext(
        0, context.neighbors[::-1], context.neighbor_ratings[::-1])
    a = sample_neighbor_ratings(context, 0.5, seed=11)
    b = sample_neighbor_ratings(reversed_context, 0.5, seed=11)
    assert a.sampled_ratings == b.sampled_ratings[::-1]


def test_samples_are_nested():
    context = _context([40, 25, 9])
    smaller = sample_neighbor_ratings(context, 0.5, seed=2)
    larger = sample_neighbor_ratings(context, 0.75, seed=2)
    for s, l in zip(smaller.sampled_ratings, larger.sampled_ratings):
        assert set(s) <= set(l)


def test_sample_rejects_bad_fraction():
    for fraction in (0, -0.5, 1.5):
        with pytest.raises(RetrievalError):
            sample_neighbor_ratings(_context([4]), fraction, seed=0)


def test_sample_filter_then_sample():
    context = _context([10])
    sampled = sample_neighbor_ratings(context, 0.5, seed=0,
                                      exclude_items={0, 1, 2, 3})
    assert len(sampled.sampled_ratings[0]) == 3
    assert all(item >= 4 for item, _ in sampled.sampled_ratings[0])


def test_truncate_keeps_prefix():
    sampled = sample_neighbor_ratings(_context([4, 5, 6]), 1.0, seed=0)
    short = sampled.truncate(2)
    assert short.neighbors == sampled.neighbors[:2]
    assert short.sampled_ratings == sampled.sampled_ratings[:2]


def test_popularity_stats():
    matrix = matrix_from_rows([(5, 0, 0), (3, 0, 4), (0, 0, 2)])
    stats = popularity_stats(matrix)
    assert stats.count(0) == 2
    assert stats.avg_rating(0) == 4.0
    assert stats.count(1) == 0
    assert stats.avg_rating(1) is None
    assert stats.counts.sum() == len(matrix)
    assert stats.most_rated(n=3) == [0, 2, 1]
    assert stats.most_rated(exclude={0}, n=2) == [2, 1]
