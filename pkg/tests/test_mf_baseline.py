import numpy as np
import pytest

from ragrec.ingest import Rating, RatingMatrix, UserSplit
from ragrec.mf_baseline import (MFConfig, MFDivergenceError, MFError,
                                MFModel, fit, gradients, grid_configs,
                                grid_search, load_checkpoint, loss, predict,
                                recommend_top10, rmse, save_checkpoint,
                                train, write_grid_results)


def rank3_problem(n_users=50, n_items=40, density=0.3, seed=0):
    rng = np.random.default_rng(seed)
    P = rng.normal(0.0, 0.6, size=(n_users, 3))
    Q = rng.normal(0.0, 0.6, size=(n_items, 3))
    truth = np.clip(3.0 + P @ Q.T, 1.0, 5.0)
    observed = rng.random((n_users, n_items)) < density
    users, items = np.nonzero(observed)
    return users, items, truth[users, items], truth


def test_rank3_ground_truth_is_recovered():
    config = MFConfig(d=8, learning_rate=0.03, l2=0.0, epochs=2000,
                      validation_fraction=0.0, batch_size=0, init_std=1e-4,
                      seed=3)
    # pooled over five draws; held out is every unobserved cell, scored
    # against the generating model
    squared, n_cells = 0.0, 0
    for seed in range(5):
        users, items, ratings, truth = rank3_problem(seed=seed)
        model = fit(users, items, ratings, 50, 40, config).model
        observed = np.zeros(truth.shape, dtype=bool)
        observed[users, items] = True
        test_users, test_items = np.nonzero(~observed)
        squared += rmse(model, test_users, test_items,
                        truth[test_users, test_items]) ** 2 * len(test_users)
        n_cells += len(test_users)
    assert np.sqrt(squared / n_cells) <= 0.15


def test_constant_matrix():
    users = np.repeat(np.arange(6), 4)
    items = np.tile(np.arange(4), 6)
    held_out = users == items
    ratings = np.full(len(users), 3.0)
    config = MFConfig(d=1, epochs=40, learning_rate=0.05, init_std=0.01,
                      validation_fraction=0.0, seed=0)
    model = fit(users[~held_out], items[~held_out], ratings[~held_out], 6, 4,
                config).model
    assert model.global_mean == 3.0
    assert rmse(model, users[held_out], items[held_out],
                ratings[held_out]) < 0.01


def test_training_is_deterministic():
    users, items, ratings, _ = rank3_problem(20, 15, seed=4)
    config = MFConfig(d=4, epochs=15, seed=9)
    a = fit(users, items, ratings, 20, 15, config)
    b = fit(users, items, ratings, 20, 15, config)
    assert a.model == b.model
    assert a.history == b.history


def test_minibatch_training():
    users, items, ratings, _ = rank3_problem(20, 15, seed=4)
    config = MFConfig(d=4, epochs=30, batch_size=16, learning_rate=0.05,
                      validation_fraction=0.0, seed=9)
    result = fit(users, items, ratings, 20, 15, config)
    assert result.model.is_finite()
    assert result.history[-1] < result.history[0]


def test_full_batch_training():
    users, items, ratings, _ = rank3_problem(20, 15, seed=4)
    config = MFConfig(d=4, epochs=100, batch_size=0, learning_rate=0.03,
                      validation_fraction=0.0, seed=9)
    result = fit(users, items, ratings, 20, 15, config)
    assert result.model.is_finite()
    assert len(result.history) == 100
    assert all(b <= a for a, b in zip(result.history, result.history[1:]))


def test_patience_waits_for_min_epochs():
    users, items, ratings, _ = rank3_problem(20, 15, seed=4)
    config = MFConfig(d=4, epochs=60, patience=1, min_epochs=30,
                      learning_rate=0.001, l2=5.0, seed=9)
    result = fit(users, items, ratings, 20, 15, config)
    assert len(result.history) >= 30
    assert result.best_epoch <= len(result.history)


def test_divergence_names_epoch():
    users, items, ratings, _ = rank3_problem(20, 15, seed=4)
    config = MFConfig(d=4, epochs=20, learning_rate=50.0,
                      validation_fraction=0.0, seed=0)
    with pytest.raises(MFDivergenceError) as excinfo:
        fit(users, items, ratings, 20, 15, config)
    assert excinfo.value.epoch >= 1
    assert 'epoch %d' % excinfo.value.epoch in str(excinfo.value)


def test_invalid_config():
    with pytest.raises(MFError):
        fit([0], [0], [3], 1, 1, MFConfig(d=0))
    with pytest.raises(MFError):
        fit([0], [0], [3], 1, 1, MFConfig(batch_size=-1))
    with pytest.raises(MFError):
        fit([], [], [], 1, 1, MFConfig())


def _flat(model):
    return np.concatenate([model.user_factors.ravel(),
                           model.item_factors.ravel(), model.user_bias,
                           model.item_bias])


def _unflat(vector, like):
    n_users, n_items, d = like.n_users, like.n_items, like.d
    pos = 0
    P = vector[pos:pos + n_users * d].reshape(n_users, d)
    pos += n_users * d
    Q = vector[pos:pos + n_items * d].reshape(n_items, d)
    pos += n_items * d
    bu = vector[pos:pos + n_users]
    bi = vector[pos + n_users:]
    return MFModel(P, Q, bu, bi, like.global_mean)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(8)
    model = MFModel(rng.normal(size=(5, 2)), rng.normal(size=(4, 2)),
                    rng.normal(size=5), rng.normal(size=4), 3.2)
    users, items = np.nonzero(rng.random((5, 4)) < 0.7)
    ratings = rng.integers(1, 6, size=len(users)).astype(float)
    l2 = 0.1

    grads = gradients(model, users, items, ratings, l2)
    analytic = np.concatenate([grads['user_factors'].ravel(),
                               grads['item_factors'].ravel(),
                               grads['user_bias'], grads['item_bias']])
    theta = _flat(model)
    eps = 1e-6
    numeric = np.zeros_like(theta)
    for j in range(len(theta)):
        up, down = theta.copy(), theta.copy()
        up[j] += eps
        down[j] -= eps
        numeric[j] = (loss(_unflat(up, model), users, items, ratings, l2) -
                      loss(_unflat(down, model), users, items, ratings,
                           l2)) / (2 * eps)
    scale = np.maximum(np.abs(numeric), 1.0)
    assert np.max(np.abs(analytic - numeric) / scale) < 1e-5


def test_predict_examples():
    zero = MFModel(np.zeros((2, 2)), np.zeros((3, 2)), np.zeros(2),
                   np.zeros(3), 3.4)
    assert all(predict(zero, u, i) == 3.4 for u in range(2)
               for i in range(3))

    model = MFModel([[1.0, 0.0]], [[2.0, 0.0]], [0.0], [0.0], 0.0)
    assert predict(model, 0, 0) == 2.0

    model = MFModel([[1.0, 2.0], [0.5, -1.0]], [[3.0, 1.0], [0.0, 2.0]],
                    [0.1, -0.2], [0.3, 0.4], 3.0)
    assert predict(model, 1, 0) == pytest.approx(
        3.0 - 0.2 + 0.3 + (0.5 * 3.0 - 1.0 * 1.0))
    assert predict(model, 0, 1) == pytest.approx(3.0 + 0.1 + 0.4 + 4.0)


def test_predict_out_of_range():
    model = MFModel([[1.0]], [[1.0]], [0.0], [0.0], 0.0)
    with pytest.raises(MFError):
        predict(model, 1, 0)
    with pytest.raises(MFError):
        predict(model, 0, 2)


def _scored_model(scores):
    n = len(scores)
    return MFModel([[1.0]], np.asarray(scores, dtype=float).reshape(n, 1),
                   [0.0], np.zeros(n), 0.0)


def test_recommend_forced_candidates():
    scores = np.arange(20, dtype=float)
    model = _scored_model(scores)
    rec = recommend_top10(model, 0, known_items=range(10))
    assert rec.items == list(range(19, 9, -1))
    assert not rec.short


def test_recommend_ties_by_item_id():
    model = _scored_model([1.0, 5.0, 5.0, 2.0] + [0.0] * 10)
    rec = recommend_top10(model, 0, known_items=set())
    assert rec.items[:4] == [1, 2, 3, 0]


def test_recommend_short():
    model = _scored_model([1.0, 2.0, 3.0])
    rec = recommend_top10(model, 0, known_items={1})
    assert rec.items == [2, 0]
    assert rec.short


def test_recommend_matches_argsort_oracle():
    rng = np.random.default_rng(12)
    for _ in range(50):
        n_items = int(rng.integers(12, 60))
        scores = np.round(rng.normal(size=n_items), 1)
        known = set(rng.choice(n_items, size=int(rng.integers(0, 5)),
                               replace=False).tolist())
        rec = recommend_top10(_scored_model(scores), 0, known)
        unseen = [i for i in range(n_items) if i not in known]
        oracle = sorted(unseen, key=lambda i: (-scores[i], i))[:10]
        assert rec.items == oracle


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    model = MFModel(rng.normal(size=(3, 2)), rng.normal(size=(4, 2)),
                    rng.normal(size=3), rng.normal(size=4), 3.5)
    path = str(tmp_path / 'mf.ckpt')
    save_checkpoint(model, path)
    assert load_checkpoint(path) == model
    with open(path, 'rb') as f:
        assert len(f.read()) == 24 + 8 * (1 + 3 * 3 + 4 * 3)


def test_corrupt_checkpoint(tmp_path):
    path = tmp_path / 'mf.ckpt'
    path.write_bytes(np.array([2, 3, 4], dtype='<i8').tobytes() +
                     np.zeros(5, dtype='<f8').tobytes())
    with pytest.raises(MFError):
        load_checkpoint(str(path))


def _toy_known():
    users, items, ratings, _ = rank3_problem(12, 20, density=0.5, seed=5)
    ratings = np.rint(ratings).astype(int)
    matrix = RatingMatrix(users, items, ratings, range(len(users)), 12, 20)
    splits = {}
    for u in range(12):
        own = [(int(i), int(r)) for uu, i, r in zip(users, items, ratings)
               if uu == u]
        masked = frozenset(Rating(i, r, 0) for i, r in own[:2])
        known = frozenset(Rating(i, r, 0) for i, r in own[2:])
        splits[u] = UserSplit(u, known, masked)
    keep = [(i, r) not in {(m.item, m.rating)
                           for m in splits[u].masked}
            for u, i, r in zip(users.tolist(), items.tolist(),
                               ratings.tolist())]
    return matrix.subset(np.array(keep)), splits


def test_train_on_matrix():
    known, _ = _toy_known()
    model = train(known, MFConfig(d=3, epochs=10, seed=1))
    assert model.n_users == 12
    assert model.n_items == 20
    assert model.d == 3


def test_grid_search_ranks_by_ndcg(tmp_path):
    known, splits = _toy_known()
    configs = grid_configs(MFConfig(epochs=8, seed=1), dimensions=(2, 4),
                           batch_sizes=(1, 8))
    assert [(c.d, c.batch_size) for c in configs] == \
        [(2, 1), (2, 8), (4, 1), (4, 8)]
    results = grid_search(known, splits, range(12), configs)
    assert len(results) == 4
    keys = [(-r.ndcg, -r.hit) for r in results]
    assert keys == sorted(keys)
    path = tmp_path / 'grid.csv'
    write_grid_results(str(path), results)
    lines = path.read_text().splitlines()
    assert lines[0] == 'rank,d,batch_size,learning_rate,l2,ndcg,hit'
    assert len(lines) == 5
    assert lines[1].startswith('1,')


def test_default_grid():
    configs = grid_configs(MFConfig(seed=1))
    assert len(configs) == 4 * 6
    assert sorted({c.d for c in configs}) == [10, 20, 50, 100]
    assert sorted({c.batch_size for c in configs}) == [8, 16, 32, 64, 128,
                                                       256]
    assert all(c.seed == 1 for c in configs)
