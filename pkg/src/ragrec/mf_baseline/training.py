"""SGD training of :class:`~ragrec.mf_baseline.model.MFModel` and a small
configuration grid runner."""
import logging
import math
from collections import namedtuple
from concurrent.futures import ProcessPoolExecutor

import numpy as np

import ragrec.util as util
from ragrec.mf_baseline.model import MFError, MFModel, recommend_top10
from ragrec.metrics.scoring import hit_at_10, ndcg_at_10

logger = logging.getLogger(__name__)

MFConfig = namedtuple(
    'MFConfig',
    'd, learning_rate, l2, epochs, patience, min_epochs, '
    'validation_fraction, batch_size, init_std, seed, shuffle_seed')
# batch_size 1 is plain SGD, 0 a full batch per epoch
MFConfig.__new__.__defaults__ = (32, 0.01, 0.05, 200, 20, 50, 0.1, 1, 0.1, 0,
                                 None)

TrainResult = namedtuple('TrainResult', 'model, history, best_epoch')
GridResult = namedtuple('GridResult', 'config, ndcg, hit, model')

GRID_DIMENSIONS = (10, 20, 50, 100)
GRID_BATCH_SIZES = (8, 16, 32, 64, 128, 256)

# Window over which the training loss must not increase (beyond the
# relative tolerance of SGD noise on a plateau)
LOSS_WINDOW = 50
LOSS_TOLERANCE = 0.01
# Loss growth (relative to its minimum) treated as divergence
DIVERGENCE_FACTOR = 10.0


class MFDivergenceError(MFError):
    def __init__(self, epoch, loss):
        super().__init__('MF training diverged at epoch %d (loss %r)' %
                         (epoch, loss))
        self.epoch = epoch
        self.loss = loss


class _Params:
    """Mutable parameter arrays used while training."""
    def __init__(self, n_users, n_items, d, init_std, global_mean, rng):
        self.P = rng.normal(0.0, init_std, size=(n_users, d))
        self.Q = rng.normal(0.0, init_std, size=(n_items, d))
        self.bu = np.zeros(n_users)
        self.bi = np.zeros(n_items)
        self.global_mean = global_mean

    def predict(self, users, items):
        return (self.global_mean + self.bu[users] + self.bi[items] +
                np.einsum('ij,ij->i', self.P[users], self.Q[items]))

    def snapshot(self):
        return MFModel(self.P, self.Q, self.bu, self.bi, self.global_mean)


def loss(model, users, items, ratings, l2):
    """Regularized squared error
    ``1/2 * sum((r - pred)^2 + l2 * (|p_u|^2 + |q_i|^2 + b_u^2 + b_i^2))``
    over the given entries."""
    users, items = np.asarray(users), np.asarray(items)
    err = np.asarray(ratings, dtype=np.float64) - _predict(model, users,
                                                           items)
    reg = (np.sum(model.user_factors[users] ** 2, axis=1) +
           np.sum(model.item_factors[items] ** 2, axis=1) +
           model.user_bias[users] ** 2 + model.item_bias[items] ** 2)
    return 0.5 * float(np.sum(err ** 2 + l2 * reg))


def gradients(model, users, items, ratings, l2):
    """Analytic gradient of :func:`loss` as a dict with the keys
    ``user_factors``, ``item_factors``, ``user_bias`` and ``item_bias``."""
    users, items = np.asarray(users), np.asarray(items)
    err = np.asarray(ratings, dtype=np.float64) - _predict(model, users,
                                                           items)
    P, Q = model.user_factors, model.item_factors
    grads = {
        'user_factors': np.zeros_like(P),
        'item_factors': np.zeros_like(Q),
        'user_bias': np.zeros_like(model.user_bias),
        'item_bias': np.zeros_like(model.item_bias),
    }
    np.add.at(grads['user_factors'], users,
              -err[:, None] * Q[items] + l2 * P[users])
    np.add.at(grads['item_factors'], items,
              -err[:, None] * P[users] + l2 * Q[items])
    np.add.at(grads['user_bias'], users, -err + l2 * model.user_bias[users])
    np.add.at(grads['item_bias'], items, -err + l2 * model.item_bias[items])
    return grads


def _predict(model, users, items):
    return (model.global_mean + model.user_bias[users] +
            model.item_bias[items] +
            np.einsum('ij,ij->i', model.user_factors[users],
                      model.item_factors[items]))


def rmse(model, users, items, ratings):
    err = np.asarray(ratings, dtype=np.float64) - _predict(
        model, np.asarray(users), np.asarray(items))
    return math.sqrt(float(np.mean(err ** 2)))


def _sgd_epoch(params, users, items, ratings, order, lr, l2):
    P, Q, bu, bi = params.P, params.Q, params.bu, params.bi
    gm = params.global_mean
    for u, i, r in zip(users[order].tolist(), items[order].tolist(),
                       ratings[order].tolist()):
        pu, qi = P[u], Q[i]
        err = r - (gm + bu[u] + bi[i] + pu.dot(qi))
        bu[u] += lr * (err - l2 * bu[u])
        bi[i] += lr * (err - l2 * bi[i])
        pu_old = pu.copy()
        P[u] += lr * (err * qi - l2 * pu)
        Q[i] += lr * (err * pu_old - l2 * qi)


def _minibatch_epoch(params, users, items, ratings, order, lr, l2,
                     batch_size):
    for start in range(0, len(order), batch_size):
        batch = order[start:start + batch_size]
        u, i = users[batch], items[batch]
        err = ratings[batch] - params.predict(u, i)
        grad_p = -err[:, None] * params.Q[i] + l2 * params.P[u]
        grad_q = -err[:, None] * params.P[u] + l2 * params.Q[i]
        grad_bu = -err + l2 * params.bu[u]
        grad_bi = -err + l2 * params.bi[i]
        np.subtract.at(params.P, u, lr * grad_p)
        np.subtract.at(params.Q, i, lr * grad_q)
        np.subtract.at(params.bu, u, lr * grad_bu)
        np.subtract.at(params.bi, i, lr * grad_bi)


def fit(users, items, ratings, n_users, n_items, config=MFConfig()):
    """Train an :class:`MFModel` on the given entries with SGD.

    The entry order is shuffled every epoch.  With a positive
    *validation_fraction* that share of the entries is held out, training
    stops once the validation RMSE has not improved for *patience* epochs
    (counted from *min_epochs* on) and the best model seen is returned.
    A *batch_size* of 0 takes one gradient step over all entries per
    epoch.

    :raises MFDivergenceError: if the training loss becomes non-finite,
        grows to ``DIVERGENCE_FACTOR`` times its minimum, or is higher
        than ``LOSS_WINDOW`` epochs earlier (by more than
        ``LOSS_TOLERANCE``).

    """
    if config.d < 1:
        raise MFError('latent dimension d must be >= 1, got %s' % config.d)
    if config.batch_size < 0:
        raise MFError('batch_size must be >= 0, got %s' % config.batch_size)
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    ratings = np.asarray(ratings, dtype=np.float64)
    if len(ratings) == 0:
        raise MFError('no training ratings')

    init_rng = np.random.default_rng(config.seed)
    shuffle_seed = config.seed if config.shuffle_seed is None \
        else config.shuffle_seed
    shuffle_rng = np.random.default_rng(
        util.stable_seed(shuffle_seed, 'shuffle'))

    n_val = int(len(ratings) * config.validation_fraction)
    if n_val > 0:
        perm = np.random.default_rng(
            util.stable_seed(config.seed, 'validation')).permutation(
                len(ratings))
        val, train_idx = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    else:
        val, train_idx = None, np.arange(len(ratings))

    t_users, t_items, t_ratings = users[train_idx], items[train_idx], \
        ratings[train_idx]
    params = _Params(n_users, n_items, config.d, config.init_std,
                     float(np.mean(t_ratings)), init_rng)

    history = []
    best_model, best_epoch, best_val = None, 0, math.inf
    min_loss = math.inf
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(t_ratings))
        if config.batch_size == 1:
            _sgd_epoch(params, t_users, t_items, t_ratings, order,
                       config.learning_rate, config.l2)
        else:
            _minibatch_epoch(params, t_users, t_items, t_ratings, order,
                             config.learning_rate, config.l2,
                             config.batch_size or len(t_ratings))
        model = params.snapshot()
        train_loss = loss(model, t_users, t_items, t_ratings, config.l2)
        _check_divergence(epoch, train_loss, min_loss, history)
        min_loss = min(min_loss, train_loss)
        history.append(train_loss)

        if val is None:
            best_model, best_epoch = model, epoch
            continue
        val_rmse = rmse(model, users[val], items[val], ratings[val])
        logger.debug('epoch %d: loss %.6f, validation RMSE %.6f', epoch,
                     train_loss, val_rmse)
        if val_rmse < best_val:
            best_model, best_epoch, best_val = model, epoch, val_rmse
        elif epoch >= config.min_epochs and \
                epoch - best_epoch >= config.patience:
            logger.info('Early stop at epoch %d (best epoch %d, RMSE %.4f)',
                        epoch, best_epoch, best_val)
            break

    return TrainResult(best_model, history, best_epoch)


def _check_divergence(epoch, train_loss, min_loss, history):
    if not math.isfinite(train_loss) or (
            math.isfinite(min_loss) and
            train_loss > DIVERGENCE_FACTOR * min_loss):
        raise MFDivergenceError(epoch, train_loss)
    if len(history) >= LOSS_WINDOW and \
            train_loss > history[-LOSS_WINDOW] * (1.0 + LOSS_TOLERANCE):
        raise MFDivergenceError(epoch, train_loss)


def train(matrix, config=MFConfig()):
    """Train an :class:`MFModel` on the ratings of *matrix* (pass the known
    ratings only) and return it."""
    result = fit(matrix.users, matrix.items, matrix.ratings, matrix.n_users,
                 matrix.n_items, config)
    logger.info('Trained MF (d=%d) for %d epochs, best epoch %d',
                config.d, len(result.history), result.best_epoch)
    return result.model


def evaluate(model, splits, users, n=10):
    """Mean NDCG@10 and Hit@10 of *model* over *users* with masked
    ratings."""
    ndcgs, hits = [], []
    for user in users:
        split = splits[user]
        if not split.masked:
            continue
        recommended = recommend_top10(model, user, split.known_items, n).items
        ndcgs.append(ndcg_at_10(recommended, split.masked_items))
        hits.append(hit_at_10(recommended, split.masked_items))
    if not ndcgs:
        return 0.0, 0.0
    return math.fsum(ndcgs) / len(ndcgs), math.fsum(hits) / len(hits)


def grid_configs(base=MFConfig(), dimensions=GRID_DIMENSIONS,
                 batch_sizes=GRID_BATCH_SIZES):
    return [base._replace(d=d, batch_size=b)
            for d in dimensions for b in batch_sizes]


def _train_and_evaluate(args):
    known, splits, users, config = args
    model = train(known, config)
    ndcg, hit = evaluate(model, splits, users)
    return GridResult(config, ndcg, hit, model)


def grid_search(known, splits, users, configs, workers=1):
    """Train one model per config and rank them by mean NDCG@10 over
    *users* (ties by hit rate, then by config order).

    Models are independent, so with ``workers > 1`` they are trained in a
    process pool.

    """
    jobs = [(known, splits, users, c) for c in configs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_train_and_evaluate, jobs))
    else:
        results = [_train_and_evaluate(job) for job in jobs]
    for r in results:
        logger.info('MF grid d=%d batch=%d: NDCG %.4f, Hit@10 %.4f',
                    r.config.d, r.config.batch_size, r.ndcg, r.hit)
    order = sorted(range(len(results)),
                   key=lambda j: (-results[j].ndcg, -results[j].hit, j))
    return [results[j] for j in order]


def write_grid_results(path, results):
    """Write ranked :class:`GridResult` rows as CSV."""
    with open(path, 'w', newline='\n') as f:
        f.write('rank,d,batch_size,learning_rate,l2,ndcg,hit\n')
        for rank, r in enumerate(results, 1):
            f.write('%d,%d,%d,%g,%g,%.6f,%.6f\n' %
                    (rank, r.config.d, r.config.batch_size,
                     r.config.learning_rate, r.config.l2, r.ndcg, r.hit))
