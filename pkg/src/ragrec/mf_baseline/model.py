"""Biased matrix-factorization model, scoring and checkpoint files."""
import logging
from collections import namedtuple

import numpy as np

logger = logging.getLogger(__name__)

TOP_N = 10

Recommendation = namedtuple('Recommendation', 'items, short')


class MFError(ValueError):
    pass


class MFModel:
    """Immutable biased MF model.

    ``prediction(u, i) = global_mean + user_bias[u] + item_bias[i]
    + user_factors[u] . item_factors[i]``

    """
    def __init__(self, user_factors, item_factors, user_bias, item_bias,
                 global_mean):
        self._user_factors = np.array(user_factors, dtype=np.float64)
        self._item_factors = np.array(item_factors, dtype=np.float64)
        self._user_bias = np.array(user_bias, dtype=np.float64)
        self._item_bias = np.array(item_bias, dtype=np.float64)
        self._global_mean = float(global_mean)
        for arr in (self._user_factors, self._item_factors,
                    self._user_bias, self._item_bias):
            arr.setflags(write=False)
        assert self._user_factors.shape[1] == self._item_factors.shape[1]
        assert len(self._user_bias) == len(self._user_factors)
        assert len(self._item_bias) == len(self._item_factors)

    def __eq__(self, other):
        return (
            self._global_mean == other.global_mean and
            np.array_equal(self._user_factors, other.user_factors) and
            np.array_equal(self._item_factors, other.item_factors) and
            np.array_equal(self._user_bias, other.user_bias) and
            np.array_equal(self._item_bias, other.item_bias)
        )

    @property
    def d(self):
        return self._user_factors.shape[1]

    @property
    def n_users(self):
        return self._user_factors.shape[0]

    @property
    def n_items(self):
        return self._item_factors.shape[0]

    @property
    def user_factors(self):
        return self._user_factors

    @property
    def item_factors(self):
        return self._item_factors

    @property
    def user_bias(self):
        return self._user_bias

    @property
    def item_bias(self):
        return self._item_bias

    @property
    def global_mean(self):
        return self._global_mean

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in (
            self._user_factors, self._item_factors, self._user_bias,
            self._item_bias)) and np.isfinite(self._global_mean)

    def scores(self, user):
        """Unclipped predictions of *user* for every item."""
        self._check_user(user)
        return (self._global_mean + self._user_bias[user] + self._item_bias +
                self._item_factors @ self._user_factors[user])

    def _check_user(self, user):
        if not 0 <= user < self.n_users:
            raise MFError('user %s out of range [0, %d)' %
                          (user, self.n_users))


def predict(model, user, item):
    """Unclipped bilinear prediction of *model* for *(user, item)*."""
    model._check_user(user)
    if not 0 <= item < model.n_items:
        raise MFError('item %s out of range [0, %d)' % (item, model.n_items))
    return float(model.global_mean + model.user_bias[user] +
                 model.item_bias[item] +
                 model.user_factors[user].dot(model.item_factors[item]))


def recommend_top10(model, user, known_items, n=TOP_N):
    """The *n* unseen items with the highest predicted rating, ties by item
    id.  If fewer than *n* unseen items exist, all of them are returned and
    the result is flagged *short*."""
    scores = model.scores(user)
    items = np.arange(model.n_items)
    order = np.lexsort((items, -scores))
    known = set(known_items)
    ranked = [int(i) for i in order if int(i) not in known][:n]
    return Recommendation(ranked, len(ranked) < n)


def save_checkpoint(model, path):
    """Write *model* as a header of ``d, n_users, n_items`` (little-endian
    int64) and ``global_mean`` (little-endian float64), followed by the
    row-major user factors, item factors, user biases and item biases as
    little-endian float64."""
    with open(path, 'wb') as f:
        f.write(np.array([model.d, model.n_users, model.n_items],
                         dtype='<i8').tobytes())
        f.write(np.array([model.global_mean], dtype='<f8').tobytes())
        for arr in (model.user_factors, model.item_factors,
                    model.user_bias, model.item_bias):
            f.write(np.ascontiguousarray(arr, dtype='<f8').tobytes())
    logger.debug('Saved MF checkpoint to %s', path)


def load_checkpoint(path):
    with open(path, 'rb') as f:
        raw = f.read()
    d, n_users, n_items = np.frombuffer(raw, dtype='<i8', count=3).tolist()
    values = np.frombuffer(raw, dtype='<f8', offset=24)
    expected = 1 + (n_users + n_items) * (d + 1)
    if len(values) != expected:
        raise MFError('corrupt checkpoint %s: %d values, expected %d' %
                      (path, len(values), expected))
    global_mean = values[0]
    pos = 1
    user_factors = values[pos:pos + n_users * d].reshape(n_users, d)
    pos += n_users * d
    item_factors = values[pos:pos + n_items * d].reshape(n_items, d)
    pos += n_items * d
    user_bias = values[pos:pos + n_users]
    item_bias = values[pos + n_users:]
    return MFModel(user_factors, item_factors, user_bias, item_bias,
                   global_mean)
