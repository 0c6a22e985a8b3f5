"""Neighbor context and per-neighbor sampling of rating sets."""
import logging

import numpy as np

import ragrec.util as util
from ragrec.retrieval.similarity import Neighbor, RetrievalError

logger = logging.getLogger(__name__)

SAMPLE_ORDERS = ('sample_then_filter', 'filter_then_sample')


class NeighborContext:
    """Retrieved collaborative context of one *target* user.

    *neighbors* is the ordered tuple of :class:`Neighbor`; *neighbor_ratings*
    holds each neighbor's known ``(item, rating)`` pairs in item order.
    After :func:`sample_neighbor_ratings`, *sampled_ratings* holds the
    sampled pairs (item order) and *fraction* the fraction used; before,
    both are ``None``.

    """
    def __init__(self, target, neighbors, neighbor_ratings,
                 sampled_ratings=None, fraction=None):
        self._target = target
        self._neighbors = tuple(Neighbor(*n) for n in neighbors)
        self._neighbor_ratings = tuple(tuple(r) for r in neighbor_ratings)
        self._sampled = None if sampled_ratings is None else \
            tuple(tuple(s) for s in sampled_ratings)
        self._fraction = fraction
        assert len(self._neighbors) == len(self._neighbor_ratings)
        assert target not in {n.user for n in self._neighbors}

    @classmethod
    def from_neighbors(cls, known, target, neighbors):
        """Build a context for *target* from a list of :class:`Neighbor`,
        looking up their ratings in the *known* matrix."""
        by_user = known.by_user()
        ratings = [[(r.item, r.rating) for r in by_user[n.user]]
                   for n in neighbors]
        return cls(target, neighbors, ratings)

    def __eq__(self, other):
        return (
            self._target == other.target and
            self._neighbors == other.neighbors and
            self._neighbor_ratings == other.neighbor_ratings and
            self._sampled == other.sampled_ratings and
            self._fraction == other.fraction
        )

    @property
    def target(self):
        return self._target

    @property
    def neighbors(self):
        return self._neighbors

    @property
    def neighbor_ratings(self):
        return self._neighbor_ratings

    @property
    def sampled_ratings(self):
        return self._sampled

    @property
    def fraction(self):
        return self._fraction

    @property
    def is_sampled(self):
        return self._sampled is not None

    def truncate(self, k):
        """The context restricted to the first *k* neighbors."""
        return self.__class__(self._target, self._neighbors[:k],
                              self._neighbor_ratings[:k],
                              None if self._sampled is None
                              else self._sampled[:k], self._fraction)


def sample_neighbor_ratings(context, fraction, seed, exclude_items=None):
    """Sample ``ceil(fraction * |R_u|)`` ratings of every neighbor *u*.

    Every *(target, neighbor)* pair gets its own generator seeded from
    *seed*, so the result does not depend on the order neighbors are
    processed in.  The generator draws a permutation of the neighbor's
    ratings and the sample is its prefix, which makes samples nested: for
    a fixed seed the sample at a smaller fraction is a subset of the sample
    at a larger one.  Samples are returned in item order.

    :param exclude_items: Items removed from every rating set before
                          sampling (filter-then-sample order).

    """
    if not 0 < fraction <= 1:
        raise RetrievalError('fraction must be in (0, 1], got %s' %
                             (fraction,))
    sampled = []
    for neighbor, ratings in zip(context.neighbors,
                                 context.neighbor_ratings):
        if exclude_items:
            ratings = [p for p in ratings if p[0] not in exclude_items]
        size = util.ceil_fraction(fraction, len(ratings))
        if size == len(ratings):
            sampled.append(list(ratings))
            continue
        rng = np.random.default_rng(
            util.stable_seed(seed, 'sample', context.target, neighbor.user))
        chosen = sorted(rng.permutation(len(ratings))[:size].tolist())
        sampled.append([ratings[i] for i in chosen])
    return NeighborContext(context.target, context.neighbors,
                           context.neighbor_ratings, sampled, fraction)
