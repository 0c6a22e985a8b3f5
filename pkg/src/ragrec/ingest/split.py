"""Known / masked split of every user's rating history."""
import logging
from collections import namedtuple

import numpy as np

import ragrec.util as util
from ragrec.ingest.ratings import Rating

logger = logging.getLogger(__name__)

MASK_MODES = ('random', 'latest')
DEFAULT_MASK_FRACTION = 0.2


class SplitError(ValueError):
    pass


class UserSplit(namedtuple('UserSplit', 'user_id, known, masked')):
    """Partition of one user's ratings into *known* and *masked* frozensets
    of :class:`~ragrec.ingest.ratings.Rating` tuples."""
    __slots__ = ()

    @property
    def known_items(self):
        return frozenset(r.item for r in self.known)

    @property
    def masked_items(self):
        return frozenset(r.item for r in self.masked)

    @property
    def total(self):
        return len(self.known) + len(self.masked)


SplitDataset = namedtuple('SplitDataset', 'matrix, known, splits')
SplitDataset.__doc__ = """The full *matrix*, the *known* matrix restricted to
unmasked ratings and a dict *splits* mapping user index to
:class:`UserSplit`."""


def mask_count(n, mask_fraction=DEFAULT_MASK_FRACTION):
    """Number of ratings to mask out of *n*: ``max(1, round(f * n))`` with
    halves rounded up."""
    return max(1, util.round_fraction(mask_fraction, n))


def split_user(user_id, ratings, seed, mask_fraction=DEFAULT_MASK_FRACTION,
               mask_mode='random'):
    """Split the *ratings* of *user_id* into known and masked ratings.

    Ratings are first put in chronological order (ties by item id).  In
    ``random`` mode a uniform random subset of :func:`mask_count` ratings
    is drawn with a generator seeded by *seed*; in ``latest`` mode the most
    recent ones are masked.  The split only depends on items and
    timestamps, never on the rating values.

    """
    if mask_mode not in MASK_MODES:
        raise SplitError('unknown mask_mode %r' % (mask_mode,))
    if len(ratings) < 2:
        raise SplitError('user %s needs at least 2 ratings to be split, '
                         'has %d' % (user_id, len(ratings)))
    ordered = sorted((Rating(*r) for r in ratings),
                     key=lambda r: (r.timestamp, r.item))
    # known must keep at least one rating
    n_masked = min(mask_count(len(ordered), mask_fraction), len(ordered) - 1)

    if mask_mode == 'latest':
        masked_idx = set(range(len(ordered) - n_masked, len(ordered)))
    else:
        rng = np.random.default_rng(seed)
        masked_idx = set(rng.choice(len(ordered), size=n_masked,
                                    replace=False).tolist())

    known = frozenset(r for i, r in enumerate(ordered) if i not in masked_idx)
    masked = frozenset(r for i, r in enumerate(ordered) if i in masked_idx)
    return UserSplit(user_id, known, masked)


def split_dataset(matrix, seed, mask_fraction=DEFAULT_MASK_FRACTION,
                  mask_mode='random'):
    """Split every user of *matrix* and return a :class:`SplitDataset`.

    Each user gets its own seed derived from *seed* and the user index,
    so a user's split does not depend on the other users.  Users with a
    single rating cannot be evaluated; they are kept as known-only.

    """
    splits = {}
    for user, ratings in matrix.by_user().items():
        if len(ratings) < 2:
            logger.debug('user %d has %d rating(s), kept as known-only',
                         user, len(ratings))
            splits[user] = UserSplit(user, frozenset(ratings), frozenset())
            continue
        user_seed = util.stable_seed(seed, 'split', user)
        splits[user] = split_user(user, ratings, user_seed, mask_fraction,
                                  mask_mode)

    masked_pairs = {(user, r.item) for user, s in splits.items()
                    for r in s.masked}
    keep = np.fromiter(
        ((u, i) not in masked_pairs
         for u, i in zip(matrix.users.tolist(), matrix.items.tolist())),
        dtype=bool, count=len(matrix))
    known = matrix.subset(keep)
    logger.info('Masked %d of %d ratings (%s mode)',
                len(matrix) - len(known), len(matrix), mask_mode)
    return SplitDataset(matrix, known, splits)


def write_split_manifest(path, splits):
    """Write one line per user: the user index, a tab and the
    comma-separated masked item ids in ascending order."""
    with open(path, 'w', newline='\n') as f:
        for user in sorted(splits):
            items = sorted(splits[user].masked_items)
            f.write('%d\t%s\n' % (user, ','.join(str(i) for i in items)))
