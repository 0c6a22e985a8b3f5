"""Loading of explicit-feedback rating files into a :class:`RatingMatrix`.

"""
import io
import logging
from collections import namedtuple
from os.path import isfile

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

# Names accepted for the delimiter option besides the literal string
DELIMITERS = {
    'tab': '\t',
    'ml100k': '\t',
    'ml1m': '::',
    'comma': ',',
}

VALID_RATINGS = (1, 2, 3, 4, 5)

Rating = namedtuple('Rating', 'item, rating, timestamp')


class RatingParseError(ValueError):
    """A line of a rating file could not be parsed."""
    def __init__(self, msg, line_no=None):
        super().__init__(msg)
        self.line_no = line_no


class RatingValidationError(ValueError):
    """Rating data was parseable but violates a data invariant."""


class RatingMatrix:
    """Immutable sparse user x item matrix of star ratings.

    Entries are held as four parallel read-only NumPy arrays (*users*,
    *items*, *ratings*, *timestamps*).  User and item indices are
    contiguous from zero; *raw_user_ids* / *raw_item_ids* map them back to
    the identifiers found in the source file.

    """
    def __init__(self, users, items, ratings, timestamps, n_users, n_items,
                 raw_user_ids=None, raw_item_ids=None):
        self._users = np.asarray(users, dtype=np.int64)
        self._items = np.asarray(items, dtype=np.int64)
        self._ratings = np.asarray(ratings, dtype=np.int64)
        self._timestamps = np.asarray(timestamps, dtype=np.int64)
        for arr in (self._users, self._items, self._ratings,
                    self._timestamps):
            arr.setflags(write=False)
        assert (len(self._users) == len(self._items) == len(self._ratings)
                == len(self._timestamps))
        self._n_users = int(n_users)
        self._n_items = int(n_items)
        self._raw_user_ids = tuple(raw_user_ids) if raw_user_ids else \
            tuple(str(u) for u in range(self._n_users))
        self._raw_item_ids = tuple(raw_item_ids) if raw_item_ids else \
            tuple(str(i) for i in range(self._n_items))
        self._by_user = None
        self._csr = None

    def __len__(self):
        return len(self._ratings)

    def __eq__(self, other):
        return (
            self._n_users == other.n_users and
            self._n_items == other.n_items and
            np.array_equal(self._users, other.users) and
            np.array_equal(self._items, other.items) and
            np.array_equal(self._ratings, other.ratings) and
            np.array_equal(self._timestamps, other.timestamps)
        )

    @property
    def n_users(self):
        return self._n_users

    @property
    def n_items(self):
        return self._n_items

    @property
    def users(self):
        return self._users

    @property
    def items(self):
        return self._items

    @property
    def ratings(self):
        return self._ratings

    @property
    def timestamps(self):
        return self._timestamps

    @property
    def raw_user_ids(self):
        return self._raw_user_ids

    @property
    def raw_item_ids(self):
        return self._raw_item_ids

    def entries(self):
        """Iterate over *(user, item, rating, timestamp)* tuples."""
        for row in zip(self._users.tolist(), self._items.tolist(),
                       self._ratings.tolist(), self._timestamps.tolist()):
            yield row

    def counts(self):
        """Number of ratings per user as an array of length *n_users*."""
        return np.bincount(self._users, minlength=self._n_users)

    def by_user(self):
        """Return a dict mapping every user index to its list of
        :class:`Rating` tuples in item order.  The dict is built once."""
        if self._by_user is None:
            by_user = {u: [] for u in range(self._n_users)}
            order = np.lexsort((self._items, self._users))
            for idx in order.tolist():
                by_user[int(self._users[idx])].append(Rating(
                    int(self._items[idx]), int(self._ratings[idx]),
                    int(self._timestamps[idx])))
            self._by_user = by_user
        return self._by_user

    def to_csr(self):
        """The ratings as a ``scipy.sparse.csr_matrix`` (zero = unobserved).
        """
        if self._csr is None:
            csr = sp.csr_matrix(
                (self._ratings.astype(np.float64), (self._users, self._items)),
                shape=(self._n_users, self._n_items))
            csr.sort_indices()
            self._csr = csr
        return self._csr

    def subset(self, mask):
        """Return a new matrix with the entries selected by the boolean
        *mask*.  Indices and raw id maps are kept unchanged."""
        mask = np.asarray(mask, dtype=bool)
        return self.__class__(
            self._users[mask], self._items[mask], self._ratings[mask],
            self._timestamps[mask], self._n_users, self._n_items,
            self._raw_user_ids, self._raw_item_ids)


def resolve_delimiter(delimiter):
    """Map a delimiter name (``tab``, ``ml1m``, ...) or literal to the
    separator string."""
    if not delimiter:
        raise ValueError('delimiter must not be empty')
    return DELIMITERS.get(delimiter, delimiter)


def load_ratings(path, delimiter='tab'):
    """Load a rating file with one *user, item, rating, timestamp* record
    per line and return a :class:`RatingMatrix`.

    Raw user and item ids are remapped to contiguous zero-based indices in
    the order they are first seen in the file.

    :param path: Path of the rating file (e.g. MovieLens ``u.data``).
    :param delimiter: Field separator or one of the names in
                      :data:`DELIMITERS`.
    :raises RatingParseError: for a malformed line (with its line number).
    :raises RatingValidationError: for an empty file, a rating outside
                                   1-5 or a duplicate *(user, item)* pair.

    """
    if not isfile(path):
        raise RatingValidationError('Could not find rating file: %s' % path)
    sep = resolve_delimiter(delimiter)

    user_index = {}
    item_index = {}
    seen = set()
    users, items, ratings, timestamps = [], [], [], []
    with io.open(path, 'rt', encoding='latin-1') as rating_file:
        for line_no, line in enumerate(rating_file, 1):
            line = line.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(sep)]
            if len(fields) != 4:
                raise RatingParseError(
                    'line %d: expected 4 fields separated by %r, got %d' %
                    (line_no, sep, len(fields)), line_no)
            raw_user, raw_item, raw_rating, raw_ts = fields
            try:
                rating = int(raw_rating)
                timestamp = int(raw_ts)
            except ValueError:
                raise RatingParseError(
                    'line %d: rating and timestamp must be integers: %r' %
                    (line_no, line), line_no) from None
            if rating not in VALID_RATINGS:
                raise RatingValidationError(
                    'line %d: rating %d outside 1-5' % (line_no, rating))
            if (raw_user, raw_item) in seen:
                raise RatingValidationError(
                    'line %d: duplicate rating for (user %s, item %s)' %
                    (line_no, raw_user, raw_item))
            seen.add((raw_user, raw_item))

            users.append(user_index.setdefault(raw_user, len(user_index)))
            items.append(item_index.setdefault(raw_item, len(item_index)))
            ratings.append(rating)
            timestamps.append(timestamp)

    if not ratings:
        raise RatingValidationError('no ratings in %s' % path)

    matrix = RatingMatrix(users, items, ratings, timestamps,
                          len(user_index), len(item_index),
                          raw_user_ids=list(user_index),
                          raw_item_ids=list(item_index))
    logger.info('Loaded %d ratings of %d users on %d items from %s',
                len(matrix), matrix.n_users, matrix.n_items, path)
    return matrix
