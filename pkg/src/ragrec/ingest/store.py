"""HDF5 snapshot of a prepared dataset (matrix, split and cohort)."""
import logging
from collections import namedtuple

import h5py
import numpy as np

from ragrec.ingest.cohort import EvalCohort
from ragrec.ingest.ratings import Rating, RatingMatrix
from ragrec.ingest.split import SplitDataset, UserSplit

logger = logging.getLogger(__name__)

PreparedData = namedtuple('PreparedData', 'dataset, cohort, fingerprint')

ENTRY_DTYPE = np.dtype([
    ('user', 'int64'),
    ('item', 'int64'),
    ('rating', 'int64'),
    ('timestamp', 'int64'),
    ('masked', bool),
])


class PreparedStore:
    """Writes and reads the ``prepared`` group of an HDF5 file.

    The group holds the full rating entries with a *masked* flag, the raw
    id maps and the cohort lists; its attributes hold the matrix shape, the
    cohort median and the *fingerprint* of the dataset-related config the
    snapshot was made with.

    """
    def __init__(self, dbfile):
        self._dbfile = dbfile

    def save(self, dataset, cohort, fingerprint):
        matrix = dataset.matrix
        masked_pairs = {(u, r.item) for u, s in dataset.splits.items()
                        for r in s.masked}
        rows = [(u, i, r, t, (u, i) in masked_pairs)
                for u, i, r, t in matrix.entries()]
        with h5py.File(self._dbfile, mode='w') as db:
            group = db.create_group('prepared')
            group.attrs['n_users'] = matrix.n_users
            group.attrs['n_items'] = matrix.n_items
            group.attrs['median_count'] = cohort.median_count
            group.attrs['fingerprint'] = fingerprint
            group.create_dataset('entries',
                                 data=np.array(rows, dtype=ENTRY_DTYPE))
            group.create_dataset('raw_user_ids', data=np.array(
                [u.encode() for u in matrix.raw_user_ids], dtype='S64'))
            group.create_dataset('raw_item_ids', data=np.array(
                [i.encode() for i in matrix.raw_item_ids], dtype='S64'))
            group.create_dataset('hot_users', data=np.array(
                cohort.hot_users, dtype='int64'))
            group.create_dataset('cold_users', data=np.array(
                cohort.cold_users, dtype='int64'))
        logger.info('Stored prepared data in %s', self._dbfile)

    def fingerprint(self):
        """Return the stored fingerprint, or ``None`` if there is none."""
        try:
            with h5py.File(self._dbfile, mode='r') as db:
                return db['prepared'].attrs['fingerprint']
        except (OSError, KeyError):
            return None

    def load(self):
        with h5py.File(self._dbfile, mode='r') as db:
            group = db['prepared']
            entries = np.array(group['entries'])
            n_users = int(group.attrs['n_users'])
            n_items = int(group.attrs['n_items'])
            cohort = EvalCohort(
                [int(u) for u in group['hot_users']],
                [int(u) for u in group['cold_users']],
                int(group.attrs['median_count']))
            raw_users = [u.decode() for u in group['raw_user_ids']]
            raw_items = [i.decode() for i in group['raw_item_ids']]
            fingerprint = group.attrs['fingerprint']

        matrix = RatingMatrix(entries['user'], entries['item'],
                              entries['rating'], entries['timestamp'],
                              n_users, n_items, raw_users, raw_items)
        known = matrix.subset(~entries['masked'])
        known_sets = {u: set() for u in range(n_users)}
        masked_sets = {u: set() for u in range(n_users)}
        for row in entries.tolist():
            user, item, rating, timestamp, masked = row
            target = masked_sets if masked else known_sets
            target[user].add(Rating(item, rating, timestamp))
        splits = {u: UserSplit(u, frozenset(known_sets[u]),
                               frozenset(masked_sets[u]))
                  for u in range(n_users)}
        logger.info('Loaded prepared data from %s', self._dbfile)
        return PreparedData(SplitDataset(matrix, known, splits), cohort,
                            fingerprint)
