import numpy as np


class PopularityStats:
    """Per-item rater count and mean rating over a (known) rating matrix.
    """
    def __init__(self, counts, sums):
        self._counts = np.asarray(counts, dtype=np.int64)
        self._sums = np.asarray(sums, dtype=np.int64)
        self._counts.setflags(write=False)
        self._sums.setflags(write=False)

    def __eq__(self, other):
        return (np.array_equal(self._counts, other.counts) and
                np.array_equal(self._sums, other.sums))

    def __len__(self):
        return len(self._counts)

    @property
    def counts(self):
        return self._counts

    @property
    def sums(self):
        return self._sums

    def count(self, item):
        return int(self._counts[item])

    def avg_rating(self, item):
        """Mean rating of *item*, or ``None`` if nobody rated it."""
        count = self._counts[item]
        if count == 0:
            return None
        return float(self._sums[item]) / float(count)

    def most_rated(self, exclude=(), n=10):
        """The *n* items with most raters, ties by item id, skipping the
        items in *exclude*."""
        items = np.arange(len(self._counts))
        order = np.lexsort((items, -self._counts))
        exclude = set(exclude)
        return [int(i) for i in order if int(i) not in exclude][:n]


def popularity_stats(matrix):
    """Compute :class:`PopularityStats` from *matrix*.  Pass the known
    ratings only, so masked ratings cannot leak into prompts."""
    counts = np.bincount(matrix.items, minlength=matrix.n_items)
    sums = np.bincount(matrix.items, weights=matrix.ratings,
                       minlength=matrix.n_items)
    return PopularityStats(counts, np.rint(sums).astype(np.int64))
