import logging
from collections import namedtuple

import numpy as np

logger = logging.getLogger(__name__)

GROUPS = ('hot', 'cold')


class CohortError(ValueError):
    pass


EvalCohort = namedtuple('EvalCohort', 'hot_users, cold_users, median_count')


def lower_median(values):
    """The lower median of *values* (element ``(n - 1) // 2`` after sorting).
    """
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def build_cohort(matrix, sample_size, seed, eligible=None):
    """Partition users into hot (rating count above the median) and cold
    (count at or below it) and sample up to *sample_size* users from each
    group without replacement.

    :param matrix: The full :class:`~ragrec.ingest.ratings.RatingMatrix`
                   (known plus masked ratings).
    :param sample_size: Users to draw per group; a smaller group is
                        returned whole.
    :param seed: Seed of the sampling generator.
    :param eligible: Optional set of users that may be sampled (e.g. users
                     with at least one masked rating).  The median is
                     always taken over all users.

    """
    if sample_size <= 0:
        raise CohortError('sample_size must be positive, got %s' %
                          (sample_size,))
    if len(matrix) == 0:
        raise CohortError('cannot build a cohort from an empty matrix')

    counts = matrix.counts()
    median = int(lower_median(counts.tolist()))
    users = [u for u in range(matrix.n_users)
             if eligible is None or u in eligible]
    hot = [u for u in users if counts[u] > median]
    cold = [u for u in users if counts[u] <= median]

    rng = np.random.default_rng(seed)
    cohort = EvalCohort(_sample(rng, hot, sample_size),
                        _sample(rng, cold, sample_size), median)
    logger.info('Cohort: median %d ratings, %d hot / %d cold users sampled',
                median, len(cohort.hot_users), len(cohort.cold_users))
    return cohort


def _sample(rng, group, size):
    if len(group) <= size:
        return list(group)
    return sorted(rng.choice(group, size=size, replace=False).tolist())


def cohort_groups(cohort, groups=GROUPS):
    """Iterate over *(user, group)* pairs of the selected *groups*."""
    for group in groups:
        for user in getattr(cohort, '%s_users' % group):
            yield user, group


def write_cohort(path, cohort, counts):
    """Write one line per sampled user: user index, group and rating count.
    """
    with open(path, 'w', newline='\n') as f:
        for user, group in cohort_groups(cohort):
            f.write('%d\t%s\t%d\n' % (user, group, counts[user]))
