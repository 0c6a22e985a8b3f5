from collections import namedtuple

import ragrec.util as util
from ragrec.ingest.cohort import GROUPS, cohort_groups

MF_METHOD = 'mf'

Trial = namedtuple('Trial', 'user, group, method, k, fraction')


def trial_id(trial):
    """``user:method:k:fraction``, the key trials are rejoined by."""
    return '%d:%s:%d:%s' % (trial.user, trial.method, trial.k,
                            util.format_fraction(trial.fraction))


class SweepManager:
    """Builds the trials of an experiment sweep.

    Every (cohort user, strategy, k, fraction) combination is one LLM
    trial; with MF enabled every cohort user gets one ``mf`` trial with
    ``k = 0`` and ``fraction = 0``.

    """
    def __init__(self, strategies, k_values, fractions, mf=True,
                 groups=GROUPS):
        self._strategies = list(strategies)
        self._k_values = sorted(k_values)
        self._fractions = sorted(fractions)
        self._mf = mf
        self._groups = list(groups)
        self._trials = None

    @property
    def max_k(self):
        return self._k_values[-1]

    def make_sweep(self, cohort):
        self._trials = []
        for user, group in cohort_groups(cohort, self._groups):
            for strategy in self._strategies:
                for k in self._k_values:
                    for fraction in self._fractions:
                        self._trials.append(
                            Trial(user, group, strategy, k, fraction))
            if self._mf:
                self._trials.append(Trial(user, group, MF_METHOD, 0, 0.0))
        return self._trials

    def trials(self):
        assert self._trials is not None
        return list(self._trials)

    def cohort_users(self):
        assert self._trials is not None
        return sorted({t.user for t in self._trials})
