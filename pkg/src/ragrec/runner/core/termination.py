import asyncio


class TerminationDetector:
    """Abstract base class for termination detectors.

    """
    def __init__(self, num_trials=0):
        self.terminated = None
        self._num_trials = num_trials

    def reset(self, num_trials=None):
        raise NotImplementedError

    def update(self, trial_id):
        raise NotImplementedError

    def detect(self):
        raise NotImplementedError


class TrialCounter(TerminationDetector):
    """Detects the end of a run by counting trials that reached a
    terminal outcome.

    """
    def __init__(self, num_trials=0):
        super().__init__(num_trials)
        self._done = None

    def reset(self, num_trials=None):
        """Reset termination detection, optionally for a new number of
        expected trials.

        """
        if num_trials is not None:
            self._num_trials = num_trials
        self._done = set()
        self.terminated = asyncio.get_running_loop().create_future()
        self.detect()

    def update(self, trial_id):
        """Mark *trial_id* as done and trigger termination detection.

        """
        assert self._done is not None
        assert trial_id not in self._done, trial_id
        self._done.add(trial_id)
        self.detect()

    def discard(self, trial_id):
        assert self._done is not None
        self._done.discard(trial_id)

    def detect(self):
        assert self._done is not None
        if len(self._done) == self._num_trials and \
                not self.terminated.done():
            self.terminated.set_result(True)
