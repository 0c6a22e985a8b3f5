import csv
import logging
import os
import pkgutil

from ragrec.metrics.aggregate import (HIT_FLAT_COLUMNS, TRIAL_COLUMNS,
                                      canonical_sort, format_record,
                                      read_header, read_results,
                                      write_results)
from ragrec.runner.core.management import trial_id
from ragrec.runner.core.manifest import MANIFEST_FILE, RunManifest
from ragrec.runner.core.termination import TerminationDetector
from ragrec.runner.report import HIT_FLAT_FILE

DEFAULT_TERM = 'ragrec.runner.core.termination:TrialCounter'

PARTIAL_FILE = 'results.partial.csv'
RESULTS_FILE = 'results.csv'

logger = logging.getLogger(__name__)


class Observer:
    """Single writer of the run results.

    Tasks:

    - append every finished trial to the partial results file and the
      manifest ledger
    - detect the end of the run (all dispatched trials reported)
    - write the canonically sorted results file (and the flat Hit@10 per
      trial) when the run is done

    Failures caused by an unreachable backend are held back until a later
    trial succeeds; if the run aborts instead they are dropped, so a
    resumed run dispatches those trials again.

    For normal setup, do not instantiate this class directly but use
    :meth:`ragrec.runner.controller.Controller.factory`.

    """
    def __init__(self, output_dir, config_hash, template_version, *,
                 resume=True, save_every=25, termcls=DEFAULT_TERM):
        self._output_dir = output_dir
        self._header = {'config_hash': config_hash,
                        'template_version': template_version}
        self._save_every = save_every
        os.makedirs(output_dir, exist_ok=True)

        self._manifest = RunManifest.open(
            os.path.join(output_dir, MANIFEST_FILE), config_hash,
            template_version, resume)
        self._partial_path = os.path.join(output_dir, PARTIAL_FILE)
        self._records = {}
        self._held = {}
        if resume:
            self._load_partial(config_hash)
        self._partial = None
        self._writer = None
        self._unsaved = 0

        # termination detection
        cls = pkgutil.resolve_name(termcls)
        self._termination_detector = cls()
        assert isinstance(self._termination_detector, TerminationDetector)

    @property
    def manifest(self):
        return self._manifest

    @property
    def terminated(self):
        return self._termination_detector.terminated

    def completed(self):
        """Ids of trials with a recorded terminal outcome."""
        return set(self._records)

    def _load_partial(self, config_hash):
        if not os.path.exists(self._partial_path):
            return
        if read_header(self._partial_path).get('config_hash') != config_hash:
            logger.warning('Ignoring %s written for another config',
                           self._partial_path)
            return
        with open(self._partial_path, encoding='utf-8', newline='') as f:
            text = f.read()
        if not text.endswith('\n'):
            # drop a row cut off by an interrupted write
            text = text[:text.rfind('\n') + 1]
            with open(self._partial_path, 'w', encoding='utf-8',
                      newline='') as f:
                f.write(text)
        ledger = self._manifest.trials
        for record in read_results(self._partial_path):
            tid = trial_id(record)
            self._records[tid] = record
            parsed = (ledger.get(tid) or {}).get('parsed')
            self._manifest.record(tid, record.outcome, parsed)
        logger.info('Loaded %d finished trials from %s', len(self._records),
                    self._partial_path)

    def start_observation(self, n_pending):
        """Open the partial results file and expect *n_pending* trials."""
        self._termination_detector.reset(n_pending)
        new_file = not self._records
        self._partial = open(self._partial_path, 'w' if new_file else 'a',
                             encoding='utf-8', newline='')
        self._writer = csv.writer(self._partial, lineterminator='\n')
        if new_file:
            self._partial.write('# %s\n' % ' '.join(
                '%s=%s' % (k, self._header[k]) for k in sorted(self._header)))
            self._writer.writerow(TRIAL_COLUMNS)
            self._partial.flush()
        self._manifest.save()

    def update(self, record, hold=False, parsed=None):
        """Record the terminal *record* of a trial.

        :param hold: Keep the record back until :meth:`release_held`
                     (failures from an unreachable backend).
        :param parsed: Number of valid ids parsed from the response.

        """
        tid = trial_id(record)
        self._termination_detector.update(tid)
        if hold:
            self._held[tid] = record
            return
        self._store(tid, record, parsed)

    def _store(self, tid, record, parsed=None):
        assert tid not in self._records, tid
        self._records[tid] = record
        self._writer.writerow(format_record(record, TRIAL_COLUMNS))
        self._partial.flush()
        self._manifest.record(tid, record.outcome, parsed)
        self._unsaved += 1
        if self._unsaved >= self._save_every:
            self._manifest.save()
            self._unsaved = 0

    def release_held(self):
        """Store all held-back records as failed trials."""
        for tid, record in sorted(self._held.items()):
            self._store(tid, record)
        self._held = {}

    def discard_held(self):
        """Forget held-back records; their trials count as not run."""
        for tid in sorted(self._held):
            self._termination_detector.discard(tid)
        if self._held:
            logger.info('Discarding %d failures of the aborted backend',
                        len(self._held))
        self._held = {}

    def stop(self, status):
        """Close the partial file and save the manifest with *status*."""
        if self._partial is not None:
            partial, self._partial = self._partial, None
            partial.close()
        self._manifest.set_status(status)
        self._manifest.save()

    def finalize(self):
        """Write the canonically sorted results and flat Hit@10 files and
        mark the run complete.  Returns the sorted records."""
        self.release_held()
        records = canonical_sort(self._records.values())
        path = os.path.join(self._output_dir, RESULTS_FILE)
        write_results(path, records, self._header)
        write_results(os.path.join(self._output_dir, HIT_FLAT_FILE), records,
                      self._header, HIT_FLAT_COLUMNS)
        self.stop('complete')
        logger.info('Wrote %d results to %s', len(records), path)
        return records
