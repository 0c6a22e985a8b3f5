"""Run manifest: config hash, per-trial status ledger and timestamps,
stored as JSON next to the results."""
import json
import logging
import os

import arrow

logger = logging.getLogger(__name__)

MANIFEST_FILE = 'manifest.json'
STATUSES = ('running', 'complete', 'aborted')


class ManifestError(ValueError):
    pass


class RunManifest:
    def __init__(self, path, config_hash, template_version, trials=None,
                 status='running', created=None, updated=None):
        self._path = path
        self._config_hash = config_hash
        self._template_version = template_version
        self._trials = dict(trials or {})
        self._status = status
        self._created = created or arrow.utcnow().isoformat()
        self._updated = updated or self._created

    @classmethod
    def open(cls, path, config_hash, template_version, resume=True):
        """Load the manifest at *path* to resume a run, or start a new one.

        :raises ManifestError: if the stored config hash differs from
            *config_hash* while resuming.

        """
        if resume and os.path.exists(path):
            manifest = cls.load(path)
            if manifest.config_hash != config_hash:
                raise ManifestError(
                    'cannot resume %s: it was written for config %s, the '
                    'current config is %s' % (path, manifest.config_hash,
                                              config_hash))
            logger.info('Resuming run with %d recorded trials',
                        len(manifest.trials))
            manifest.set_status('running')
            return manifest
        return cls(path, config_hash, template_version)

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding='utf-8') as f:
                data = json.load(f)
            return cls(path, data['config_hash'], data['template_version'],
                       data['trials'], data['status'], data['created'],
                       data['updated'])
        except (OSError, ValueError, KeyError) as e:
            raise ManifestError('unreadable manifest %s: %s' % (path, e))

    @property
    def path(self):
        return self._path

    @property
    def config_hash(self):
        return self._config_hash

    @property
    def template_version(self):
        return self._template_version

    @property
    def trials(self):
        return dict(self._trials)

    @property
    def status(self):
        return self._status

    @property
    def created(self):
        return self._created

    @property
    def updated(self):
        return self._updated

    def record(self, trial_id, outcome, parsed=None):
        """Ledger entry of a finished trial; *parsed* is the number of valid
        ids read from an LLM response."""
        self._trials[trial_id] = {'outcome': outcome, 'parsed': parsed}

    def set_status(self, status):
        assert status in STATUSES
        self._status = status

    def save(self):
        """Write the manifest atomically (temporary file and rename)."""
        self._updated = arrow.utcnow().isoformat()
        data = {
            'config_hash': self._config_hash,
            'template_version': self._template_version,
            'status': self._status,
            'created': self._created,
            'updated': self._updated,
            'trials': dict(sorted(self._trials.items())),
        }
        tmp = self._path + '.tmp'
        with open(tmp, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=1, sort_keys=True)
        os.replace(tmp, self._path)
