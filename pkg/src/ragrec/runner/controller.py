import asyncio
import logging
import os
import pkgutil
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import ragrec.util as util
from ragrec.ingest.cohort import build_cohort, write_cohort
from ragrec.ingest.ratings import load_ratings
from ragrec.ingest.split import split_dataset, write_split_manifest
from ragrec.ingest.store import PreparedData, PreparedStore
from ragrec.llm_gateway.backends import create_backend
from ragrec.llm_gateway.errors import GatewayError, TransportError
from ragrec.llm_gateway.gateway import Gateway, RetryPolicy
from ragrec.llm_gateway.parsing import parse_recommendations
from ragrec.metrics.aggregate import EvalRecord
from ragrec.metrics.scoring import (hit_any, hit_flat_at_10, hit_score,
                                    ndcg_at_10)
from ragrec.mf_baseline.model import recommend_top10, save_checkpoint
from ragrec.mf_baseline.training import (GRID_BATCH_SIZES, GRID_DIMENSIONS,
                                         grid_configs, grid_search, train,
                                         write_grid_results)
from ragrec.promptgen.render import PromptError, dump_prompt, render
from ragrec.retrieval.popularity import popularity_stats
from ragrec.retrieval.sampling import (NeighborContext,
                                       sample_neighbor_ratings)
from ragrec.retrieval.similarity import (SimilarityIndex,
                                         write_neighbor_cache)
from ragrec.runner.config import (dump_config, experiment_hash, mf_config,
                                  prepared_fingerprint)
from ragrec.runner.core.management import MF_METHOD, SweepManager, trial_id
from ragrec.runner.observer import Observer
from ragrec.runner.report import report

DEFAULT_SWEEP_MANAGER = 'ragrec.runner.core.management:SweepManager'

PREPARED_FILE = 'prepared.hdf5'
SPLIT_MANIFEST_FILE = 'splits.tsv'
COHORT_FILE = 'cohort.tsv'
NEIGHBOR_CACHE_FILE = 'neighbors.tsv'
CHECKPOINT_FILE = 'mf.ckpt'
MF_GRID_FILE = 'mf_grid.csv'
CONFIG_FILE = 'config.yaml'

RunSummary = namedtuple(
    'RunSummary',
    'config_hash, n_trials, n_failed, failure_rate, parse_rate, aborted, '
    'output_dir')

logger = logging.getLogger(__name__)


def prepare(config, output_dir=None):
    """Load, split and sample the dataset of *config*.

    The result is stored in ``prepared.hdf5`` in *output_dir* together with
    the split manifest and the cohort list.  A stored snapshot made with
    the same dataset settings is loaded instead of preparing again.

    """
    output_dir = output_dir or config.run['output_dir']
    os.makedirs(output_dir, exist_ok=True)
    store = PreparedStore(os.path.join(output_dir, PREPARED_FILE))
    fingerprint = prepared_fingerprint(config)
    if store.fingerprint() == fingerprint:
        return store.load()

    ds, seed = config.dataset, config.run['seed']
    matrix = load_ratings(ds['path'], ds['delimiter'])
    dataset = split_dataset(matrix, seed, ds['mask_fraction'],
                            ds['mask_mode'])
    evaluable = {u for u, s in dataset.splits.items() if s.masked}
    cohort = build_cohort(matrix, config.cohort['sample_size'],
                          util.stable_seed(seed, 'cohort'), evaluable)
    store.save(dataset, cohort, fingerprint)
    write_split_manifest(os.path.join(output_dir, SPLIT_MANIFEST_FILE),
                         dataset.splits)
    write_cohort(os.path.join(output_dir, COHORT_FILE), cohort,
                 matrix.counts())
    return PreparedData(dataset, cohort, fingerprint)


class Snapshot:
    """Read-only data shared by all trials of a run: the split dataset,
    the similarity index and popularity stats over the known ratings."""
    def __init__(self, prepared):
        self.dataset = prepared.dataset
        self.cohort = prepared.cohort
        self.known = prepared.dataset.known
        self.n_items = self.known.n_items
        self.index = SimilarityIndex(self.known)
        self.stats = popularity_stats(self.known)
        splits = prepared.dataset.splits
        self.known_items = {u: s.known_items for u, s in splits.items()}
        self.masked_items = {u: s.masked_items for u, s in splits.items()}
        self.known_ratings = {u: s.known for u, s in splits.items()}


class Controller:
    """Controller of an experiment run.

    Create pairs of (controller, observer) via the factory :meth:`factory`.

    Tasks:
     - prepare the data snapshot and the retrieval index
     - build the trial sweep with the sweep manager
     - run MF trials and dispatch LLM trials through the gateway
     - abort when the backend stays unreachable
     - let the observer write results and emit the report
    """

    @classmethod
    def factory(cls, config, obs_cls=Observer, resume=True, **ctrl_kwargs):
        """Create a controller for *config* and its observer.

        The observer class can be replaced; both share the output
        directory of the run.

        """
        ctrl = cls(config, **ctrl_kwargs)
        obs = obs_cls(config.run['output_dir'], ctrl.config_hash,
                      config.run['template_version'], resume=resume)
        ctrl.register_observer(obs)
        return ctrl, obs

    def __init__(self, config, *, sweep_manager=DEFAULT_SWEEP_MANAGER,
                 backend=None):
        """
        :param backend: Backend instance to use instead of the one
                        described by the config (e.g. for tests).
        """
        self._config = config
        self._config_hash = experiment_hash(config)
        self._output_dir = config.run['output_dir']

        sweep = config.sweep
        cls = pkgutil.resolve_name(sweep_manager)
        self._sweep_manager = cls(sweep['strategies'], sweep['k_values'],
                                  sweep['fractions'], mf=config.mf['enabled'],
                                  groups=config.cohort['groups'])
        assert isinstance(self._sweep_manager, SweepManager)

        self._backend = backend
        self._observer = None
        self._snapshot = None
        self._rankings = {}
        self._streak = 0

    @property
    def config_hash(self):
        return self._config_hash

    @property
    def snapshot(self):
        return self._snapshot

    def register_observer(self, observer):
        logger.debug('Observer registered')
        self._observer = observer

    def setup(self):
        """Prepare data, retrieval snapshot, neighbor cache and sweep."""
        if self._snapshot is not None:
            return
        self._snapshot = Snapshot(prepare(self._config, self._output_dir))
        trials = self._sweep_manager.make_sweep(self._snapshot.cohort)
        if self._config.sweep['strategies']:
            max_k = self._sweep_manager.max_k
            for user in self._sweep_manager.cohort_users():
                self._rankings[user] = \
                    self._snapshot.index.ranking(user)[:max_k]
            write_neighbor_cache(
                os.path.join(self._output_dir, NEIGHBOR_CACHE_FILE),
                self._rankings)
        logger.info('Sweep of %d trials over %d users', len(trials),
                    len(self._sweep_manager.cohort_users()))

    def neighbor_context(self, trial):
        """Sampled :class:`NeighborContext` of an LLM *trial*."""
        snap = self._snapshot
        context = NeighborContext.from_neighbors(
            snap.known, trial.user, self._rankings[trial.user][:trial.k])
        exclude = None
        if self._config.sweep['sample_order'] == 'filter_then_sample':
            exclude = snap.known_items[trial.user]
        return sample_neighbor_ratings(context, trial.fraction,
                                       self._config.run['seed'], exclude)

    def render_trial(self, trial):
        context = self.neighbor_context(trial)
        return render(trial.method, context,
                      self._snapshot.known_ratings[trial.user],
                      self._snapshot.n_items, self._snapshot.stats)

    def _score(self, trial, items, short, latency, prompt_tokens):
        masked = self._snapshot.masked_items[trial.user]
        return EvalRecord(
            trial.user, trial.group, trial.method, trial.k, trial.fraction,
            ndcg_at_10(items, masked),
            hit_score(items, masked, self._config.run['hit_metric']),
            hit_any(items, masked), latency, prompt_tokens,
            'short' if short else 'ok', hit_flat_at_10(items, masked))

    def score_completion(self, trial, prompt, result):
        """:class:`EvalRecord` of a completed LLM trial and the number of
        ids parsed from the response."""
        parsed = parse_recommendations(result.text, self._snapshot.n_items)
        tokens = result.prompt_tokens if result.prompt_tokens is not None \
            else prompt.token_estimate
        record = self._score(trial, parsed.items, parsed.short,
                             result.latency, tokens)
        return record, len(parsed.items)

    @staticmethod
    def failed_record(trial, prompt_tokens=None):
        return EvalRecord(trial.user, trial.group, trial.method, trial.k,
                          trial.fraction, None, None, None, None,
                          prompt_tokens, 'failed')

    def train_mf(self, workers=1):
        """Train the MF baseline on the known ratings and store its
        checkpoint.  With an ``mf.grid`` the best grid config (by mean
        NDCG@10 over the cohort) is used."""
        self.setup()
        snap, mf = self._snapshot, self._config.mf
        base = mf_config(self._config)
        if mf['grid'] is not None:
            configs = grid_configs(
                base, mf['grid'].get('dimensions', GRID_DIMENSIONS),
                mf['grid'].get('batch_sizes', GRID_BATCH_SIZES))
            results = grid_search(snap.known, snap.dataset.splits,
                                  self._sweep_manager.cohort_users(),
                                  configs, workers)
            write_grid_results(os.path.join(self._output_dir, MF_GRID_FILE),
                               results)
            model = results[0].model
            logger.info('Best MF config: d=%d, batch size %d',
                        results[0].config.d, results[0].config.batch_size)
        else:
            model = train(snap.known, base)
        save_checkpoint(model, os.path.join(self._output_dir,
                                            CHECKPOINT_FILE))
        return model

    def mf_record(self, model, trial):
        rec = recommend_top10(model, trial.user,
                              self._snapshot.known_items[trial.user])
        return self._score(trial, rec.items, rec.short, None, None)

    def _create_backend(self):
        snap = self._snapshot
        return create_backend(self._config.backend,
                              seed=self._config.run['seed'],
                              transcript=self._config.gateway['transcript'],
                              masked=snap.masked_items,
                              known=snap.known_items, stats=snap.stats,
                              n_items=snap.n_items)

    def _gateway(self):
        gw = self._config.gateway
        policy = RetryPolicy(gw['timeout'], gw['max_retries'],
                             gw['backoff_base'], gw['backoff_factor'],
                             gw['jitter'])
        backend = self._backend or self._create_backend()
        return Gateway(backend, policy, gw['concurrency'],
                       gw['requests_per_second'])

    async def run_experiment(self):
        """Run all trials that have no recorded outcome yet and return a
        :class:`RunSummary`."""
        if self._observer is None:
            raise RuntimeError('Observer not registered yet!')
        self.setup()
        dump_config(self._config,
                    os.path.join(self._output_dir, CONFIG_FILE))
        done = self._observer.completed()
        pending = [t for t in self._sweep_manager.trials()
                   if trial_id(t) not in done]
        logger.info('%d of %d trials pending', len(pending),
                    len(self._sweep_manager.trials()))
        self._observer.start_observation(len(pending))

        mf_trials = [t for t in pending if t.method == MF_METHOD]
        llm_trials = [t for t in pending if t.method != MF_METHOD]
        aborted = False
        workers = self._config.run['workers']
        with ThreadPoolExecutor(max_workers=workers) as pool:
            if mf_trials:
                model = self.train_mf()
                for trial in mf_trials:
                    self._observer.update(self.mf_record(model, trial))
            if llm_trials:
                aborted = await self._dispatch(llm_trials, pool)

        if aborted:
            self._observer.discard_held()
            self._observer.stop('aborted')
            logger.error('Run aborted: backend unreachable after %d '
                         'consecutive transport errors', self._streak)
            return self._summary(True)

        await self._observer.terminated
        self._observer.finalize()
        report(self._output_dir)
        return self._summary(False)

    async def _dispatch(self, trials, pool):
        """Run the LLM *trials* concurrently; returns whether the run was
        aborted."""
        loop = asyncio.get_running_loop()
        gateway = self._gateway()
        abort = asyncio.Event()
        abort_after = self._config.run['abort_after']
        self._streak = 0

        async def run_trial(trial):
            try:
                prompt = await loop.run_in_executor(pool, self.render_trial,
                                                    trial)
            except PromptError as e:
                logger.warning('Trial %s failed: %s', trial_id(trial), e)
                self._observer.update(self.failed_record(trial))
                return
            try:
                result = await gateway.complete(prompt)
            except TransportError as e:
                logger.warning('Trial %s failed: %s', trial_id(trial), e)
                self._streak += 1
                self._observer.update(
                    self.failed_record(trial, prompt.token_estimate),
                    hold=True)
                if self._streak >= abort_after:
                    abort.set()
                return
            except GatewayError as e:
                logger.warning('Trial %s failed: %s', trial_id(trial), e)
                self._observer.update(
                    self.failed_record(trial, prompt.token_estimate))
                return
            self._streak = 0
            self._observer.release_held()
            record, parsed = await loop.run_in_executor(
                pool, self.score_completion, trial, prompt, result)
            logger.debug('Trial %s: %s, NDCG %.4f', trial_id(trial),
                         record.outcome, record.ndcg)
            self._observer.update(record, parsed=parsed)

        tasks = [asyncio.ensure_future(run_trial(t)) for t in trials]
        all_done = asyncio.ensure_future(asyncio.gather(*tasks))
        abort_wait = asyncio.ensure_future(abort.wait())
        try:
            await asyncio.wait([all_done, abort_wait],
                               return_when=asyncio.FIRST_COMPLETED)
        finally:
            abort_wait.cancel()
            for task in tasks:
                task.cancel()
            await asyncio.gather(all_done, return_exceptions=True)
            await gateway.aclose()
        if abort.is_set():
            return True
        if all_done.exception() is not None:
            raise all_done.exception()
        return False

    def _summary(self, aborted):
        ledger = self._observer.manifest.trials
        n_failed = sum(e['outcome'] == 'failed' for e in ledger.values())
        llm = [e for tid, e in ledger.items()
               if tid.split(':')[1] != MF_METHOD]
        parseable = sum(e['outcome'] != 'failed' and
                        (e['parsed'] is None or e['parsed'] > 0)
                        for e in llm)
        summary = RunSummary(
            self._config_hash, len(ledger), n_failed,
            n_failed / len(ledger) if ledger else 0.0,
            parseable / len(llm) if llm else None, aborted,
            self._output_dir)
        logger.info('%d trials, %d failed, parse rate %s', summary.n_trials,
                    summary.n_failed, summary.parse_rate)
        return summary

    def dump_prompts(self, directory, users=None, strategies=None,
                     k_values=None, fractions=None):
        """Render the prompts of the selected LLM trials into *directory*
        and return the written paths."""
        self.setup()
        paths = []
        for trial in self._sweep_manager.trials():
            if trial.method == MF_METHOD or \
                    (users and trial.user not in users) or \
                    (strategies and trial.method not in strategies) or \
                    (k_values and trial.k not in k_values) or \
                    (fractions and trial.fraction not in fractions):
                continue
            try:
                paths.append(dump_prompt(directory,
                                         self.render_trial(trial)))
            except PromptError as e:
                logger.warning('No prompt for %s: %s', trial_id(trial), e)
        logger.info('Wrote %d prompts to %s', len(paths), directory)
        return paths
