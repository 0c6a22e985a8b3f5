"""Completion backends.

A backend turns a :class:`~ragrec.promptgen.render.RenderedPrompt` into a
:class:`BackendResponse` with its coroutine :meth:`Backend.send`.
:class:`ChatCompletionsBackend` talks to a chat-completions HTTP API, the
mock backends answer deterministically from privileged run data and are
what tests and CI use.

"""
import json
import logging
import os
import pkgutil
from collections import namedtuple

import arrow
import httpx
import numpy as np

import ragrec.util as util
from ragrec.llm_gateway.errors import (BackendConfigError, ConnectionFailure,
                                       ResponseFormatError, classify)
from ragrec.promptgen.render import estimate_tokens

logger = logging.getLogger(__name__)

MOCK_KINDS = ('oracle_leak', 'popularity', 'random', 'echo')

# Simulated mock latency in seconds: base + per prompt token
MOCK_LATENCY_BASE = 0.2
MOCK_LATENCY_PER_TOKEN = 0.002

DEFAULT_API_KEY_ENV = 'OPENAI_API_KEY'
DEFAULT_BASE_URL = 'https://api.openai.com/v1'
N_RECOMMENDATIONS = 10

# *simulated_latency* is None for live backends (wall clock is measured)
BackendResponse = namedtuple(
    'BackendResponse',
    'text, prompt_tokens, completion_tokens, simulated_latency')


class Backend:
    backend_id = 'backend'

    async def send(self, prompt):
        raise NotImplementedError

    async def aclose(self):
        pass


class ChatCompletionsBackend(Backend):
    """Client of the chat-completions JSON API.

    The API key is read from the environment variable *api_key_env* and is
    neither logged nor written to the transcript.  If *transcript* is a
    path, every request / response pair is appended to it as one JSON
    line.

    """
    def __init__(self, model, base_url=DEFAULT_BASE_URL,
                 api_key_env=DEFAULT_API_KEY_ENV, temperature=0.0,
                 max_tokens=None, transcript=None, request_timeout=60.0,
                 transport=None):
        api_key = os.environ.get(api_key_env)
        if not api_key:
            raise BackendConfigError(
                'environment variable %s with the API key is not set' %
                api_key_env)
        self._model = model
        self._temperature = temperature
        self._max_tokens = max_tokens
        self._transcript = transcript
        self._client = httpx.AsyncClient(
            base_url=base_url.rstrip('/'), timeout=request_timeout,
            transport=transport,
            headers={'Authorization': 'Bearer %s' % api_key})
        self.backend_id = 'chat:%s' % model
        logger.info('Chat-completions backend %s at %s', model, base_url)

    def _payload(self, prompt):
        payload = {
            'model': self._model,
            'messages': [{'role': 'user', 'content': prompt.text}],
            'temperature': self._temperature,
        }
        if self._max_tokens is not None:
            payload['max_tokens'] = self._max_tokens
        return payload

    async def send(self, prompt):
        payload = self._payload(prompt)
        try:
            response = await self._client.post('/chat/completions',
                                               json=payload)
        except httpx.TransportError as e:
            raise ConnectionFailure('%s: %s' % (type(e).__name__, e)) from e

        self._record(payload, response)
        if not response.is_success:
            raise classify(response.status_code)(
                'HTTP %d: %s' % (response.status_code, response.text[:200]))
        try:
            body = response.json()
            text = body['choices'][0]['message']['content']
            usage = body.get('usage') or {}
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise ResponseFormatError('malformed completion body: %r' %
                                      (e,)) from e
        if not isinstance(text, str):
            raise ResponseFormatError('completion without text content')
        return BackendResponse(text, usage.get('prompt_tokens'),
                               usage.get('completion_tokens'), None)

    def _record(self, payload, response):
        if not self._transcript:
            return
        try:
            body = response.json()
        except ValueError:
            body = response.text
        entry = {
            'timestamp': arrow.utcnow().isoformat(),
            'request': payload,
            'status': response.status_code,
            'response': body,
        }
        with open(self._transcript, 'a', encoding='utf-8') as f:
            f.write(json.dumps(entry, sort_keys=True) + '\n')

    async def aclose(self):
        await self._client.aclose()


class MockBackend(Backend):
    """Deterministic backend; subclasses implement :meth:`respond`.

    The reported latency is simulated from the prompt size, so mock runs
    are reproducible byte for byte.

    """
    kind = None

    def __init__(self):
        self.backend_id = 'mock:%s' % self.kind

    def respond(self, prompt):
        raise NotImplementedError

    async def send(self, prompt):
        text = self.respond(prompt)
        latency = MOCK_LATENCY_BASE + \
            MOCK_LATENCY_PER_TOKEN * prompt.token_estimate
        return BackendResponse(text, prompt.token_estimate,
                               estimate_tokens(text), latency)


def _format(items):
    return ', '.join('M%d' % i for i in items)


class OracleLeakBackend(MockBackend):
    """Answers with the target's masked items in id order, padded with the
    most popular items the target has not rated."""
    kind = 'oracle_leak'

    def __init__(self, masked, known, stats):
        super().__init__()
        self._masked = masked
        self._known = known
        self._stats = stats

    def respond(self, prompt):
        masked = sorted(self._masked.get(prompt.target, ()))
        items = masked[:N_RECOMMENDATIONS]
        if len(items) < N_RECOMMENDATIONS:
            exclude = set(masked) | set(self._known.get(prompt.target, ()))
            items += self._stats.most_rated(exclude,
                                            N_RECOMMENDATIONS - len(items))
        return 'Recommended: %s' % _format(items)


class PopularityBackend(MockBackend):
    """The ten most-rated items the target has not rated."""
    kind = 'popularity'

    def __init__(self, known, stats):
        super().__init__()
        self._known = known
        self._stats = stats

    def respond(self, prompt):
        items = self._stats.most_rated(self._known.get(prompt.target, ()),
                                       N_RECOMMENDATIONS)
        return _format(items)


class RandomBackend(MockBackend):
    """Ten random unseen items, seeded per (target, strategy, k, fraction).
    """
    kind = 'random'

    def __init__(self, seed, known, n_items):
        super().__init__()
        self._seed = seed
        self._known = known
        self._n_items = n_items

    def respond(self, prompt):
        seed = util.stable_seed(self._seed, 'random', prompt.target,
                                prompt.strategy, prompt.k,
                                util.format_fraction(prompt.fraction))
        rng = np.random.default_rng(seed)
        seen = sorted(self._known.get(prompt.target, ()))
        unseen = np.setdiff1d(np.arange(self._n_items), seen)
        n = min(N_RECOMMENDATIONS, len(unseen))
        return _format(int(i) for i in rng.choice(unseen, n, replace=False))


class EchoBackend(MockBackend):
    kind = 'echo'

    def __init__(self, text='1, 2, 3'):
        super().__init__()
        self._text = text

    def respond(self, prompt):
        return self._text


_MOCK_CONTEXT = {
    'oracle_leak': ('masked', 'known', 'stats'),
    'popularity': ('known', 'stats'),
    'random': ('known', 'n_items'),
    'echo': (),
}


def mock_backend(kind, seed=0, **context):
    """Create the mock backend *kind* from the run *context*.

    ``oracle_leak`` needs *masked*, *known* (``{user: items}`` mappings)
    and *stats*, ``popularity`` needs *known* and *stats*, ``random``
    needs *known* and *n_items*; ``echo`` takes an optional *text*.

    :raises BackendConfigError: for an unknown kind or missing context.

    """
    if kind not in _MOCK_CONTEXT:
        raise BackendConfigError('unknown mock backend %r (one of %s)' %
                                 (kind, ', '.join(MOCK_KINDS)))
    missing = [key for key in _MOCK_CONTEXT[kind]
               if context.get(key) is None]
    if missing:
        raise BackendConfigError('mock backend %s needs %s' %
                                 (kind, ', '.join(missing)))
    if kind == 'oracle_leak':
        return OracleLeakBackend(context['masked'], context['known'],
                                 context['stats'])
    if kind == 'popularity':
        return PopularityBackend(context['known'], context['stats'])
    if kind == 'random':
        return RandomBackend(seed, context['known'], context['n_items'])
    return EchoBackend(context.get('text') or '1, 2, 3')


def create_backend(spec, seed=0, transcript=None, **context):
    """Create a backend from a backend config section.

    ``type`` is a mock kind, ``chat_completions`` for the live client, or
    ``custom`` with a ``class`` given as ``'module:Class'`` that is called
    with the keyword arguments in ``options``.

    :raises BackendConfigError: if the backend cannot be created.

    """
    spec = dict(spec)
    kind = spec.pop('type')
    if kind in MOCK_KINDS:
        if spec.get('text') is not None:
            context.setdefault('text', spec['text'])
        return mock_backend(kind, seed, **context)
    if kind == 'chat_completions':
        return ChatCompletionsBackend(
            spec['model'], base_url=spec.get('base_url', DEFAULT_BASE_URL),
            api_key_env=spec.get('api_key_env', DEFAULT_API_KEY_ENV),
            temperature=spec.get('temperature', 0.0),
            max_tokens=spec.get('max_tokens'), transcript=transcript)
    if kind == 'custom':
        try:
            cls = pkgutil.resolve_name(spec.pop('class'))
        except (KeyError, ValueError, ImportError, AttributeError) as e:
            raise BackendConfigError('cannot load backend class: %s' % e)
        options = spec.get('options') or {}
        try:
            return cls(**options)
        except TypeError as e:
            raise BackendConfigError('cannot create backend %s: %s' %
                                     (cls.__name__, e))
    raise BackendConfigError('unknown backend type %r' % (kind,))
