"""Timed, retried completion calls and the concurrency-bounded
:class:`Gateway`."""
import asyncio
import logging
import time
from collections import namedtuple

import backoff

from ragrec.llm_gateway.errors import (CompletionTimeout, RetryableError,
                                       TransportError)

logger = logging.getLogger(__name__)

RetryPolicy = namedtuple(
    'RetryPolicy', 'timeout, max_retries, backoff_base, backoff_factor, '
                   'jitter')
RetryPolicy.__new__.__defaults__ = (60.0, 5, 1.0, 2.0, True)

CompletionResult = namedtuple(
    'CompletionResult',
    'text, latency, prompt_tokens, completion_tokens, backend_id, attempts')


def _log_backoff(details):
    logger.warning('Retry %d after %.2fs: %s', details['tries'],
                   details['wait'], details['exception'])


async def complete(prompt, backend, policy=RetryPolicy()):
    """Send *prompt* to *backend* and return a :class:`CompletionResult`.

    Rate-limit, server and connection errors are retried up to
    ``policy.max_retries`` times with exponential backoff
    (``backoff_base * backoff_factor ** n`` seconds, full jitter).  Other
    gateway errors propagate at once.  *latency* covers send through
    receipt of the successful attempt; mock backends report a simulated
    one.

    :raises CompletionTimeout: if an attempt takes longer than
        ``policy.timeout`` seconds (immediately for a timeout <= 0).
    :raises TransportError: if retries are exhausted.

    """
    if policy.timeout is not None and policy.timeout <= 0:
        raise CompletionTimeout('timeout %r leaves no time to complete' %
                                (policy.timeout,))
    attempts = 0

    @backoff.on_exception(
        backoff.expo, RetryableError, max_tries=policy.max_retries + 1,
        base=policy.backoff_factor, factor=policy.backoff_base,
        jitter=backoff.full_jitter if policy.jitter else None,
        on_backoff=_log_backoff, logger=None)
    async def attempt():
        nonlocal attempts
        attempts += 1
        start = time.perf_counter()
        try:
            response = await asyncio.wait_for(backend.send(prompt),
                                              policy.timeout)
        except asyncio.TimeoutError:
            raise CompletionTimeout('no response within %ss' %
                                    policy.timeout) from None
        return response, time.perf_counter() - start

    try:
        response, elapsed = await attempt()
    except RetryableError as e:
        raise TransportError('giving up after %d attempts: %s' %
                             (attempts, e), attempts) from e

    latency = elapsed if response.simulated_latency is None \
        else response.simulated_latency
    return CompletionResult(response.text, latency, response.prompt_tokens,
                            response.completion_tokens, backend.backend_id,
                            attempts)


class RateLimiter:
    """Spaces request starts at least ``1 / requests_per_second`` apart."""
    def __init__(self, requests_per_second=None):
        self._interval = 1.0 / requests_per_second \
            if requests_per_second else 0.0
        self._next = 0.0
        self._lock = asyncio.Lock()

    async def acquire(self):
        if not self._interval:
            return
        async with self._lock:
            now = time.monotonic()
            wait = self._next - now
            self._next = max(now, self._next) + self._interval
        if wait > 0:
            await asyncio.sleep(wait)


class Gateway:
    """Runs :func:`complete` with at most *concurrency* requests in flight
    and a shared :class:`RateLimiter`."""
    def __init__(self, backend, policy=RetryPolicy(), concurrency=4,
                 requests_per_second=None):
        assert concurrency >= 1
        self._backend = backend
        self._policy = policy
        self._semaphore = asyncio.Semaphore(concurrency)
        self._limiter = RateLimiter(requests_per_second)

    async def complete(self, prompt):
        async with self._semaphore:
            await self._limiter.acquire()
            return await complete(prompt, self._backend, self._policy)

    async def aclose(self):
        await self._backend.aclose()
