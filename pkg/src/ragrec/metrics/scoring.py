"""Top-10 ranking metrics against a masked item set.

Relevance is binary: an item is relevant iff it is masked.  Ranks start at
1 and are discounted by ``log2(rank + 1)``.

"""
import math

TOP_N = 10
HIT_METRICS = ('normalized', 'flat', 'any')


class MetricError(ValueError):
    pass


def _check(recommended, masked):
    if not masked:
        raise MetricError('empty masked set')
    if len(set(recommended)) != len(recommended):
        raise MetricError('duplicate items in recommendation list')


def ndcg_at_10(recommended, masked):
    """``DCG / IDCG`` of the top ten of *recommended*."""
    masked = set(masked)
    _check(recommended, masked)
    dcg = math.fsum(1.0 / math.log2(rank + 1)
                    for rank, item in enumerate(recommended[:TOP_N], 1)
                    if item in masked)
    idcg = math.fsum(1.0 / math.log2(rank + 1)
                     for rank in range(1, min(TOP_N, len(masked)) + 1))
    return dcg / idcg


def _hits(recommended, masked):
    return len(set(recommended[:TOP_N]) & masked)


def hit_at_10(recommended, masked):
    """Masked items in the top ten over ``min(10, |masked|)``."""
    masked = set(masked)
    _check(recommended, masked)
    return _hits(recommended, masked) / min(TOP_N, len(masked))


def hit_flat_at_10(recommended, masked):
    """Masked items in the top ten over a flat 10."""
    masked = set(masked)
    _check(recommended, masked)
    return _hits(recommended, masked) / TOP_N


def hit_any(recommended, masked):
    """1.0 if any masked item is in the top ten, else 0.0."""
    masked = set(masked)
    _check(recommended, masked)
    return 1.0 if _hits(recommended, masked) else 0.0


def hit_score(recommended, masked, variant='normalized'):
    """The Hit@10 *variant* reported as ``hit_score``; see
    :data:`HIT_METRICS`."""
    if variant == 'normalized':
        return hit_at_10(recommended, masked)
    if variant == 'flat':
        return hit_flat_at_10(recommended, masked)
    if variant == 'any':
        return hit_any(recommended, masked)
    raise MetricError('unknown hit metric %r' % (variant,))
