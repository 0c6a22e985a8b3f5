"""Rendering of the four prompt strategies from a sampled
:class:`~ragrec.retrieval.sampling.NeighborContext`."""
import logging
import math
import os
import re
from collections import namedtuple
from fractions import Fraction

import ragrec.util as util
from ragrec.promptgen.templates import TEMPLATES, TEMPLATE_VERSION

logger = logging.getLogger(__name__)

STRATEGIES = ('baseline', 'sentiment', 'reasoning', 'full_reasoning')

# Words per token factor of the default estimate
TOKEN_SCALE = 1.3

RenderedPrompt = namedtuple(
    'RenderedPrompt',
    'strategy, text, candidate_items, token_estimate, target, k, fraction, '
    'template_version')

SentimentBuckets = namedtuple('SentimentBuckets', 'liked, neutral, disliked')

_NeighborLine = namedtuple('_NeighborLine', 'user, ratings')
_StatsLine = namedtuple('_StatsLine', 'item, count, avg')


class PromptError(ValueError):
    pass


def estimate_tokens(text, scale=TOKEN_SCALE):
    """Estimate the token count of *text* as ``ceil(words * scale)``, where
    words are whitespace-delimited.  ``scale=1`` is the plain word count.
    """
    words = len(text.split())
    return math.ceil(words * Fraction(str(scale)))


def bucket_ratings(pairs):
    """Sort ``(item, rating)`` *pairs* into :class:`SentimentBuckets`:
    ratings >= 4 are liked, 3 is neutral and <= 2 disliked.  Every pair
    lands in exactly one bucket, so an item rated differently by two
    neighbors can appear in two buckets."""
    liked, neutral, disliked = [], [], []
    for item, rating in pairs:
        if rating >= 4:
            liked.append(item)
        elif rating == 3:
            neutral.append(item)
        else:
            disliked.append(item)
    return SentimentBuckets(liked, neutral, disliked)


def _format_ratings(pairs):
    return ', '.join('M%d (%d)' % (item, rating) for item, rating in pairs)


def _format_items(items):
    return ', '.join('M%d' % i for i in items) if items else '(none)'


def _target_pairs(target_known):
    pairs = sorted((r[0], r[1]) for r in target_known)
    return pairs


def _check_context(context):
    if not context.is_sampled:
        raise PromptError('neighbor context of user %d is not sampled' %
                          context.target)
    if not context.neighbors:
        raise PromptError('no collaborative context for user %d' %
                          context.target)


def _neighbor_lines(context, seen=frozenset()):
    """Neighbor lines in neighbor order with *seen* items dropped; empty
    lines are left out."""
    lines = []
    for neighbor, sampled in zip(context.neighbors, context.sampled_ratings):
        pairs = [p for p in sampled if p[0] not in seen]
        if pairs:
            lines.append(_NeighborLine(neighbor.user, _format_ratings(pairs)))
    return lines


def _candidates(context, seen=frozenset()):
    return frozenset(item for sampled in context.sampled_ratings
                     for item, _ in sampled if item not in seen)


def _common(context, target_known, n_items):
    return {
        'first_id': 0,
        'last_id': n_items - 1,
        'target_ratings': _format_ratings(_target_pairs(target_known)) or
        '(none)',
        'k': len(context.neighbors),
    }


def _finish(strategy, text, candidates, context):
    return RenderedPrompt(strategy, text, candidates, estimate_tokens(text),
                          context.target, len(context.neighbors),
                          context.fraction, TEMPLATE_VERSION)


def render_baseline(context, target_known, n_items):
    """Unfiltered prompt: the target's ratings, then every neighbor's
    sampled ratings verbatim, including items the target already rated."""
    _check_context(context)
    lines = _neighbor_lines(context)
    if not lines:
        raise PromptError('no collaborative context for user %d' %
                          context.target)
    text = TEMPLATES['baseline'].render(neighbor_lines=lines,
                                        **_common(context, target_known,
                                                  n_items))
    return _finish('baseline', text, _candidates(context), context)


def render_sentiment(context, target_known, n_items):
    """Unseen neighbor items grouped into liked / neutral / disliked lists
    aggregated over all neighbors (item order within a bucket)."""
    _check_context(context)
    seen = frozenset(r[0] for r in target_known)
    pairs = [p for sampled in context.sampled_ratings for p in sampled
             if p[0] not in seen]
    if not pairs:
        raise PromptError('no unseen candidates for user %d' %
                          context.target)
    buckets = bucket_ratings(pairs)
    text = TEMPLATES['sentiment'].render(
        liked=_format_items(sorted(set(buckets.liked))),
        neutral=_format_items(sorted(set(buckets.neutral))),
        disliked=_format_items(sorted(set(buckets.disliked))),
        **_common(context, target_known, n_items))
    return _finish('sentiment', text, frozenset(p[0] for p in pairs),
                   context)


def render_reasoning(context, target_known, n_items):
    """Baseline layout without target-seen items, closed by the reasoning
    directive."""
    _check_context(context)
    seen = frozenset(r[0] for r in target_known)
    lines = _neighbor_lines(context, seen)
    if not lines:
        raise PromptError('no unseen candidates for user %d' %
                          context.target)
    text = TEMPLATES['reasoning'].render(
        neighbor_lines=lines, **_common(context, target_known, n_items))
    return _finish('reasoning', text, _candidates(context, seen), context)


def render_full_reasoning(context, target_known, n_items, stats):
    """Reasoning prompt plus a ``Count`` / ``AvgRating`` line for every
    candidate item that has known raters."""
    _check_context(context)
    seen = frozenset(r[0] for r in target_known)
    lines = _neighbor_lines(context, seen)
    if not lines:
        raise PromptError('no unseen candidates for user %d' %
                          context.target)
    candidates = _candidates(context, seen)
    stats_lines = [_StatsLine(item, stats.count(item),
                              '%.1f' % stats.avg_rating(item))
                   for item in sorted(candidates) if stats.count(item) > 0]
    text = TEMPLATES['full_reasoning'].render(
        neighbor_lines=lines, stats_lines=stats_lines,
        **_common(context, target_known, n_items))
    return _finish('full_reasoning', text, candidates, context)


def render(strategy, context, target_known, n_items, stats=None):
    """Render *strategy* for *context*; see the ``render_*`` functions."""
    if strategy == 'baseline':
        return render_baseline(context, target_known, n_items)
    if strategy == 'sentiment':
        return render_sentiment(context, target_known, n_items)
    if strategy == 'reasoning':
        return render_reasoning(context, target_known, n_items)
    if strategy == 'full_reasoning':
        if stats is None:
            raise PromptError('full_reasoning needs popularity stats')
        return render_full_reasoning(context, target_known, n_items, stats)
    raise PromptError('unknown strategy %r' % (strategy,))


_UNSAFE = re.compile(r'[^A-Za-z0-9_.-]')


def prompt_filename(prompt):
    """``<user>_<strategy>_k<k>_f<f>.txt``"""
    name = '%d_%s_k%d_f%s.txt' % (prompt.target, prompt.strategy, prompt.k,
                                  util.format_fraction(prompt.fraction))
    return _UNSAFE.sub('_', name)


def dump_prompt(directory, prompt):
    """Write *prompt* to *directory* (LF newlines) and return the path."""
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, prompt_filename(prompt))
    with open(path, 'w', newline='\n', encoding='utf-8') as f:
        f.write(prompt.text)
    return path
