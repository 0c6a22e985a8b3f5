import re
from collections import namedtuple

N_RECOMMENDATIONS = 10

ParsedRecommendation = namedtuple(
    'ParsedRecommendation',
    'items, raw_matches, dropped_out_of_range, dropped_duplicate, short')

# Movie id markers as written in the prompts ("M17")
_MARKER = re.compile(r'\bM(\d+)\b')
# Integer literals, not parts of words or decimals
_INTEGER = re.compile(r'(?<![\w.])-?\d+(?!\w|\.\d)')


def _matches(text):
    markers = _MARKER.findall(text)
    if markers:
        return [int(m) for m in markers]
    return [int(m) for m in _INTEGER.findall(text)]


def parse_recommendations(text, n_items, limit=N_RECOMMENDATIONS):
    """Extract up to *limit* recommended item ids from a free-text *text*.

    If the text contains ``M<id>`` markers only those are read, otherwise
    all integer literals.  Ids outside ``[0, n_items)`` and repeats are
    dropped and counted; the first occurrence order is kept.  Never
    raises; *short* flags fewer than *limit* ids.

    """
    matches = _matches(text or '')
    items, seen = [], set()
    out_of_range = duplicates = 0
    for value in matches:
        if not 0 <= value < n_items:
            out_of_range += 1
        elif value in seen:
            duplicates += 1
        elif len(items) < limit:
            seen.add(value)
            items.append(value)
    return ParsedRecommendation(items, len(matches), out_of_range,
                                duplicates, len(items) < limit)
