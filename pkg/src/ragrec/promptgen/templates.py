"""Prompt templates.

Any change of wording must bump :data:`TEMPLATE_VERSION`; the golden files
under ``tests/fixtures/golden`` pin the rendered text.

"""
from jinja2 import Environment, StrictUndefined

TEMPLATE_VERSION = 'v1'

REASONING_DIRECTIVE = ('Reason based on the patterns above: which 10 movies '
                       'should user A watch next that they haven\'t seen?')
FULL_REASONING_DIRECTIVE = ('Reason based on the patterns above and the '
                            'popularity statistics: which 10 movies should '
                            'user A watch next that they haven\'t seen?')
REQUEST = 'Which 10 movies should user A watch next that they haven\'t seen?'
NO_REPEAT = 'Do not select movies that the target user has already rated.'

_HEADER = """\
The valid movie IDs range from {{ first_id }} to {{ last_id }}. \
Answer with a comma-separated list of 10 movie IDs.
Target user A has rated the following movies: {{ target_ratings }}
"""

_NEIGHBOR_LINES = """\
{% for line in neighbor_lines %}
User {{ line.user }} rated: {{ line.ratings }}
{% endfor %}
"""

BASELINE = _HEADER + """\
Top-{{ k }} similar users have rated:
""" + _NEIGHBOR_LINES + NO_REPEAT + '\n' + REQUEST + '\n'

SENTIMENT = _HEADER + """\
Top-{{ k }} similar users to user A rated the following unseen movies:
Liked (rated 4-5): {{ liked }}
Neutral (rated 3): {{ neutral }}
Disliked (rated 1-2): {{ disliked }}
""" + REQUEST + '\n'

REASONING = _HEADER + """\
Top-{{ k }} similar users to user A have collectively rated the following \
unseen movies:
""" + _NEIGHBOR_LINES + REASONING_DIRECTIVE + '\n'

FULL_REASONING = _HEADER + """\
Top-{{ k }} similar users to user A have collectively rated the following \
unseen movies:
""" + _NEIGHBOR_LINES + """\
{% if stats_lines %}
Movie popularity stats:
{% for s in stats_lines %}
M{{ s.item }} - Count: {{ s.count }}, AvgRating: {{ s.avg }}
{% endfor %}
{% endif %}
""" + FULL_REASONING_DIRECTIVE + '\n'

_ENV = Environment(autoescape=False, trim_blocks=True, lstrip_blocks=True,
                   keep_trailing_newline=False, undefined=StrictUndefined)

TEMPLATES = {
    'baseline': _ENV.from_string(BASELINE),
    'sentiment': _ENV.from_string(SENTIMENT),
    'reasoning': _ENV.from_string(REASONING),
    'full_reasoning': _ENV.from_string(FULL_REASONING),
}
