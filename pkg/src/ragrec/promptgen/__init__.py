from ragrec.promptgen.render import (STRATEGIES, PromptError, RenderedPrompt,
                                     SentimentBuckets, bucket_ratings,
                                     dump_prompt, estimate_tokens,
                                     prompt_filename, render,
                                     render_baseline, render_full_reasoning,
                                     render_reasoning, render_sentiment)
from ragrec.promptgen.templates import TEMPLATE_VERSION
