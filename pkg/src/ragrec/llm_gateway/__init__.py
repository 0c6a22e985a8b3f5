from ragrec.llm_gateway.backends import (MOCK_KINDS, Backend,
                                         BackendResponse,
                                         ChatCompletionsBackend, MockBackend,
                                         create_backend, mock_backend)
from ragrec.llm_gateway.errors import (BackendConfigError, CompletionTimeout,
                                       ConnectionFailure, GatewayError,
                                       RateLimitError, RequestError,
                                       ResponseFormatError, RetryableError,
                                       ServerError, TransportError, classify)
from ragrec.llm_gateway.gateway import (CompletionResult, Gateway,
                                        RetryPolicy, complete)
from ragrec.llm_gateway.parsing import (ParsedRecommendation,
                                        parse_recommendations)
