"""Classified errors of the completion gateway.

Only :class:`RetryableError` subclasses are retried.  :func:`classify`
maps an HTTP status code of a failed wire response to its error class.

"""


class GatewayError(Exception):
    pass


class RetryableError(GatewayError):
    pass


class RateLimitError(RetryableError):
    pass


class ServerError(RetryableError):
    pass


class ConnectionFailure(RetryableError):
    pass


class RequestError(GatewayError):
    """The backend rejected the request (4xx other than 429)."""
    pass


class ResponseFormatError(GatewayError):
    """The backend answered 2xx with a body that is not a completion."""
    pass


class CompletionTimeout(GatewayError):
    pass


class TransportError(GatewayError):
    """Retries exhausted."""
    def __init__(self, msg, attempts):
        super().__init__(msg)
        self.attempts = attempts


class BackendConfigError(GatewayError, ValueError):
    pass


def classify(status_code):
    """Return the error class for a non-2xx *status_code*."""
    if status_code == 429:
        return RateLimitError
    if 500 <= status_code < 600:
        return ServerError
    if 400 <= status_code < 500:
        return RequestError
    return ResponseFormatError
