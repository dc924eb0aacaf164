"""Exception hierarchy shared across the package."""

from __future__ import annotations


class EvalError(Exception):
    """Base class for all errors raised by summarena."""


class InputError(EvalError, ValueError):
    """Malformed or inconsistent input data (summaries, transcripts, config)."""


class PromptRenderError(EvalError):
    """A template placeholder was left unbound or an input violates a render precondition."""


class JudgeError(EvalError):
    """Base class for judge backend failures."""


class JudgeConfigError(JudgeError):
    """The judge backend is misconfigured (missing endpoint, malformed credential)."""


class TransportError(JudgeError):
    """The judge could not be reached after exhausting retries."""


class RateLimitError(TransportError):
    """The judge endpoint answered HTTP 429."""


class ParseError(EvalError):
    """No JSON payload could be located in a judge response."""


class ValidationError(ParseError):
    """A JSON payload was found but does not follow the answer schema."""


class MetricError(EvalError, ArithmeticError):
    """A metric is undefined for its inputs (zero denominator)."""


class SchedulingError(EvalError):
    """A match plan cannot be built from the provided models and meetings."""


class RatingError(EvalError):
    """No valid outcomes were available to rate."""
