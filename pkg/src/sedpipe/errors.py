"""Exception types shared across the pipeline."""


class SedError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(SedError):
    """Invalid or infeasible configuration (bad class name, packing, k > n, ...)."""


class DataError(SedError):
    """Training or input data violates an operation's precondition."""


class AudioReadError(SedError):
    """Audio file missing, truncated, or not a parseable RIFF/WAV container."""


class UnsupportedEncodingError(AudioReadError):
    """WAV container readable but the sample encoding is not PCM int or float32."""


class AnnotationParseError(DataError):
    """Malformed annotation row; message names the offending line."""


class EmptyInputError(DataError):
    """Signal or sequence shorter than one analysis frame."""


class SpanTooShortError(DataError):
    """Event span too short for the requested descriptor's segmentation."""
