"""Exception types shared across the pipeline."""


class DtmError(Exception):
    """Base class for all dtmforge errors."""


class ParseError(DtmError):
    """Input file could not be parsed (bad format, malformed line, no points)."""


class ConfigError(DtmError):
    """Invalid configuration value or file."""


class NumericError(DtmError):
    """Numeric failure: degenerate fit, too few samples, empty grid."""


class PipelineError(DtmError):
    """A pipeline stage failed; carries the stage name and the original cause."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
