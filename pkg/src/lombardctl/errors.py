class LombardError(ValueError):
    """Base class for validation errors raised by this package."""


class FormatError(LombardError):
    """A file does not match its declared on-disk format."""


class PcaError(LombardError):
    pass


class StyleError(LombardError):
    pass


class DurationError(LombardError):
    pass


class TTSError(LombardError):
    pass


class EvalError(LombardError):
    pass
