"""Exception hierarchy.

``InputError`` subclasses describe bad inputs or usage and map to exit code 2
in the management commands; everything else is an internal failure (exit 1).
"""


class SpeakerXError(Exception):
    pass


class InputError(SpeakerXError):
    pass


class FormatError(InputError):
    pass


class UnsupportedFormatError(InputError):
    pass


class RateMismatchError(InputError):
    pass


class TooShortError(InputError):
    pass


class DimensionError(InputError, ValueError):
    pass


class DegenerateSignalError(InputError):
    pass


class CorpusTooSmallError(InputError):
    pass


class TrialGenerationError(InputError):
    def __init__(self, message, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)


class InsufficientTrialsError(InputError):
    pass


class ConfigError(InputError):
    pass


class MissingAudioError(InputError):
    def __init__(self, message, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)


class NumericOverflowError(SpeakerXError, FloatingPointError):
    def __init__(self, layer, detail=""):
        msg = f"non-finite values in layer {layer!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.layer = layer


class TrainingFailureError(SpeakerXError):
    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint
