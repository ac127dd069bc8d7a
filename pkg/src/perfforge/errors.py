"""Exception hierarchy shared by all perfforge modules."""


class PerfForgeError(Exception):
    """Base class for every error raised on purpose by perfforge."""


class InvalidParams(PerfForgeError, ValueError):
    pass


# MIDI parsing


class MidiError(PerfForgeError, ValueError):
    """A byte string could not be read as a Standard MIDI File."""


class MalformedHeader(MidiError):
    pass


class TruncatedTrack(MidiError):
    pass


class MalformedTrack(MidiError):
    """Track data that is complete but not valid SMF event syntax."""


class UnsupportedFormat(MidiError):
    pass


# WAV decoding


class AudioError(PerfForgeError, ValueError):
    pass


class MalformedRiff(AudioError):
    pass


class UnsupportedEncoding(AudioError):
    pass


# feature computations


class EmptySequence(PerfForgeError, ValueError):
    pass


class InsufficientAnchors(PerfForgeError, ValueError):
    pass


class EmptyCloud(PerfForgeError, ValueError):
    pass


# configuration


class ConfigError(PerfForgeError):
    """Base for parameter-file problems; the CLI maps these to exit code 2."""


class ConfigSyntaxError(ConfigError):
    pass


class UnknownSection(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class DuplicateKey(ConfigError):
    pass


class TypeMismatch(ConfigError):
    pass


class InvalidValue(ConfigError):
    pass


# engine


class EngineError(PerfForgeError):
    pass


class DatasetNotFound(EngineError):
    pass


class CycleDetected(EngineError):
    pass


class UnknownTarget(EngineError):
    pass


class TaskFailure(EngineError):
    def __init__(self, task_id, cause):
        super().__init__(f"{task_id}: {cause}")
        self.task_id = task_id
        self.cause = cause
