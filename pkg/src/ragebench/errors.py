"""Exception hierarchy shared across the workbench."""


class RagebenchError(Exception):
    """Base class for all workbench errors."""


# audio
class MalformedHeader(RagebenchError):
    pass


class UnsupportedEncoding(RagebenchError):
    pass


class TruncatedData(RagebenchError):
    pass


class NyquistViolation(RagebenchError):
    pass


# dsp / features
class EmptySignal(RagebenchError):
    pass


class InvalidBand(RagebenchError):
    pass


class TooShort(RagebenchError):
    pass


# dataset
class DegenerateClass(RagebenchError):
    pass


class TooFewSamples(RagebenchError):
    pass


class SchemaMismatch(RagebenchError):
    pass


class NonFiniteValue(RagebenchError):
    pass


class UnknownLabel(RagebenchError):
    pass


# models
class KExceedsN(RagebenchError):
    pass


class InvalidHyperparameter(RagebenchError):
    pass


class SingleClassTraining(RagebenchError):
    pass


class SingleClassCalibration(RagebenchError):
    pass


class SchemaFingerprintMismatch(RagebenchError):
    pass


# evaluation
class LengthMismatch(RagebenchError):
    pass


class SingleClass(RagebenchError):
    pass


class SizeTooLarge(RagebenchError):
    pass


# explain
class TooManyFeatures(RagebenchError):
    pass


class EmptyBackground(RagebenchError):
    pass


class InvalidFeature(RagebenchError):
    pass


# embed
class PerplexityTooLarge(RagebenchError):
    pass


# cli
class MissingInput(RagebenchError):
    pass


class IoError(RagebenchError):
    pass
