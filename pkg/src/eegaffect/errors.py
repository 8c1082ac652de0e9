"""Exception hierarchy shared by every stage of the pipeline."""


class EegAffectError(Exception):
    """Base class for all toolkit errors."""


# signal model / ingestion
class MissingManifest(EegAffectError, FileNotFoundError):
    pass


class DimensionMismatch(EegAffectError, ValueError):
    pass


class RatingOutOfRange(EegAffectError, ValueError):
    pass


class NonFiniteSample(EegAffectError, ValueError):
    pass


class ChannelNotFound(EegAffectError, KeyError):
    def __init__(self, name):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"channel not found: {self.name}"


class EmptySignal(EegAffectError, ValueError):
    pass


class InvalidSpec(EegAffectError, ValueError):
    pass


class DuplicateTrial(EegAffectError, ValueError):
    pass


# filtering
class InfeasibleSpec(EegAffectError, ValueError):
    pass


class ConvergenceFailure(EegAffectError, RuntimeError):
    pass


class FrequencyOutOfRange(EegAffectError, ValueError):
    pass


class SignalTooShort(EegAffectError, ValueError):
    pass


class SampleRateMismatch(EegAffectError, ValueError):
    pass


# features
class DegenerateSignal(EegAffectError, ValueError):
    def __init__(self, message="standard deviation is zero", channel=None, band=None):
        self.channel = channel
        self.band = band
        where = ".".join(str(p) for p in (channel, band) if p is not None)
        super().__init__(f"{where}: {message}" if where else message)


class MissingBandSignal(EegAffectError, KeyError):
    pass


class ZeroPowerBand(EegAffectError, ValueError):
    pass


# labeling
class LayoutMismatch(EegAffectError, ValueError):
    pass


class MissingRating(EegAffectError, KeyError):
    pass


class EmptyAfterExclusion(EegAffectError, ValueError):
    pass


class SingleClassDataset(EegAffectError, ValueError):
    pass


# classifiers
class ConstantFeature(EegAffectError, ValueError):
    pass


class NotBinaryModel(EegAffectError, ValueError):
    pass


class NonConvergenceWarning(UserWarning):
    """Solver hit its epoch cap; the returned model is flagged ``converged=False``."""


# evaluation
class TooFewInstances(EegAffectError, ValueError):
    pass


class SingleClassLabels(EegAffectError, ValueError):
    pass


class ConfigError(EegAffectError, ValueError):
    pass
