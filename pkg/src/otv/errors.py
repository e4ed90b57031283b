"""Exception types shared across the package."""


class OtvError(Exception):
    """Base class for all package errors."""


# -- geometry ----------------------------------------------------------------

class AngleNearPi(OtvError):
    """SE(3) log requested at the rotation cut locus (angle within 1e-6 of pi)."""


# -- robot model -------------------------------------------------------------

class ModelError(OtvError):
    """Base class for model-document problems."""


class ParseError(ModelError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class CycleError(ModelError):
    """Joint graph is not a tree rooted at 'base'."""


class UnknownFrame(ModelError):
    """Requested frame or link does not exist in the model."""


class BadCoupling(ModelError):
    """Coupling references a missing joint, an unactuated driver, or an actuated driven joint."""


# -- control -----------------------------------------------------------------

class MissingComponent(OtvError):
    """Operator frame lacks a component required by the operation."""


class MissingKeypoint(OtvError):
    """Hand keypoint set lacks a named keypoint."""


class NumericalFailure(OtvError):
    """Linear solve too ill-conditioned to trust."""


# -- policy runtime ----------------------------------------------------------

class DimensionMismatch(OtvError):
    """Vector or chunk has the wrong dimension for the active model."""


class NoChunkCoversTick(OtvError):
    """Aggregator queried at a tick no stored chunk covers."""


class NoTarget(OtvError):
    """Scripted producer asked to plan with no remaining target object."""


class EndOfEpisode(OtvError):
    """Replay producer queried past the last recorded step."""


class CorruptEpisode(OtvError):
    """Episode file has a bad magic, bad version, or a truncated record."""


# -- simulation --------------------------------------------------------------

class BadSpec(OtvError):
    """Scene specification is malformed."""


# -- protocol ----------------------------------------------------------------

class CodecError(OtvError):
    """Base class for wire-format decode errors."""


class UnknownTag(CodecError):
    pass


class TruncatedPayload(CodecError):
    pass


class BadUtf8(CodecError):
    pass


class NonUnitQuaternion(CodecError):
    """A pose quaternion in the payload is off unit norm by more than 1e-3."""


# -- service -----------------------------------------------------------------

class ConfigError(OtvError):
    """Server configuration file is malformed."""


class BindError(OtvError):
    """Server could not bind its listen address."""
