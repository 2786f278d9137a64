"""Exception hierarchy shared by all gkms modules."""


class GkmsError(Exception):
    """Base class; ``code`` is the short machine-readable name used by the CLI."""

    @property
    def code(self):
        return type(self).__name__


# groupoid construction
class GroupoidError(GkmsError):
    pass


class NonAssociative(GroupoidError):
    pass


class BadUnits(GroupoidError):
    pass


class BadInverse(GroupoidError):
    pass


class PartialCompositionGap(GroupoidError):
    pass


class NotAGroup(GroupoidError):
    pass


class NotAdditive(GkmsError):
    def __init__(self, g, h, residual):
        self.pair = (g, h)
        self.residual = residual
        super().__init__(f"c({g}*{h}) != c({g}) + c({h}) (defect {residual:.3g})")


# algebra / dynamics
class ParentMismatch(GkmsError):
    pass


class UnknownUnit(GkmsError):
    pass


class NotSelfAdjoint(GkmsError):
    pass


class PreconditionViolated(GkmsError):
    pass


class NotACocycle(GkmsError):
    pass


# kms
class NotKms(GkmsError):
    pass


class SupportViolation(GkmsError):
    pass


class ZeroMeasure(GkmsError):
    pass


class NotAState(GkmsError):
    pass


class ConditionViolated(GkmsError):
    def __init__(self, message, witness=None):
        self.witness = witness
        super().__init__(message)


class ConditionAViolated(ConditionViolated):
    pass


class ConditionBViolated(ConditionViolated):
    pass


class ConditionCViolated(ConditionViolated):
    pass


# graphs
class GraphError(GkmsError):
    pass


class DepthTooSmall(GraphError):
    pass


class UndefinedOnVertex(GraphError):
    pass


class CycleDetected(GraphError):
    def __init__(self, cycle):
        self.cycle = tuple(cycle)
        super().__init__("map has a periodic orbit: " + " -> ".join(map(str, self.cycle)))


class DepthMismatch(GraphError):
    pass


class NotStronglyConnected(GraphError):
    pass


class NonPositivePotential(GraphError):
    pass


class HorizonExceeded(GraphError):
    pass


class KappaTooLarge(GraphError):
    pass


# input documents / cli
class DocumentError(GkmsError):
    pass


class ParseError(DocumentError):
    def __init__(self, message, offset=None):
        self.offset = offset
        super().__init__(message)


class SchemaError(DocumentError):
    def __init__(self, message, location=""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class DuplicateId(DocumentError):
    pass


class UnknownCommand(GkmsError):
    pass


class MissingFlag(GkmsError):
    pass


class UsageError(GkmsError):
    pass
