"""Exception hierarchy shared by every module of the package."""


class HugeObjectError(Exception):
    """Base class for all library errors."""


class InvalidDistribution(HugeObjectError, ValueError):
    pass


class PreconditionError(HugeObjectError, ValueError):
    pass


class ZeroMassEvent(HugeObjectError, ValueError):
    pass


class IndexOutOfRange(HugeObjectError, IndexError):
    pass


class MarginalMismatch(HugeObjectError, ValueError):
    pass


class UnsupportedMass(HugeObjectError, ValueError):
    pass


class DimensionMismatch(HugeObjectError, ValueError):
    pass


class DenominatorMismatch(HugeObjectError, ValueError):
    pass


class ImplementationMismatch(HugeObjectError, ValueError):
    pass


class UnknownHandle(HugeObjectError, KeyError):
    pass


class GuardExceeded(HugeObjectError):
    """An exact enumeration or a query budget is larger than its configured guard."""


class TooManySubsets(GuardExceeded):
    pass


class TooManyTuples(GuardExceeded):
    pass


class TooLarge(GuardExceeded):
    pass


class ConfigTooLarge(GuardExceeded):
    pass


class EnumerationTooLarge(GuardExceeded):
    pass
