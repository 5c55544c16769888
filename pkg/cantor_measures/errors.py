"""Exception hierarchy shared by every module and mapped to exit codes by the CLI."""


class CantorError(Exception):
    """Base class for all domain failures."""


class NotInV(CantorError, ValueError):
    pass


class SumMismatch(CantorError, ValueError):
    pass


class EmptyPartition(CantorError, ValueError):
    pass


class NotGroupLike(CantorError, ValueError):
    pass


class NonRationalScale(CantorError, ValueError):
    pass


class PrecisionExhausted(CantorError, ArithmeticError):
    pass


class InvalidDescriptor(CantorError, ValueError):
    pass


class InvalidChallenge(CantorError, ValueError):
    pass


class NotSmaller(CantorError, ValueError):
    pass


class WeightMismatch(CantorError, ValueError):
    pass


class DepthTooShallow(CantorError, ValueError):
    pass


class NotEquiSummed(CantorError, ValueError):
    pass


class NotCycleObject(CantorError, ValueError):
    pass


class MassOverflow(CantorError, ValueError):
    pass


class MassMismatch(CantorError, ValueError):
    pass


class NotRingLike(CantorError, ValueError):
    pass


class NotQLike(CantorError, ValueError):
    pass


class PreconditionFailed(CantorError, ValueError):
    def __init__(self, check, detail=""):
        self.check = check
        super().__init__(f"{check}: {detail}" if detail else check)


class NotAValue(CantorError, ValueError):
    pass


class ComponentMixing(CantorError, ValueError):
    pass


class InvalidInput(CantorError, ValueError):
    pass


class WorkspaceError(CantorError, OSError):
    pass


class InvariantViolation(CantorError, AssertionError):
    """A post-condition failed; never expected on valid input."""
