"""Exception types shared by all modules.

Every error derives from ``ToolkitError`` and from one of three families that
the command line maps to exit codes: bad input (2), numerical failure (3) and
violated preconditions (4).
"""


class ToolkitError(Exception):
    exit_code = 1


class InputError(ToolkitError, ValueError):
    """Malformed file, schema violation or dimension mismatch."""

    exit_code = 2


class NumericalError(ToolkitError, ArithmeticError):
    """A computation could not be carried out reliably."""

    exit_code = 3


class PreconditionError(ToolkitError, ValueError):
    """Inputs are well formed but violate an operation's precondition."""

    exit_code = 4


class NonRegularPencil(NumericalError):
    pass


class SingularJacobian(NumericalError):
    def __init__(self, msg, rcond=None):
        super().__init__(msg)
        self.rcond = rcond


class NewtonDivergence(NumericalError):
    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


class RepeatedEigenvalue(PreconditionError):
    pass


class InconsistentInitialCondition(PreconditionError):
    def __init__(self, msg, projected=None):
        super().__init__(msg)
        self.projected = projected
