"""Exception hierarchy.

``PreconditionError`` subclasses signal that an operation was called on an
input outside its domain (the CLI maps them to exit code 3).
``InternalConsistencyError`` subclasses signal that a guarantee the
algorithm relies on was observed to fail (exit code 4).
"""


class CdsClearError(Exception):
    pass


class PreconditionError(CdsClearError):
    pass


class InternalConsistencyError(CdsClearError):
    pass


class NotAnEpsSolution(PreconditionError):
    pass


class NakedCdsPresent(PreconditionError):
    pass


class RedCyclePresent(PreconditionError):
    pass


class CdsPresent(PreconditionError):
    pass


class DimensionCapExceeded(PreconditionError):
    pass


class NotForwardEvaluable(PreconditionError):
    pass


class PortArityMismatch(PreconditionError):
    pass


class ArgWritesNoDebt(PreconditionError):
    pass


class ParameterOutOfRange(PreconditionError):
    pass


class NoDefaultCosts(PreconditionError):
    pass


class FalsifyingAssignment(PreconditionError):
    pass


class NotExactSolution(PreconditionError):
    pass


class ImpossibleProbePattern(PreconditionError):
    pass


class IterationBoundExceeded(InternalConsistencyError):
    pass


class CertificationFailed(InternalConsistencyError):
    pass
