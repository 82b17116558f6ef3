"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    pass


class InvalidState(RuntimeError):
    pass


class InfeasibleScenario(RuntimeError):
    """A second-stage problem has no feasible recourse for the given first stage."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"second stage of scenario {index} is infeasible")


class NonFiniteLoss(FloatingPointError):
    def __init__(self, minibatch, value):
        self.minibatch = minibatch
        self.value = value
        super().__init__(f"non-finite loss {value!r} in minibatch {minibatch}")
