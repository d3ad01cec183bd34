"""Exception types raised by the solvers and validators."""


class ValidationError(ValueError):
    """A parameter, step size or input failed a convergence precondition."""


class ScheduleError(ValidationError):
    """Inertial/relaxation parameters violate the admissible region."""


class StepSizeError(ValidationError):
    """Primal/dual step sizes do not make the metric positive definite."""


class PowerIterationError(RuntimeError):
    """Power iteration hit its cap; ``estimate`` holds the best value found."""

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate
