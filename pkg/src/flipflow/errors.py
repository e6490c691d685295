"""Exception hierarchy shared by all flipflow modules."""


class FlipflowError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(FlipflowError, ValueError):
    """Malformed input: matrix files, state files, run configurations."""


class NotSymmetric(ConfigError):
    pass


class NotPositiveDefinite(ConfigError):
    def __init__(self, smallest_eigenvalue):
        self.smallest_eigenvalue = float(smallest_eigenvalue)
        super().__init__(
            f"matrix is not positive definite (smallest eigenvalue {self.smallest_eigenvalue:.6g})"
        )


class NotInVPlus(FlipflowError, ValueError):
    """Some mode overlap beta_k vanishes, so the torus machinery is undefined."""


class MomentumOutsideCube(FlipflowError, ValueError):
    def __init__(self, margin):
        self.margin = float(margin)
        super().__init__(f"modal momentum lies outside the torus cube by {self.margin:.3g}")


class NegativeRadicand(FlipflowError, ArithmeticError):
    pass


class DifferentEnergy(FlipflowError, ValueError):
    pass


class EmptySample(FlipflowError, ValueError):
    pass


class NumericalFailure(FlipflowError, RuntimeError):
    """Search-type failures; the CLI maps these to exit code 1."""


class HorizonTooShort(NumericalFailure):
    def __init__(self, achieved, requested, horizon):
        self.achieved = float(achieved)
        self.requested = float(requested)
        self.horizon = float(horizon)
        super().__init__(
            f"best distance {self.achieved:.3g} over horizon {self.horizon:.6g} "
            f"exceeds tolerance {self.requested:.3g}"
        )


class StalledProgress(NumericalFailure):
    pass


class BudgetExceeded(NumericalFailure):
    pass
