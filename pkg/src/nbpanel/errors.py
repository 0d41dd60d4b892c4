"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A sampler or constructor was handed parameters outside its domain."""


class NumericalError(RuntimeError):
    """A linear-algebra or sampling step failed numerically.

    Carries enough context (step label, iteration) to locate the failure
    inside a long MCMC run.
    """

    def __init__(self, message, step=None, iteration=None):
        self.step = step
        self.iteration = iteration
        parts = [message]
        if step is not None:
            parts.append(f"step={step}")
        if iteration is not None:
            parts.append(f"iteration={iteration}")
        super().__init__("; ".join(parts))


class DataError(ValueError):
    """Input data files are malformed or inconsistent."""
