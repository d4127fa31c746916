class NotInResolventSetError(ValueError):
    """The boundary-value problem at the requested spectral point is not uniquely solvable."""

    def __init__(self, message, condition_number=float("inf")):
        super().__init__(message)
        self.condition_number = condition_number


class ContourError(RuntimeError):
    """Argument-principle search could not produce a trustworthy zero count."""
