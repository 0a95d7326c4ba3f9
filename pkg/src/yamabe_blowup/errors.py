"""Exception types shared by all modules.

The CLI maps :class:`DomainError` to exit status 2 and :class:`NumericError`
to exit status 3.
"""


class DomainError(ValueError):
    """Input outside the domain where an operation is defined."""


class NumericError(RuntimeError):
    """A numerical procedure failed to reach its tolerance.

    ``details`` carries whatever diagnostics the failing routine collected
    (last refinement values, residuals, condition numbers).
    """

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details
