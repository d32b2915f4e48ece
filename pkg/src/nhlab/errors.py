"""Exception hierarchy shared by every nhlab module."""


class NHLabError(Exception):
    """Base class for all nhlab failures."""


class ConvergenceError(NHLabError):
    """QR iteration hit its iteration cap.

    ``partial`` holds the Schur progress at the time of failure: the
    (approximate, complex128) quasi-triangular iterate, the indices of the
    eigenvalues already deflated and the iteration count.
    """

    def __init__(self, message: str, partial: dict):
        super().__init__(message)
        self.partial = partial


class AmbiguousClusterError(NHLabError):
    def __init__(self, message: str, eigenvalues):
        super().__init__(message)
        self.eigenvalues = list(eigenvalues)


class CapExceededError(NHLabError):
    """Exact arithmetic requested above the configured dimension cap."""


class ExceptionalPointError(NHLabError):
    """A computation landed on (or numerically too close to) an exceptional point."""


class GapClosedError(NHLabError):
    pass


class AuditFailedError(NHLabError):
    """Precision escalation exhausted with the symmetry audit still failing."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class ModelConstructionError(NHLabError):
    """An exact identity the lattice model must satisfy was violated."""
