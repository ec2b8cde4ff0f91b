"""Exception types shared by all modules."""


class EigDppError(Exception):
    """Base class for every error raised by the package."""


class InvalidInput(EigDppError, ValueError):
    pass


class OutOfDomain(EigDppError, ValueError):
    """A probe point fell outside the lattice (box plus collar)."""


class DegenerateState(EigDppError, ValueError):
    """Coupled state on the diagonal x == z where y-projections are undefined."""


class DegenerateInput(EigDppError, ValueError):
    pass


class PreconditionViolated(EigDppError, ValueError):
    pass


class Diverged(EigDppError, RuntimeError):
    pass


class NonTerminating(EigDppError, RuntimeError):
    """A game trajectory exceeded its step cap."""
