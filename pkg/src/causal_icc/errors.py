"""Exception hierarchy shared across the package."""


class CausalIccError(Exception):
    """Base class for all errors raised by causal_icc."""


class NotFinite(CausalIccError):
    """An exact computation was requested on a model with continuous noise."""


class CapExceeded(CausalIccError):
    """An enumeration would exceed its configured size cap."""


class ContinuousEntropyUnsupported(CausalIccError):
    """Entropy was requested for a target without finite support."""


class NonNumericTarget(CausalIccError, TypeError):
    """A variance or expectation was requested on a categorical variable."""


class BadDistribution(CausalIccError, ValueError):
    """A probability table is negative or does not sum to one."""
