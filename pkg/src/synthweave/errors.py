"""Exception hierarchy shared across the package."""


class SynthweaveError(Exception):
    """Base class for all errors raised by this package."""


class DataError(SynthweaveError):
    """Malformed tabular data: bad CSV cells, schema mismatches, empty columns."""


class PlanError(SynthweaveError):
    """A synthesis plan violates its invariants against the data."""


class MethodError(SynthweaveError):
    """A conditional model cannot be fit or sampled as requested."""


class UtilityError(SynthweaveError):
    """A utility statistic cannot be computed from the given inputs."""
