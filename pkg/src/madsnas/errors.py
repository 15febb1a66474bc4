"""Exception types shared across the toolkit."""


class MadsnasError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(MadsnasError):
    """Point length does not match the search space."""


class KindError(MadsnasError):
    """Operation applied to a variable of the wrong kind."""


class MeshError(MadsnasError):
    """Invalid mesh state (e.g. zero mesh size)."""


class BoundsError(MadsnasError):
    """Value outside its declared bounds."""


class ConfigError(MadsnasError):
    """Invalid or inconsistent configuration."""


class IoError(MadsnasError):
    """Filesystem failure while writing protocol files."""


class InfeasibleStartError(MadsnasError):
    """The initial point is infeasible or failed to evaluate."""


class BaselineError(MadsnasError):
    """The baseline evaluation failed; the constrained search cannot start."""


class DataError(MadsnasError):
    """Dataset cannot satisfy the requested split."""
