"""Exception types shared across cortexkit modules."""


class CortexkitError(Exception):
    """Base class for all cortexkit errors."""


class DimensionError(CortexkitError):
    """Shape or size of an input is incompatible with the operation."""


class RatioError(CortexkitError):
    """A resampling/slicing ratio is outside its valid range."""


class DegenerateSeriesError(CortexkitError):
    """A region's time series is constant where variance is required."""

    def __init__(self, region: int, message: str | None = None):
        self.region = region
        super().__init__(message or f"region {region} has zero variance")


class SingularityError(CortexkitError):
    """A covariance matrix is singular and no ridge was requested."""


class DegreeError(CortexkitError):
    """A node degree is zero where an inverse-degree probability is needed."""


class MissingFeaturesError(CortexkitError):
    """The graph carries no node-feature matrix."""


class ConvergenceError(CortexkitError):
    """An iterative routine failed to converge within its budget."""


class UndefinedError(CortexkitError):
    """The requested quantity is mathematically undefined for this input."""


class ParseError(CortexkitError):
    """Malformed tabular input; carries a 1-based row/column location."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        self.row = row
        self.col = col
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", col {col})" if col is not None else ")")
        super().__init__(message + loc)


class ManifestError(CortexkitError):
    """Invalid subject manifest (duplicate ids, missing files, bad schema)."""


class ValidationError(CortexkitError):
    """Persisted artifact violates a structural invariant on load."""


class ConfigError(CortexkitError):
    """Inconsistent or incomplete pipeline/federation configuration."""
