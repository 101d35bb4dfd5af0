"""Exception types shared across the package."""


class DecaminError(Exception):
    """Base class for all package errors."""


class TaxonomyError(DecaminError):
    """Invalid taxonomy document or unknown service type."""


class GeometryError(DecaminError):
    """Degenerate or invalid geometry."""


class IngestError(DecaminError):
    """Unreadable or inconsistent input data."""


class RemoteError(DecaminError):
    """External service (geocoder / routing) failed after retries."""


class FlowError(DecaminError):
    """Random-walk stationary distribution did not converge."""


class ConfigError(DecaminError):
    """Invalid or incomplete run configuration."""
