class GraphRiskError(Exception):
    """Base class for all errors raised by graphrisk."""


class InventoryError(GraphRiskError):
    """The inventory file could not be read or parsed."""


class ValidationError(GraphRiskError):
    """The inventory parsed but violates a model invariant."""


class InvalidParameterError(GraphRiskError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid parameters: " + "; ".join(self.violations))


class ScopeError(GraphRiskError):
    """An asset, host or component id named in a scope does not exist."""


class NoCriticalAssetsError(GraphRiskError):
    """No asset exceeds the criticality threshold, so there is nothing to attack."""


class NoEntryPointsError(GraphRiskError):
    pass


class EnrichmentError(GraphRiskError):
    pass


class ConfigurationError(EnrichmentError):
    pass


class MissingFixtureError(EnrichmentError):
    pass


class FetchError(EnrichmentError):
    """Network or timeout failure; safe to retry."""
