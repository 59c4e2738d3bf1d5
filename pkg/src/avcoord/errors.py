"""Exception hierarchy shared across the package."""


class SimulationError(Exception):
    """Base class for every error raised by avcoord."""


class ValidationError(SimulationError, ValueError):
    """Input violates an invariant (bad weight, bad schedule, ...)."""


class SchemaError(ValidationError):
    """Network file is missing a required attribute or references an unknown node."""


class MalformedInputError(ValidationError):
    """Network file is not well-formed XML."""


class ParameterError(ValidationError):
    """Caller passed an infeasible parameter combination."""


class GenerationError(SimulationError):
    """Seeded generation failed after its bounded retries."""

    def __init__(self, message: str, seed: int):
        super().__init__(f"{message} (seed={seed})")
        self.seed = seed


class NodeLookupError(SimulationError, KeyError):
    """A node id is not present in the network."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown node"


class ComparisonError(SimulationError, ValueError):
    """Two scenario results are not comparable."""
