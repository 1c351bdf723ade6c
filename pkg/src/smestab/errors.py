"""Exception types shared across the package."""


class SmestabError(Exception):
    """Base class for all package errors."""


class DimensionError(SmestabError, ValueError):
    """Matrix or decomposition dimensions are inconsistent."""


class DegenerateStateError(SmestabError, RuntimeError):
    """A state collapsed to the zero matrix and cannot be renormalized."""


class IntegrationAbort(SmestabError, RuntimeError):
    """An integrator produced an unusable state.

    Carries the index of the offending step in ``step``.
    """

    def __init__(self, message, step):
        super().__init__(f"{message} (step {step})")
        self.step = step


class TargetNotInvariantableError(SmestabError, ValueError):
    """Some noise operator couples the complement into the target subspace,
    so no Hamiltonian can make the target invariant."""


class NotStabilizableError(SmestabError, ValueError):
    """Open-loop synthesis was requested for a model outside its class."""

    def __init__(self, classification):
        super().__init__(
            f"open-loop synthesis requires a stabilizable model, got {classification}"
        )
        self.classification = classification


class AssumptionError(SmestabError, ValueError):
    """Structural assumptions of the feedback design are violated.

    ``violations`` lists one human-readable string per failed assumption.
    """

    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


class FeedbackCouplingError(AssumptionError):
    """The feedback Hamiltonian block coupling the target to its complement
    is zero; no feedback law can steer population into the target."""


class NoStationaryStateError(SmestabError, RuntimeError):
    """The generator kernel is numerically empty.  A trace-preserving
    generator always has a stationary state, so this signals a malformed
    model."""


class ConfigError(SmestabError, ValueError):
    """An experiment configuration document failed to parse or validate."""
