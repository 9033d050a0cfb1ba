"""Exception hierarchy shared by the simulator, constructions and CLI."""


class StateMergeError(Exception):
    """Base class for errors raised by this package."""


class NotUnitaryError(StateMergeError, ValueError):
    """A gate or oracle realization failed the unitarity check."""


class ContractError(StateMergeError):
    """A construction's precondition or promise does not hold."""


class InfeasibleEstimationError(StateMergeError):
    """Sampled estimation would need more samples than the configured limit."""

    def __init__(self, required: float, limit: int):
        self.required = required
        self.limit = limit
        super().__init__(
            f"sampled estimation needs {required:.3g} samples (limit {limit}); "
            "use exact or injected estimation mode"
        )


class ResourceError(StateMergeError):
    """A dense computation would exceed the memory guard."""
