"""Exception types shared across the package."""


class PercolabError(Exception):
    """Base class for all package-specific errors."""


class MemoryBudgetError(PercolabError):
    """A dense or frontier expansion would exceed the configured node budget."""

    def __init__(self, requested: int, budget: int):
        self.requested = int(requested)
        self.budget = int(budget)
        super().__init__(
            f"expansion needs {self.requested} nodes, budget is {self.budget} "
            f"(raise PERCOLAB_MAX_NODES or pass max_nodes)"
        )


class DeadSubtreeError(PercolabError):
    """No child of the current word is alive at the requested probe depth."""


class RejectionLimitError(PercolabError):
    """Survival conditioning exhausted its rejection budget."""

    def __init__(self, attempts: int, message: str = ""):
        self.attempts = int(attempts)
        text = message or (
            f"no surviving tree found in {self.attempts} attempts "
            f"(the configuration may be subcritical or nearly so)"
        )
        super().__init__(text)


class ZeroMassError(PercolabError):
    """An operation needed a positive-mass grid but total mass is zero."""


class MissingParameterError(PercolabError):
    """A requested parameter value was not part of the recorded grids."""
