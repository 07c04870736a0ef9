class SimulationError(ValueError):
    pass


class BadScenario(SimulationError):
    pass


class InvalidFraction(SimulationError):
    pass


class CannotConnect(RuntimeError):
    """No connected peer graph after the allowed number of re-draws."""
