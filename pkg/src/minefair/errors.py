class ScenarioError(ValueError):
    """Invalid experiment input. ``field`` names the offending entry when known."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class ConvergenceError(RuntimeError):
    pass


class FitError(ValueError):
    pass
