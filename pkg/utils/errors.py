"""Exception types shared by the simulator, the CLI and the API."""
from typing import Optional


class InputValidationError(ValueError):
    """Rejected user input, optionally pinned to a file location."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None, column: Optional[int] = None):
        self.path = path
        self.line = line
        self.column = column
        location = ""
        if path is not None:
            location = path
            if line is not None:
                location += f":{line}"
                if column is not None:
                    location += f":{column}"
            location += ": "
        super().__init__(f"{location}{message}")


class NumericalFailure(ArithmeticError):
    """Datapath blew up: saturation storm, NaN/inf, or a failed convergence check."""
