"""Exception types that the command line maps onto exit codes."""

from __future__ import annotations


class MeshParseError(ValueError):
    """Malformed OBJ statement."""

    def __init__(self, message: str, *, line_number: int) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = int(line_number)


class MeshStructureError(ValueError):
    """Index ranges, degenerate faces or edge multiplicity that the operation cannot accept."""


class ResourceLimitError(RuntimeError):
    """Requested work exceeds a configured size ceiling."""


class NumericalError(RuntimeError):
    """Iterative solver failed to reach its tolerance."""

    def __init__(self, message: str, *, residual: float) -> None:
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = float(residual)
