from typing import Optional


class NetworkValidationError(ValueError):
    """Raised when a corridor description cannot be turned into a valid Network."""

    def __init__(self, message: str, link_id: Optional[int] = None):
        self.link_id = link_id
        prefix = f"link {link_id}: " if link_id is not None else ""
        super().__init__(f"{prefix}{message}")


class TopologyError(NetworkValidationError):
    pass


class CFLError(NetworkValidationError):
    pass


class ParameterError(NetworkValidationError):
    pass


class SchemaError(ValueError):
    """A record file row (or the file itself) does not match its documented schema."""

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.message = message
        self.line = line
        self.path = path
        super().__init__(message)

    def __str__(self) -> str:
        where = self.path or ""
        if self.line is not None:
            where = f"{where}:{self.line}" if where else f"line {self.line}"
        return f"{where}: {self.message}" if where else self.message


class FluxError(RuntimeError):
    """A CTM step produced a density outside [0, rho_j] beyond numeric tolerance."""


class DegenerateEnsembleError(RuntimeError):
    """Every particle received zero likelihood."""


class CoverageError(ValueError):
    def __init__(self, message: str, uncovered: Optional[list] = None):
        self.uncovered = uncovered or []
        super().__init__(message)


class EvaluationError(ValueError):
    pass


class GeometryError(ValueError):
    """Probe-matching boxes overlap or are malformed."""

    def __init__(self, message: str, link_ids: Optional[tuple] = None):
        self.link_ids = link_ids or ()
        super().__init__(message)
