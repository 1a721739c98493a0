from __future__ import annotations


class PlannerError(Exception):
    """Base class for every error raised by the route-planning toolkit."""


class GridParseError(PlannerError):
    pass


class MalformedHeaderError(GridParseError):
    pass


class CellCountError(GridParseError):
    pass


class IntensityRangeError(GridParseError):
    pass


class DegenerateClusterError(PlannerError):
    pass


class InvalidTerrainError(PlannerError):
    pass


class InfeasibleTerrainError(PlannerError):
    pass


class NoSuchEdgeError(PlannerError):
    def __init__(self, i: int, j: int):
        super().__init__(f"no edge between waypoints {i} and {j}")
        self.i = i
        self.j = j


class InvalidSnapshotError(PlannerError):
    pass


class CodecError(PlannerError):
    pass


class EvaluationError(PlannerError):
    pass


class DegenerateProbabilityError(PlannerError):
    pass


class MissionAbortedError(PlannerError):
    pass


class ConfigError(PlannerError):
    def __init__(self, message: str, path: str | None = None):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class MissionFailedError(PlannerError):
    """An optimizer or network failure stopped a mission; ``log`` holds what was flown."""

    def __init__(self, message: str, log=None):
        super().__init__(message)
        self.log = log


class ReportError(PlannerError):
    pass
