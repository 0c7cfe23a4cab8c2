"""Exception hierarchy shared across the package."""

from __future__ import annotations


class GridNavError(Exception):
    """Base class for every error raised by gridnav."""


class ParseError(GridNavError):
    """Malformed map, sidecar, scene graph or cache file."""


class ConsistencyError(GridNavError):
    """Input parsed but contradicts itself (e.g. a landmark on a wall)."""


class ConflictError(GridNavError):
    """One cell was given two different region ids."""


class InvalidTrajectoryError(GridNavError):
    def __init__(self, message: str, key=None):
        super().__init__(message)
        self.key = key


class CacheCorruptionError(GridNavError):
    """A cached trajectory no longer fits the scene graph."""

    def __init__(self, message: str, key=None):
        super().__init__(message)
        self.key = key


class UnresolvedTargetError(GridNavError):
    def __init__(self, clauses: list[str]):
        super().__init__("no scene-graph target for: " + "; ".join(repr(c) for c in clauses))
        self.clauses = list(clauses)


class UnreachableGoalError(GridNavError):
    """Ground-truth BFS found no path; the episode is ill-posed."""


class BackendError(GridNavError):
    """A decision backend failed to produce an action."""

    partial = None  # set by callers that can hand back partial work


class NoPathError(BackendError):
    """Goal not reachable through known navigable cells."""


class TransportError(BackendError):
    """Network failure that survived every retry."""


class ProtocolError(BackendError):
    """Endpoint answered, but not with a usable 2xx JSON body."""


class UnparseableActionError(BackendError):
    def __init__(self, reply: str):
        super().__init__(f"no action phrase in reply: {reply[:120]!r}")
        self.reply = reply
