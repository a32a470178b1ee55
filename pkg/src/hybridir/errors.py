"""Exception types raised across the package."""

from __future__ import annotations


class HybridIRError(Exception):
    pass


class FutureTimestampError(HybridIRError, ValueError):
    def __init__(self, ts: int, clock: int):
        super().__init__(f"future timestamp: {ts} > clock {clock}")
        self.ts = ts
        self.clock = clock


class BatchError(HybridIRError, ValueError):
    """A batch was rejected before anything was applied."""


class NotFoundError(HybridIRError, KeyError):
    def __str__(self) -> str:
        return f"not found: {self.args[0]}"


class AmbiguousTieError(HybridIRError):
    pass


class VerificationError(HybridIRError):
    def __init__(self, pid: str, expected: str, actual: str):
        super().__init__(f"verification failed for {pid}: expected {expected}, got {actual}")
        self.pid = pid
        self.expected = expected
        self.actual = actual


class CorruptStoreError(HybridIRError):
    def __init__(self, path: str, line: int | None, reason: str):
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"corrupt store: {where}: {reason}")
        self.path = path
        self.line = line
        self.reason = reason
