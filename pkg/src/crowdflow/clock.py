"""Injectable clocks.

All engine durations and deadlines are integers in abstract logical time
units. Tests and the simulator drive a LogicalClock explicitly; the deployed
gateway may bind a WallClock that maps elapsed wall seconds onto logical
units (1 unit == 1 second).
"""

from __future__ import annotations

import time


class LogicalClock:
    """Deterministic counter clock. Advance is explicit and monotone."""

    def __init__(self, start: int = 0):
        self._now = int(start)

    @property
    def now(self) -> int:
        return self._now

    def advance_to(self, t: int) -> int:
        if t < self._now:
            raise ValueError(f"clock cannot move backwards ({t} < {self._now})")
        self._now = int(t)
        return self._now

    def advance_by(self, delta: int) -> int:
        if delta < 0:
            raise ValueError("negative advance")
        return self.advance_to(self._now + int(delta))


class WallClock:
    """Wall-bound clock: logical units are whole seconds since construction.

    ``origin`` may be supplied so a restarted service continues from the
    logical time recorded in its event log.
    """

    def __init__(self, origin: int = 0):
        self._origin = int(origin)
        self._started = time.monotonic()

    @property
    def now(self) -> int:
        return self._origin + int(time.monotonic() - self._started)
