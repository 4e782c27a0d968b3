"""Per-function execution history kept by one worker node.

The scheduler's estimates come from three pieces of node-local state per
function: the last up-to-10 observed processing times, the receipt time
of the most recent call, and the receipt times inside a sliding window
(60 s by default).  Nothing is shared between nodes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import ClockRegression, UnknownFunction

RECENT_BUFFER_SIZE = 10
DEFAULT_ESTIMATOR_WINDOW_US = 60_000_000

COUNT_RECEIPTS = "receipts"
COUNT_COMPLETIONS = "completions"


@dataclass
class FunctionHistory:
    recent_us: deque = field(default_factory=lambda: deque(maxlen=RECENT_BUFFER_SIZE))
    last_receipt_us: int | None = None
    previous_receipt_us: int | None = None
    receipt_times_us: deque = field(default_factory=deque)
    completion_times_us: deque = field(default_factory=deque)


class Estimator:
    """Sliding-window call statistics for every catalog function.

    Single-writer: all mutation happens inside the owning node's event
    processing, so no locking is needed.
    """

    def __init__(
        self,
        n_functions: int,
        window_us: int = DEFAULT_ESTIMATOR_WINDOW_US,
        count_mode: str = COUNT_RECEIPTS,
    ) -> None:
        if n_functions <= 0:
            raise ValueError("estimator needs at least one function")
        if count_mode not in (COUNT_RECEIPTS, COUNT_COMPLETIONS):
            raise ValueError(f"unknown count mode {count_mode!r}")
        self.window_us = window_us
        self.count_mode = count_mode
        self._histories = [FunctionHistory() for _ in range(n_functions)]
        self._latest_receipt_us = 0

    def _history(self, fn: int) -> FunctionHistory:
        if not 0 <= fn < len(self._histories):
            raise UnknownFunction(f"function index {fn} out of range")
        return self._histories[fn]

    def record_completion(self, fn: int, duration_us: int, now_us: int | None = None) -> None:
        """Store one finished call's processing time (FIFO, capacity 10)."""
        if duration_us <= 0:
            raise ValueError(f"duration must be positive, got {duration_us}")
        history = self._history(fn)
        history.recent_us.append(duration_us)
        if now_us is not None:
            times = history.completion_times_us
            times.append(now_us)
            cutoff = now_us - self.window_us
            while times and times[0] <= cutoff:
                times.popleft()

    def expected_processing(self, fn: int) -> float:
        """Mean of the recent buffer, in microseconds; 0 when never executed."""
        history = self._history(fn)
        if not history.recent_us:
            return 0.0
        return sum(history.recent_us) / len(history.recent_us)

    def record_receipt(self, fn: int, now_us: int) -> int | None:
        """Log one pulled request; returns the previous receipt of the same function.

        Receipt clocks must be non-decreasing over a run; entries falling
        out of the window, measured from the newest receipt, are pruned.
        """
        if now_us < self._latest_receipt_us:
            raise ClockRegression(
                f"receipt at {now_us} before already-seen {self._latest_receipt_us}"
            )
        self._latest_receipt_us = now_us
        history = self._history(fn)
        previous = history.last_receipt_us
        history.previous_receipt_us = previous
        history.last_receipt_us = now_us
        times = history.receipt_times_us
        times.append(now_us)
        cutoff = now_us - self.window_us
        while times and times[0] <= cutoff:
            times.popleft()
        return previous

    def last_receipt(self, fn: int) -> int | None:
        return self._history(fn).last_receipt_us

    def previous_receipt(self, fn: int) -> int | None:
        """Receipt before the most recent one (None for a first-ever call)."""
        return self._history(fn).previous_receipt_us

    def calls_in_window(self, fn: int, now_us: int) -> int:
        """Number of calls with timestamp in the half-open window (now - T, now]."""
        history = self._history(fn)
        if self.count_mode == COUNT_RECEIPTS:
            times = history.receipt_times_us
        else:
            times = history.completion_times_us
        cutoff = now_us - self.window_us
        return sum(1 for t in times if cutoff < t <= now_us)

    def snapshot(self) -> dict:
        """JSON-friendly dump of the full state, for debugging only."""
        return {
            "window_us": self.window_us,
            "count_mode": self.count_mode,
            "functions": [
                {
                    "recent_us": list(h.recent_us),
                    "last_receipt_us": h.last_receipt_us,
                    "receipt_times_us": list(h.receipt_times_us),
                    "completion_times_us": list(h.completion_times_us),
                }
                for h in self._histories
            ],
        }
