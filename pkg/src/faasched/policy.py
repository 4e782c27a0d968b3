"""Dispatch strategies: scalar priorities and the pending-request queue.

Five strategies order the queue; the stock scheduler (BASELINE) keeps
plain receipt order and never consults this module's priority formulas.
A request's priority is computed exactly once, when it is received, and
never changes afterwards.  Lower priority values run first; ties fall
back to receipt order.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field

from .errors import NotApplicable
from .estimator import Estimator
from .workload import Request

US_PER_MS = 1_000.0


class Strategy(enum.Enum):
    BASELINE = "baseline"
    FIFO = "fifo"
    SEPT = "sept"
    EECT = "eect"
    RECT = "rect"
    FC = "fc"

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown strategy {text!r}; expected one of "
                f"{', '.join(s.value for s in cls)}"
            ) from None


@dataclass(frozen=True)
class PrioritizedRequest:
    """A queued request with its frozen priority (milliseconds scale)."""

    request: Request
    priority_ms: float
    sequence: int

    def sort_key(self) -> tuple[float, int]:
        return (self.priority_ms, self.sequence)


def compute_priority(
    strategy: Strategy,
    fn: int,
    receipt_us: int,
    estimator: Estimator,
) -> float:
    """Priority of a call received now, per the configured strategy.

    The receipt must already be logged in the estimator, so the sliding
    window count includes the call itself and the previous-receipt slot
    holds the call before this one.

    FIFO  -> receipt time
    SEPT  -> expected processing time
    EECT  -> receipt time + expected processing time
    RECT  -> previous same-function receipt + expected processing time
    FC    -> same-function calls in the last window * expected processing time
    """
    if strategy is Strategy.BASELINE:
        raise NotApplicable("the stock scheduler does not use computed priorities")
    receipt_ms = receipt_us / US_PER_MS
    if strategy is Strategy.FIFO:
        return receipt_ms
    expected_ms = estimator.expected_processing(fn) / US_PER_MS
    if strategy is Strategy.SEPT:
        return expected_ms
    if strategy is Strategy.EECT:
        return receipt_ms + expected_ms
    if strategy is Strategy.RECT:
        previous = estimator.previous_receipt(fn)
        # First-ever call: no earlier receipt exists, degenerate to EECT.
        anchor_ms = receipt_ms if previous is None else previous / US_PER_MS
        return anchor_ms + expected_ms
    if strategy is Strategy.FC:
        count = estimator.calls_in_window(fn, receipt_us)
        return count * expected_ms
    raise NotApplicable(f"no priority rule for {strategy}")


@dataclass
class PriorityQueue:
    """Min-heap over (priority, receipt sequence)."""

    _heap: list[tuple[float, int, PrioritizedRequest]] = field(default_factory=list)

    def push(self, item: PrioritizedRequest) -> None:
        heapq.heappush(self._heap, (item.priority_ms, item.sequence, item))

    def pop_min(self) -> PrioritizedRequest | None:
        if not self._heap:
            return None
        return heapq.heappop(self._heap)[2]

    def peek_min(self) -> PrioritizedRequest | None:
        if not self._heap:
            return None
        return self._heap[0][2]

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)
