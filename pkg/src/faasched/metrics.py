"""Evaluation statistics over completion records.

Percentiles are nearest-rank order statistics (the ceil(q*n)-th sorted
value), which makes every reported number an actual sample and keeps the
computation exact and portable.  All aggregation here is pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .catalog import FunctionCatalog
from .errors import EmptyInput, MissingBaseline


@dataclass(frozen=True)
class CompletionRecord:
    """One finished request, as observed by the client.

    Times are microseconds: ``gen_us`` when the call was generated,
    ``receipt_us`` when the node pulled it, ``work_us`` the processing
    demand it consumed, ``completion_us`` when the result came back.
    ``start_us``, ``priority_ms`` and ``dispatch_seq`` are trace extras
    kept for analysis and invariant checks; they are not exported.
    """

    request_id: int
    function: str
    gen_us: int
    receipt_us: int
    work_us: int
    completion_us: int
    cold: bool
    node_id: int
    start_us: int = -1
    priority_ms: float | None = None
    dispatch_seq: int = -1

    def __post_init__(self) -> None:
        if not self.gen_us <= self.receipt_us < self.completion_us:
            raise ValueError(
                f"request {self.request_id}: need gen <= receipt < completion, got "
                f"{self.gen_us}, {self.receipt_us}, {self.completion_us}"
            )
        if self.work_us <= 0:
            raise ValueError(f"request {self.request_id}: non-positive work {self.work_us}")


@dataclass(frozen=True)
class StatSummary:
    count: int
    mean: float
    p50: float
    p75: float
    p95: float
    p99: float
    max_value: float


@dataclass(frozen=True)
class BoxplotStats:
    """Quartile box with 1.5*IQR whiskers and the mean marker."""

    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    mean: float


@dataclass(frozen=True)
class StretchConfig:
    """Idle-system medians used as stretch denominators."""

    idle_medians_us: dict[str, int]

    @classmethod
    def from_catalog(cls, catalog: FunctionCatalog) -> "StretchConfig":
        return cls(idle_medians_us=catalog.idle_medians_us())


def response_time_us(record: CompletionRecord) -> int:
    """Client-observed latency: completion minus generation time."""
    return record.completion_us - record.gen_us


def stretch(record: CompletionRecord, config: StretchConfig) -> float:
    """Response time in units of the function's idle-system median.

    Values below 1 are possible because the denominator is a median of
    full round trips, not the bare processing time.
    """
    median = config.idle_medians_us.get(record.function)
    if median is None or median <= 0:
        raise MissingBaseline(f"no idle median known for function {record.function!r}")
    return response_time_us(record) / median


def nearest_rank(sorted_values: Sequence, percent: int):
    """The ceil(percent * n / 100)-th smallest value (1-indexed)."""
    n = len(sorted_values)
    if n == 0:
        raise EmptyInput("percentile of an empty value set")
    rank = -((-percent * n) // 100)  # integer ceil: no float rounding at exact ranks
    return sorted_values[min(n, max(1, rank)) - 1]


def summarize(values: Iterable[float]) -> StatSummary:
    """Mean, nearest-rank percentiles, and maximum of a value set."""
    data = sorted(values)
    if not data:
        raise EmptyInput("cannot summarize an empty value set")
    return StatSummary(
        count=len(data),
        mean=sum(data) / len(data),
        p50=nearest_rank(data, 50),
        p75=nearest_rank(data, 75),
        p95=nearest_rank(data, 95),
        p99=nearest_rank(data, 99),
        max_value=data[-1],
    )


def boxplot_stats(values: Iterable[float]) -> BoxplotStats:
    data = sorted(values)
    if not data:
        raise EmptyInput("cannot compute box stats of an empty value set")
    q1 = nearest_rank(data, 25)
    q3 = nearest_rank(data, 75)
    iqr = q3 - q1
    low_fence = q1 - 1.5 * iqr
    high_fence = q3 + 1.5 * iqr
    inside = [v for v in data if low_fence <= v <= high_fence]
    return BoxplotStats(
        q1=q1,
        median=nearest_rank(data, 50),
        q3=q3,
        whisker_low=inside[0],
        whisker_high=inside[-1],
        mean=sum(data) / len(data),
    )


def response_summary(records: Sequence[CompletionRecord]) -> StatSummary:
    return summarize(response_time_us(r) for r in records)


def stretch_summary(records: Sequence[CompletionRecord], config: StretchConfig) -> StatSummary:
    return summarize(stretch(r, config) for r in records)


def per_function_summary(
    records: Sequence[CompletionRecord], config: StretchConfig
) -> dict[str, StatSummary]:
    """Stretch summary per function, grouped over the given records."""
    groups: dict[str, list[float]] = {}
    for record in records:
        groups.setdefault(record.function, []).append(stretch(record, config))
    return {name: summarize(values) for name, values in groups.items()}


def cold_start_total(records: Sequence[CompletionRecord]) -> int:
    return sum(1 for r in records if r.cold)


def max_completion_us(records: Sequence[CompletionRecord]) -> int:
    if not records:
        raise EmptyInput("no records")
    return max(r.completion_us for r in records)
