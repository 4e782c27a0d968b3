"""Function catalog: per-function latency quantiles used by the workload.

All times inside the package are integer microseconds.  The catalog file
format is columnar text with a ``name,p05_ms,median_ms,p95_ms`` header;
the built-in catalog ships the eleven SeBS benchmark functions.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources

from .errors import UnknownFunction

US_PER_MS = 1_000

CATALOG_HEADER = ["name", "p05_ms", "median_ms", "p95_ms"]


@dataclass(frozen=True)
class FunctionProfile:
    """Latency quantiles of one deployable function.

    ``median_us`` doubles as the deterministic processing-time proxy and
    as the idle-system denominator for stretch.
    """

    name: str
    p05_us: int
    median_us: int
    p95_us: int

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("function name must be non-empty")
        if not (0 < self.p05_us <= self.median_us <= self.p95_us):
            raise ValueError(
                f"{self.name}: quantiles must satisfy 0 < p05 <= median <= p95, "
                f"got ({self.p05_us}, {self.median_us}, {self.p95_us})"
            )


@dataclass(frozen=True)
class FunctionCatalog:
    """Ordered, immutable collection of function profiles."""

    profiles: tuple[FunctionProfile, ...]

    def __post_init__(self) -> None:
        names = [p.name for p in self.profiles]
        if len(set(names)) != len(names):
            raise ValueError("catalog function names must be unique")

    def __len__(self) -> int:
        return len(self.profiles)

    def __iter__(self):
        return iter(self.profiles)

    def __getitem__(self, index: int) -> FunctionProfile:
        return self.profiles[index]

    def names(self) -> list[str]:
        return [p.name for p in self.profiles]

    def index_of(self, name: str) -> int:
        for i, profile in enumerate(self.profiles):
            if profile.name == name:
                return i
        raise UnknownFunction(f"function {name!r} is not in the catalog")

    def idle_medians_us(self) -> dict[str, int]:
        """Map of function name to idle-system median, for stretch."""
        return {p.name: p.median_us for p in self.profiles}

    def with_overhead_removed(self, overhead_ms: int) -> "FunctionCatalog":
        """Subtract a constant per-call overhead from every quantile.

        The built-in measurements include roughly 10 ms of message-bus
        overhead; by default nothing is subtracted.  Quantiles are floored
        at 1 ms so profiles stay valid.
        """
        if overhead_ms <= 0:
            return self
        delta = overhead_ms * US_PER_MS
        floor = US_PER_MS
        return FunctionCatalog(
            tuple(
                FunctionProfile(
                    name=p.name,
                    p05_us=max(floor, p.p05_us - delta),
                    median_us=max(floor, p.median_us - delta),
                    p95_us=max(floor, p.p95_us - delta),
                )
                for p in self.profiles
            )
        )


def _parse_catalog(text: str, source: str) -> FunctionCatalog:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != CATALOG_HEADER:
        raise ValueError(f"{source}: expected header {','.join(CATALOG_HEADER)}")
    profiles = []
    for row in reader:
        if not row:
            continue
        name, p05, median, p95 = row
        profiles.append(
            FunctionProfile(
                name=name.strip(),
                p05_us=int(p05) * US_PER_MS,
                median_us=int(median) * US_PER_MS,
                p95_us=int(p95) * US_PER_MS,
            )
        )
    return FunctionCatalog(tuple(profiles))


def load_catalog(path: str) -> FunctionCatalog:
    """Load a catalog from a CSV file (times in milliseconds)."""
    with open(path, "r", encoding="utf-8") as handle:
        return _parse_catalog(handle.read(), path)


def save_catalog(catalog: FunctionCatalog, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CATALOG_HEADER)
        for p in catalog:
            writer.writerow(
                [p.name, p.p05_us // US_PER_MS, p.median_us // US_PER_MS, p.p95_us // US_PER_MS]
            )


def default_catalog() -> FunctionCatalog:
    """The built-in eleven-function benchmark catalog."""
    text = resources.files(__package__).joinpath("data/sebs_catalog.csv").read_text("utf-8")
    return _parse_catalog(text, "builtin catalog")
