"""Seeded request scenarios over the function catalog.

A scenario is a burst of calls generated uniformly at random inside a
fixed time window (60 s by default).  The load is parameterised by an
``intensity`` multiplier: a node with ``c`` cores at intensity ``v``
receives exactly ``1.1 * c * v`` requests, which with the eleven-function
catalog splits into equally many calls per function.

Generators are pure and deterministic: the same seed and parameters give
a bit-identical scenario, so competing strategies can be compared on the
exact same call sequence.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass
from statistics import NormalDist

from .catalog import FunctionCatalog, FunctionProfile
from .errors import InvalidIntensity, UnknownFunction

DEFAULT_WINDOW_US = 60_000_000

SAMPLING_DETERMINISTIC = "deterministic-median"
SAMPLING_LOGNORMAL = "lognormal"
SAMPLING_MODES = (SAMPLING_DETERMINISTIC, SAMPLING_LOGNORMAL)

# Standard-normal quantile at 0.95: pins the lognormal fit to the p95 column.
_Z95 = NormalDist().inv_cdf(0.95)
_NORMAL = NormalDist()


@dataclass(frozen=True)
class Request:
    """One action call as it enters the system."""

    request_id: int
    function_index: int
    gen_us: int


@dataclass(frozen=True)
class Scenario:
    """A sorted burst of arrivals: ``(gen_time_us, function_index)`` pairs."""

    arrivals: tuple[tuple[int, int], ...]
    window_us: int
    seed: int

    def __post_init__(self) -> None:
        last = -1
        for gen_us, _fn in self.arrivals:
            if not 0 <= gen_us < self.window_us:
                raise ValueError(f"arrival time {gen_us} outside [0, {self.window_us})")
            if gen_us < last:
                raise ValueError("arrivals must be sorted by generation time")
            last = gen_us

    def __len__(self) -> int:
        return len(self.arrivals)

    def requests(self) -> list[Request]:
        return [
            Request(request_id=i, function_index=fn, gen_us=gen_us)
            for i, (gen_us, fn) in enumerate(self.arrivals)
        ]


def scenario_size(cores: int, intensity: int) -> int:
    """Total request count for a (cores, intensity) cell: 1.1 * cores * intensity.

    Intensities are restricted to non-negative multiples of 10 so the
    count is an exact integer.
    """
    if cores <= 0:
        raise ValueError(f"cores must be positive, got {cores}")
    if intensity < 0 or intensity % 10 != 0:
        raise InvalidIntensity(f"intensity must be a non-negative multiple of 10, got {intensity}")
    return 11 * cores * intensity // 10


def _generate(catalog: FunctionCatalog, counts: dict[str, int], window_us: int, seed: int) -> Scenario:
    """Draw per-function arrival times and merge into one sorted burst.

    Iterates the catalog in order (not the counts dict) so that equal
    counts reproduce exactly the uniform generator's draw sequence.
    """
    rng = random.Random(seed)
    arrivals: list[tuple[int, int]] = []
    for index, profile in enumerate(catalog):
        for _ in range(counts.get(profile.name, 0)):
            arrivals.append((rng.randrange(window_us), index))
    arrivals.sort(key=lambda pair: pair[0])  # stable: ties keep catalog order
    return Scenario(arrivals=tuple(arrivals), window_us=window_us, seed=seed)


def generate_uniform_scenario(
    catalog: FunctionCatalog,
    cores: int,
    intensity: int,
    window_us: int = DEFAULT_WINDOW_US,
    seed: int = 0,
) -> Scenario:
    """Equal per-function call counts, times i.i.d. uniform over the window."""
    total = scenario_size(cores, intensity)
    n_f = len(catalog)
    if total % n_f != 0:
        raise InvalidIntensity(
            f"scenario size {total} is not divisible by the {n_f}-function catalog"
        )
    per_function = total // n_f
    counts = {profile.name: per_function for profile in catalog}
    return _generate(catalog, counts, window_us, seed)


def generate_skewed_scenario(
    catalog: FunctionCatalog,
    per_function_counts: dict[str, int],
    window_us: int = DEFAULT_WINDOW_US,
    seed: int = 0,
) -> Scenario:
    """Arbitrary per-function call counts, times uniform over the window."""
    known = set(catalog.names())
    for name, count in per_function_counts.items():
        if name not in known:
            raise UnknownFunction(f"function {name!r} is not in the catalog")
        if count < 0:
            raise ValueError(f"count for {name!r} must be non-negative, got {count}")
    return _generate(catalog, per_function_counts, window_us, seed)


def lognormal_parameters(profile: FunctionProfile) -> tuple[float, float]:
    """(mu, sigma) of the lognormal with the profile's median and p95."""
    mu = math.log(profile.median_us)
    sigma = math.log(profile.p95_us / profile.median_us) / _Z95
    return mu, sigma


def sample_processing_time(profile: FunctionProfile, mode: str, rng: random.Random) -> int:
    """Synthesize one processing time, in microseconds.

    ``deterministic-median`` always returns the profile median, which keeps
    runs reproducible and makes strategy comparisons exact.  ``lognormal``
    draws from a lognormal fitted to (median, p95), clamped to
    [p05/2, 4*p95] to rule out pathological tails.
    """
    if mode == SAMPLING_DETERMINISTIC:
        return profile.median_us
    if mode == SAMPLING_LOGNORMAL:
        mu, sigma = lognormal_parameters(profile)
        u = rng.random()
        value = math.exp(mu + sigma * _NORMAL.inv_cdf(u)) if sigma > 0 else math.exp(mu)
        low = profile.p05_us / 2
        high = 4 * profile.p95_us
        return max(1, round(min(high, max(low, value))))
    raise ValueError(f"unknown sampling mode {mode!r}")


def export_scenario(scenario: Scenario, catalog: FunctionCatalog, path: str) -> None:
    """Write the arrivals as ``gen_time_us,function`` for audit and replay."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["gen_time_us", "function"])
        for gen_us, fn in scenario.arrivals:
            writer.writerow([gen_us, catalog[fn].name])
