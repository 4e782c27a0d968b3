"""Experiment drivers: expand a configuration into runs and emit result tables.

Three drivers cover the study shapes: a (cores x intensity x strategy x
repetition) matrix on one node, a skewed-frequency fairness run, and a
fixed-load cluster sweep over worker counts.  Within one cell every
strategy consumes the identical scenario, so comparisons always see the
same arrival sequence.

Configuration is a declarative INI file plus command-line overrides; all
knobs have desk-scale defaults so a full default run finishes in seconds.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .catalog import FunctionCatalog, default_catalog
from .engine import (
    BALANCER_ROUND_ROBIN,
    BALANCERS,
    ClusterConfig,
    export_records,
    run_cluster,
    run_single,
)
from .errors import ConfigError, SimulatorError
from .metrics import (
    CompletionRecord,
    StretchConfig,
    boxplot_stats,
    cold_start_total,
    response_time_us,
    stretch,
    summarize,
)
from .node import (
    COLD_START_CONSTANT,
    COLD_START_UNIFORM,
    DEFAULT_COLD_START_US,
    DEFAULT_CONTAINER_MEMORY_MB,
    DEFAULT_MEMORY_POOL_MB,
    ExecutionModel,
    NodeConfig,
)
from .policy import Strategy
from .workload import (
    DEFAULT_WINDOW_US,
    SAMPLING_DETERMINISTIC,
    SAMPLING_MODES,
    export_scenario,
    generate_skewed_scenario,
    generate_uniform_scenario,
    scenario_size,
)

SUMMARY_HEADER = [
    "config",
    "strategy",
    "cores",
    "intensity",
    "metric",
    "mean",
    "p50",
    "p75",
    "p95",
    "p99",
    "max_c",
    "cold_starts",
]
FAIRNESS_HEADER = [
    "config",
    "strategy",
    "function",
    "count",
    "mean",
    "p50",
    "p75",
    "p95",
    "p99",
]
CLUSTER_HEADER = [
    "config",
    "strategy",
    "nodes",
    "cores_per_node",
    "total_requests",
    "metric",
    "mean",
    "p50",
    "p75",
    "p95",
    "p99",
    "max_c",
    "cold_starts",
]
PLOTDATA_HEADER = [
    "config",
    "strategy",
    "cores",
    "intensity",
    "metric",
    "q1",
    "median",
    "q3",
    "whisker_low",
    "whisker_high",
    "mean",
]

ALL_STRATEGIES = tuple(Strategy)


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    out_dir: str = "results"
    seed: int = 1
    repetitions: int = 5
    window_us: int = DEFAULT_WINDOW_US
    jobs: int = 1
    emit_plotdata: bool = False

    catalog: FunctionCatalog = field(default_factory=default_catalog)
    sampling: str = SAMPLING_DETERMINISTIC

    memory_pool_mb: int = DEFAULT_MEMORY_POOL_MB
    container_memory_mb: int = DEFAULT_CONTAINER_MEMORY_MB
    cold_start_us: int = DEFAULT_COLD_START_US
    cold_start_mode: str = COLD_START_CONSTANT
    prewarm_count: int = 0
    estimator_window_us: int = 60_000_000
    window_count_mode: str = "receipts"
    context_switch_overhead: float = 0.0

    # desk-scale defaults keep a full default matrix in CI-friendly time
    matrix_cores: tuple[int, ...] = (4, 8)
    matrix_intensities: tuple[int, ...] = (30, 60)
    matrix_strategies: tuple[Strategy, ...] = ALL_STRATEGIES

    fairness_cores: int = 10
    fairness_intensity: int = 90
    pinned_function: str = "dna-visualisation"
    pinned_count: int = 10
    fairness_strategies: tuple[Strategy, ...] = (
        Strategy.BASELINE,
        Strategy.FIFO,
        Strategy.SEPT,
        Strategy.FC,
    )

    cluster_node_counts: tuple[int, ...] = (1, 2, 3, 4)
    cores_per_node: int = 18
    total_requests: int = 2376
    cluster_strategies: tuple[Strategy, ...] = (Strategy.BASELINE, Strategy.FC)
    balancer: str = BALANCER_ROUND_ROBIN
    network_delay_us: int = 0

    def validate(self) -> None:
        if self.repetitions < 1:
            raise ConfigError("experiment.repetitions: must be >= 1")
        if self.jobs < 1:
            raise ConfigError("experiment.jobs: must be >= 1")
        if self.window_us <= 0:
            raise ConfigError("experiment.window_ms: must be positive")
        if self.sampling not in SAMPLING_MODES:
            raise ConfigError(f"workload.sampling: unknown mode {self.sampling!r}")
        if self.cold_start_mode not in (COLD_START_CONSTANT, COLD_START_UNIFORM):
            raise ConfigError(f"node.cold_start_mode: unknown mode {self.cold_start_mode!r}")
        if self.balancer not in BALANCERS:
            raise ConfigError(f"cluster.balancer: unknown balancer {self.balancer!r}")
        if self.pinned_function not in self.catalog.names():
            raise ConfigError(
                f"fairness.pinned_function: {self.pinned_function!r} not in catalog"
            )
        for cores in self.matrix_cores:
            if cores < 1:
                raise ConfigError("matrix.cores: entries must be >= 1")
        for v in self.matrix_intensities:
            if v < 0 or v % 10:
                raise ConfigError("matrix.intensities: entries must be multiples of 10")
        if self.fairness_cores < 1:
            raise ConfigError("fairness.cores: must be >= 1")
        if self.fairness_intensity < 0 or self.fairness_intensity % 10:
            raise ConfigError("fairness.intensity: must be a non-negative multiple of 10")
        if self.pinned_count < 0:
            raise ConfigError("fairness.pinned_count: must be >= 0")
        if self.total_requests % len(self.catalog):
            raise ConfigError(
                "cluster.total_requests: must be divisible by the catalog size"
            )
        for n in self.cluster_node_counts:
            if n < 1:
                raise ConfigError("cluster.node_counts: entries must be >= 1")

    def node_config_for(self, strategy: Strategy, cores: int) -> NodeConfig:
        """Node settings for one strategy: the stock scheduler keeps the
        memory-sharing model, every other strategy runs core-pinned."""
        model = (
            ExecutionModel.MEMORY_SHARING
            if strategy is Strategy.BASELINE
            else ExecutionModel.CORE_PINNED
        )
        return NodeConfig(
            cores=cores,
            memory_pool_mb=self.memory_pool_mb,
            container_memory_mb=self.container_memory_mb,
            cold_start_us=self.cold_start_us,
            cold_start_mode=self.cold_start_mode,
            model=model,
            strategy=strategy,
            prewarm_count=self.prewarm_count,
            sampling=self.sampling,
            estimator_window_us=self.estimator_window_us,
            window_count_mode=self.window_count_mode,
            context_switch_overhead=self.context_switch_overhead,
        )


@dataclass
class ExperimentResult:
    summary_path: str
    record_paths: list[str]
    failures: list[tuple[str, str]]
    plotdata_path: str | None = None


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def _seconds(us: float) -> float:
    return us / 1_000_000.0


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _summary_rows(
    config_name: str,
    strategy: Strategy,
    cores: int,
    intensity: int,
    records: list[CompletionRecord],
    stretch_config: StretchConfig,
) -> list[list]:
    responses = [response_time_us(r) for r in records]
    stretches = [stretch(r, stretch_config) for r in records]
    max_c = _seconds(max(r.completion_us for r in records))
    cold = cold_start_total(records)
    rows = []
    for metric, values, scale in (
        ("response_time", responses, _seconds),
        ("stretch", stretches, lambda v: v),
    ):
        s = summarize(values)
        rows.append(
            [
                config_name,
                strategy.value,
                cores,
                intensity,
                metric,
                _fmt(scale(s.mean)),
                _fmt(scale(s.p50)),
                _fmt(scale(s.p75)),
                _fmt(scale(s.p95)),
                _fmt(scale(s.p99)),
                _fmt(max_c),
                cold,
            ]
        )
    return rows


def _plotdata_rows(
    config_name: str,
    strategy: Strategy,
    cores: int,
    intensity: int,
    records: list[CompletionRecord],
    stretch_config: StretchConfig,
) -> list[list]:
    rows = []
    for metric, values, scale in (
        ("response_time", [response_time_us(r) for r in records], _seconds),
        ("stretch", [stretch(r, stretch_config) for r in records], lambda v: v),
    ):
        b = boxplot_stats(values)
        rows.append(
            [
                config_name,
                strategy.value,
                cores,
                intensity,
                metric,
                _fmt(scale(b.q1)),
                _fmt(scale(b.median)),
                _fmt(scale(b.q3)),
                _fmt(scale(b.whisker_low)),
                _fmt(scale(b.whisker_high)),
                _fmt(scale(b.mean)),
            ]
        )
    return rows


def _run_matrix_cell(config: ExperimentConfig, cores: int, intensity: int):
    """All repetitions and strategies of one (cores, intensity) cell."""
    stretch_config = StretchConfig.from_catalog(config.catalog)
    pooled: dict[Strategy, list[CompletionRecord]] = {s: [] for s in config.matrix_strategies}
    record_paths = []
    for rep in range(config.repetitions):
        seed = config.seed + rep
        scenario = generate_uniform_scenario(
            config.catalog, cores, intensity, config.window_us, seed
        )
        scenario_path = os.path.join(
            config.out_dir, f"scenario_c{cores}_v{intensity}_rep{rep}.csv"
        )
        export_scenario(scenario, config.catalog, scenario_path)
        record_paths.append(scenario_path)
        for strategy in config.matrix_strategies:
            records = run_single(
                config.node_config_for(strategy, cores), scenario, config.catalog
            )
            path = os.path.join(
                config.out_dir,
                f"records_c{cores}_v{intensity}_{strategy.value}_rep{rep}.csv",
            )
            export_records(records, path)
            record_paths.append(path)
            pooled[strategy].extend(records)
    summary_rows = []
    plot_rows = []
    for strategy in config.matrix_strategies:
        summary_rows.extend(
            _summary_rows(config.name, strategy, cores, intensity, pooled[strategy], stretch_config)
        )
        if config.emit_plotdata:
            plot_rows.extend(
                _plotdata_rows(
                    config.name, strategy, cores, intensity, pooled[strategy], stretch_config
                )
            )
    return summary_rows, plot_rows, record_paths


def run_matrix(config: ExperimentConfig) -> ExperimentResult:
    """Run the full (cores x intensity x strategy x repetition) grid."""
    config.validate()
    os.makedirs(config.out_dir, exist_ok=True)
    cells = [(c, v) for c in config.matrix_cores for v in config.matrix_intensities]
    summary_rows: list[list] = []
    plot_rows: list[list] = []
    record_paths: list[str] = []
    failures: list[tuple[str, str]] = []
    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        futures = {pool.submit(_run_matrix_cell, config, c, v): (c, v) for c, v in cells}
        for future, (c, v) in futures.items():
            try:
                rows, plots, paths = future.result()
            except SimulatorError as exc:
                failures.append((f"c{c}_v{v}", str(exc)))
                continue
            summary_rows.extend(rows)
            plot_rows.extend(plots)
            record_paths.extend(paths)
    key = lambda row: (row[2], row[3], row[1], row[4])  # cores, intensity, strategy, metric
    summary_rows.sort(key=key)
    summary_path = os.path.join(config.out_dir, "summary.csv")
    _write_csv(summary_path, SUMMARY_HEADER, summary_rows)
    plotdata_path = None
    if config.emit_plotdata:
        plot_rows.sort(key=key)
        plotdata_path = os.path.join(config.out_dir, "plotdata.csv")
        _write_csv(plotdata_path, PLOTDATA_HEADER, plot_rows)
    return ExperimentResult(summary_path, sorted(record_paths), failures, plotdata_path)


def skewed_counts(
    catalog: FunctionCatalog, pinned_function: str, pinned_count: int, total: int
) -> dict[str, int]:
    """Pin one function's call count; spread the rest evenly over the others."""
    catalog.index_of(pinned_function)  # raises UnknownFunction early
    if pinned_count > total:
        raise ConfigError("fairness.pinned_count: exceeds the scenario size")
    others = len(catalog) - 1
    remaining = total - pinned_count
    base, extra = divmod(remaining, others)
    counts: dict[str, int] = {}
    position = 0
    for profile in catalog:
        if profile.name == pinned_function:
            counts[profile.name] = pinned_count
        else:
            counts[profile.name] = base + (1 if position < extra else 0)
            position += 1
    return counts


def fairness_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Skewed call-frequency run; per-function stretch summaries per strategy."""
    config.validate()
    os.makedirs(config.out_dir, exist_ok=True)
    stretch_config = StretchConfig.from_catalog(config.catalog)
    total = scenario_size(config.fairness_cores, config.fairness_intensity)
    counts = skewed_counts(config.catalog, config.pinned_function, config.pinned_count, total)
    pooled: dict[Strategy, list[CompletionRecord]] = {s: [] for s in config.fairness_strategies}
    record_paths = []
    failures: list[tuple[str, str]] = []
    for rep in range(config.repetitions):
        seed = config.seed + rep
        scenario = generate_skewed_scenario(config.catalog, counts, config.window_us, seed)
        scenario_path = os.path.join(config.out_dir, f"scenario_fairness_rep{rep}.csv")
        export_scenario(scenario, config.catalog, scenario_path)
        record_paths.append(scenario_path)
        for strategy in config.fairness_strategies:
            try:
                records = run_single(
                    config.node_config_for(strategy, config.fairness_cores),
                    scenario,
                    config.catalog,
                )
            except SimulatorError as exc:
                failures.append((f"fairness_{strategy.value}_rep{rep}", str(exc)))
                continue
            path = os.path.join(
                config.out_dir, f"records_fairness_{strategy.value}_rep{rep}.csv"
            )
            export_records(records, path)
            record_paths.append(path)
            pooled[strategy].extend(records)
    rows = []
    for strategy in config.fairness_strategies:
        groups: dict[str, list[float]] = {name: [] for name in config.catalog.names()}
        for record in pooled[strategy]:
            groups[record.function].append(stretch(record, stretch_config))
        for name in config.catalog.names():
            values = groups[name]
            if not values:
                continue
            s = summarize(values)
            rows.append(
                [
                    config.name,
                    strategy.value,
                    name,
                    s.count,
                    _fmt(s.mean),
                    _fmt(s.p50),
                    _fmt(s.p75),
                    _fmt(s.p95),
                    _fmt(s.p99),
                ]
            )
    summary_path = os.path.join(config.out_dir, "fairness_summary.csv")
    _write_csv(summary_path, FAIRNESS_HEADER, rows)
    return ExperimentResult(summary_path, sorted(record_paths), failures)


def cluster_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Constant total load over a shrinking set of workers."""
    config.validate()
    os.makedirs(config.out_dir, exist_ok=True)
    per_function = config.total_requests // len(config.catalog)
    counts = {name: per_function for name in config.catalog.names()}
    pooled: dict[tuple[int, Strategy], list[CompletionRecord]] = {
        (n, s): [] for n in config.cluster_node_counts for s in config.cluster_strategies
    }
    record_paths = []
    failures: list[tuple[str, str]] = []
    for rep in range(config.repetitions):
        seed = config.seed + rep
        scenario = generate_skewed_scenario(config.catalog, counts, config.window_us, seed)
        scenario_path = os.path.join(config.out_dir, f"scenario_cluster_rep{rep}.csv")
        export_scenario(scenario, config.catalog, scenario_path)
        record_paths.append(scenario_path)
        for node_count in config.cluster_node_counts:
            for strategy in config.cluster_strategies:
                node_config = config.node_config_for(strategy, config.cores_per_node)
                cluster = ClusterConfig(
                    node_configs=(node_config,) * node_count,
                    balancer=config.balancer,
                    network_delay_us=config.network_delay_us,
                )
                try:
                    records = run_cluster(cluster, scenario, config.catalog)
                except SimulatorError as exc:
                    failures.append(
                        (f"cluster_n{node_count}_{strategy.value}_rep{rep}", str(exc))
                    )
                    continue
                path = os.path.join(
                    config.out_dir,
                    f"records_cluster_n{node_count}_{strategy.value}_rep{rep}.csv",
                )
                export_records(records, path)
                record_paths.append(path)
                pooled[(node_count, strategy)].extend(records)
    rows = []
    for node_count in config.cluster_node_counts:
        for strategy in config.cluster_strategies:
            records = pooled[(node_count, strategy)]
            if not records:
                continue
            s = summarize([response_time_us(r) for r in records])
            rows.append(
                [
                    config.name,
                    strategy.value,
                    node_count,
                    config.cores_per_node,
                    config.total_requests,
                    "response_time",
                    _fmt(_seconds(s.mean)),
                    _fmt(_seconds(s.p50)),
                    _fmt(_seconds(s.p75)),
                    _fmt(_seconds(s.p95)),
                    _fmt(_seconds(s.p99)),
                    _fmt(_seconds(max(r.completion_us for r in records))),
                    cold_start_total(records),
                ]
            )
    summary_path = os.path.join(config.out_dir, "cluster_summary.csv")
    _write_csv(summary_path, CLUSTER_HEADER, rows)
    return ExperimentResult(summary_path, sorted(record_paths), failures)
