"""Command-line experiment driver.

Usage:
    faasched matrix   [--config exp.ini] [--cores 4,8] [--intensity 30,60] ...
    faasched fairness [--config exp.ini] ...
    faasched cluster  [--config exp.ini] [--nodes 1,2,3,4] ...

Configuration comes from an INI file (sections: experiment, workload,
node, matrix, fairness, cluster) with command-line flags overriding
individual values.  Exit codes: 0 success, 2 configuration error,
3 simulation error.
"""

from __future__ import annotations

import argparse
import configparser
import sys

from .catalog import load_catalog
from .errors import ConfigError, SimulatorError
from .experiments import (
    ExperimentConfig,
    cluster_experiment,
    fairness_experiment,
    run_matrix,
)
from .policy import Strategy

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3

_MS = 1_000  # config files use milliseconds; the package runs on microseconds


def _parse_int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: expected an integer, got {raw!r}") from None


def _parse_float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: expected a number, got {raw!r}") from None


def _parse_int_list(section: str, key: str, raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in raw.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"{section}.{key}: expected comma-separated integers, got {raw!r}") from None


def _parse_strategies(section: str, key: str, raw: str) -> tuple[Strategy, ...]:
    try:
        return tuple(Strategy.parse(part) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: {exc}") from None


def load_experiment_config(path: str | None) -> ExperimentConfig:
    """Build an ExperimentConfig from an INI file; missing keys keep defaults."""
    config = ExperimentConfig()
    if path is None:
        return config
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path!r} not found or unreadable")

    def get(section: str, key: str) -> str | None:
        return parser.get(section, key, fallback=None)

    if (value := get("experiment", "name")) is not None:
        config.name = value
    if (value := get("experiment", "out_dir")) is not None:
        config.out_dir = value
    if (value := get("experiment", "seed")) is not None:
        config.seed = _parse_int("experiment", "seed", value)
    if (value := get("experiment", "repetitions")) is not None:
        config.repetitions = _parse_int("experiment", "repetitions", value)
    if (value := get("experiment", "window_ms")) is not None:
        config.window_us = _parse_int("experiment", "window_ms", value) * _MS
    if (value := get("experiment", "jobs")) is not None:
        config.jobs = _parse_int("experiment", "jobs", value)

    if (value := get("workload", "catalog")) is not None and value != "builtin":
        try:
            config.catalog = load_catalog(value)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"workload.catalog: {exc}") from None
    if (value := get("workload", "sampling")) is not None:
        config.sampling = value.strip()
    if (value := get("workload", "subtract_overhead_ms")) is not None:
        config.catalog = config.catalog.with_overhead_removed(
            _parse_int("workload", "subtract_overhead_ms", value)
        )

    if (value := get("node", "memory_pool_mb")) is not None:
        config.memory_pool_mb = _parse_int("node", "memory_pool_mb", value)
    if (value := get("node", "container_memory_mb")) is not None:
        config.container_memory_mb = _parse_int("node", "container_memory_mb", value)
    if (value := get("node", "cold_start_ms")) is not None:
        config.cold_start_us = _parse_int("node", "cold_start_ms", value) * _MS
    if (value := get("node", "cold_start_mode")) is not None:
        config.cold_start_mode = value.strip()
    if (value := get("node", "prewarm")) is not None:
        config.prewarm_count = _parse_int("node", "prewarm", value)
    if (value := get("node", "estimator_window_ms")) is not None:
        config.estimator_window_us = _parse_int("node", "estimator_window_ms", value) * _MS
    if (value := get("node", "window_count_mode")) is not None:
        config.window_count_mode = value.strip()
    if (value := get("node", "context_switch_overhead")) is not None:
        config.context_switch_overhead = _parse_float("node", "context_switch_overhead", value)

    if (value := get("matrix", "cores")) is not None:
        config.matrix_cores = _parse_int_list("matrix", "cores", value)
    if (value := get("matrix", "intensities")) is not None:
        config.matrix_intensities = _parse_int_list("matrix", "intensities", value)
    if (value := get("matrix", "strategies")) is not None:
        config.matrix_strategies = _parse_strategies("matrix", "strategies", value)

    if (value := get("fairness", "cores")) is not None:
        config.fairness_cores = _parse_int("fairness", "cores", value)
    if (value := get("fairness", "intensity")) is not None:
        config.fairness_intensity = _parse_int("fairness", "intensity", value)
    if (value := get("fairness", "pinned_function")) is not None:
        config.pinned_function = value.strip()
    if (value := get("fairness", "pinned_count")) is not None:
        config.pinned_count = _parse_int("fairness", "pinned_count", value)
    if (value := get("fairness", "strategies")) is not None:
        config.fairness_strategies = _parse_strategies("fairness", "strategies", value)

    if (value := get("cluster", "node_counts")) is not None:
        config.cluster_node_counts = _parse_int_list("cluster", "node_counts", value)
    if (value := get("cluster", "cores_per_node")) is not None:
        config.cores_per_node = _parse_int("cluster", "cores_per_node", value)
    if (value := get("cluster", "total_requests")) is not None:
        config.total_requests = _parse_int("cluster", "total_requests", value)
    if (value := get("cluster", "strategies")) is not None:
        config.cluster_strategies = _parse_strategies("cluster", "strategies", value)
    if (value := get("cluster", "balancer")) is not None:
        config.balancer = value.strip()
    if (value := get("cluster", "network_delay_ms")) is not None:
        config.network_delay_us = _parse_int("cluster", "network_delay_ms", value) * _MS

    return config


def _apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> None:
    if args.out_dir is not None:
        config.out_dir = args.out_dir
    if args.seed is not None:
        config.seed = args.seed
    if args.reps is not None:
        config.repetitions = args.reps
    if args.jobs is not None:
        config.jobs = args.jobs
    if args.mode is not None:
        config.sampling = args.mode
    if args.emit_plotdata:
        config.emit_plotdata = True
    if args.strategy is not None:
        strategies = _parse_strategies("cli", "--strategy", args.strategy)
        config.matrix_strategies = strategies
        config.fairness_strategies = strategies
        config.cluster_strategies = strategies
    if args.cores is not None:
        cores = _parse_int_list("cli", "--cores", args.cores)
        config.matrix_cores = cores
        if len(cores) == 1:
            config.fairness_cores = cores[0]
            config.cores_per_node = cores[0]
    if args.intensity is not None:
        intensities = _parse_int_list("cli", "--intensity", args.intensity)
        config.matrix_intensities = intensities
        if len(intensities) == 1:
            config.fairness_intensity = intensities[0]
    if args.nodes is not None:
        config.cluster_node_counts = _parse_int_list("cli", "--nodes", args.nodes)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faasched",
        description="Deterministic node-level scheduling simulator for FaaS bursts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("matrix", "run the (cores x intensity x strategy) grid"),
        ("fairness", "run the skewed call-frequency scenario"),
        ("cluster", "run the fixed load over 1..N workers"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="INI configuration file")
        p.add_argument("--out-dir", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--reps", type=int, default=None)
        p.add_argument("--jobs", type=int, default=None, help="parallel worker threads for cells")
        p.add_argument("--strategy", default=None, help="comma-separated strategy list")
        p.add_argument("--cores", default=None, help="comma-separated core counts")
        p.add_argument("--intensity", default=None, help="comma-separated intensities")
        p.add_argument("--nodes", default=None, help="comma-separated cluster node counts")
        p.add_argument(
            "--mode",
            default=None,
            choices=["deterministic-median", "lognormal"],
            help="processing-time sampling mode",
        )
        p.add_argument("--emit-plotdata", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_experiment_config(args.config)
        _apply_overrides(config, args)
        config.validate()
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    driver = {"matrix": run_matrix, "fairness": fairness_experiment, "cluster": cluster_experiment}
    try:
        result = driver[args.command](config)
    except SimulatorError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    if result.failures:
        for cell, message in result.failures:
            print(f"cell {cell} failed: {message}", file=sys.stderr)
        return EXIT_SIMULATION
    print(f"wrote {result.summary_path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
