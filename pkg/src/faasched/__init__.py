"""Deterministic discrete-event simulator for node-level FaaS scheduling.

Models a burst of function calls against worker nodes that manage warm
container pools, and compares queueing strategies (arrival order,
shortest-expected-processing-time, expected/recent completion time, and
a fairness rule weighting recent per-function usage) under two execution
models: OS-shared cores with memory-bounded concurrency, and one pinned
core per running container.
"""

from .catalog import FunctionCatalog, FunctionProfile, default_catalog, load_catalog, save_catalog
from .engine import (
    BALANCER_LEAST_QUEUED,
    BALANCER_ROUND_ROBIN,
    ClusterConfig,
    Engine,
    EventKind,
    SimEvent,
    export_records,
    run_cluster,
    run_single,
)
from .errors import (
    ClockRegression,
    ConfigError,
    EmptyInput,
    InvalidIntensity,
    MissingBaseline,
    NotApplicable,
    SimulationStuck,
    SimulatorError,
    UnknownFunction,
    WarmupInfeasible,
)
from .estimator import Estimator
from .metrics import (
    BoxplotStats,
    CompletionRecord,
    StatSummary,
    StretchConfig,
    boxplot_stats,
    cold_start_total,
    per_function_summary,
    response_time_us,
    stretch,
    summarize,
)
from .node import Container, ExecutionModel, Node, NodeConfig, OutcomeKind
from .policy import PriorityQueue, PrioritizedRequest, Strategy, compute_priority
from .workload import (
    Request,
    Scenario,
    generate_skewed_scenario,
    generate_uniform_scenario,
    sample_processing_time,
    scenario_size,
)

__version__ = "0.1.0"
