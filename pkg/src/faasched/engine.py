"""Discrete-event kernel: global clock, event queue, and the cluster driver.

Events are totally ordered by (time, kind, sequence).  At equal
timestamps completions are processed before arrivals so a finishing
container frees its slot before new work is placed, matching the worker
loop this simulates; the scheduling-time sequence number breaks the
remaining ties, which makes every run reproducible.

A single engine is strictly sequential.  Many engines can run in
parallel threads because they share nothing.
"""

from __future__ import annotations

import csv
import enum
import heapq
import random
from dataclasses import dataclass

from .catalog import FunctionCatalog
from .errors import SimulationStuck
from .metrics import CompletionRecord
from .node import Node, NodeConfig
from .workload import Scenario

BALANCER_ROUND_ROBIN = "round-robin"
BALANCER_LEAST_QUEUED = "least-queued"
BALANCERS = (BALANCER_ROUND_ROBIN, BALANCER_LEAST_QUEUED)

RECORD_CSV_HEADER = ["request_id", "function", "r_us", "r_prime_us", "p_us", "c_us", "cold", "node"]


class EventKind(enum.IntEnum):
    # Numeric value doubles as the same-timestamp processing rank.
    EXECUTION_DONE = 0
    COLD_START_DONE = 1
    RATE_RECOMPUTE = 2
    ARRIVAL = 3


@dataclass(frozen=True)
class SimEvent:
    time_us: int
    seq: int
    kind: EventKind
    payload: tuple


@dataclass(frozen=True)
class ClusterConfig:
    node_configs: tuple[NodeConfig, ...]
    balancer: str = BALANCER_ROUND_ROBIN
    network_delay_us: int = 0

    def __post_init__(self) -> None:
        if not self.node_configs:
            raise ValueError("a cluster needs at least one node")
        if self.balancer not in BALANCERS:
            raise ValueError(f"unknown balancer {self.balancer!r}")
        if self.network_delay_us < 0:
            raise ValueError("network delay must be >= 0")


class Engine:
    """Runs one scenario against one or more nodes."""

    def __init__(
        self,
        cluster: ClusterConfig,
        scenario: Scenario,
        catalog: FunctionCatalog,
        max_events: int | None = None,
        on_event=None,
        warm_up: bool = True,
    ) -> None:
        self.cluster = cluster
        self.scenario = scenario
        self.catalog = catalog
        self.clock_us = 0
        self.records: list[CompletionRecord] = []
        self._heap: list[tuple[int, int, int, SimEvent]] = []
        self._next_event_seq = 0
        self._on_event = on_event
        self._warm_up = warm_up
        self._rr_next = 0
        self._events_processed = 0
        self.max_events = (
            max_events if max_events is not None else max(100_000, 2_000 * len(scenario))
        )
        self.nodes = [
            self._make_node(config, node_id) for node_id, config in enumerate(cluster.node_configs)
        ]

    def _make_node(self, config: NodeConfig, node_id: int) -> Node:
        # One private sampling stream per node, derived from the scenario
        # seed, so arrival sequences stay shared across strategies while
        # node-local draws stay independent.
        rng = random.Random(f"{self.scenario.seed}/node/{node_id}")
        return Node(
            config,
            self.catalog,
            node_id=node_id,
            rng=rng,
            schedule_cold_done=lambda t, cid, nid=node_id: self.schedule(
                t, EventKind.COLD_START_DONE, (nid, cid)
            ),
            schedule_execution_done=lambda t, cid, epoch, nid=node_id: self.schedule(
                t, EventKind.EXECUTION_DONE, (nid, cid, epoch)
            ),
            completion_sink=self.records,
        )

    def schedule(self, time_us: int, kind: EventKind, payload: tuple) -> None:
        event = SimEvent(time_us=time_us, seq=self._next_event_seq, kind=kind, payload=payload)
        self._next_event_seq += 1
        heapq.heappush(self._heap, (event.time_us, int(event.kind), event.seq, event))

    def _pick_node(self) -> Node:
        if self.cluster.balancer == BALANCER_ROUND_ROBIN:
            node = self.nodes[self._rr_next % len(self.nodes)]
            self._rr_next += 1
            return node
        return min(self.nodes, key=lambda n: (n.queue_length, n.node_id))

    def run(self) -> list[CompletionRecord]:
        if self._warm_up:
            for node in self.nodes:
                node.warm_up()
        delay = self.cluster.network_delay_us
        for request in self.scenario.requests():
            self.schedule(request.gen_us + delay, EventKind.ARRIVAL, (request,))
        while self._heap:
            self._events_processed += 1
            if self._events_processed > self.max_events:
                raise SimulationStuck(
                    f"event budget of {self.max_events} exceeded at t={self.clock_us}us"
                )
            _, _, _, event = heapq.heappop(self._heap)
            if event.time_us < self.clock_us:
                raise SimulationStuck("event popped out of causal order")
            self.clock_us = event.time_us
            self._process(event)
            if self._on_event is not None:
                self._on_event(self, event)
        if len(self.records) != len(self.scenario):
            raise SimulationStuck(
                f"run drained with {len(self.records)} of {len(self.scenario)} "
                "requests completed"
            )
        self.records.sort(key=lambda r: r.request_id)
        return self.records

    def _process(self, event: SimEvent) -> None:
        if event.kind is EventKind.ARRIVAL:
            (request,) = event.payload
            node = self._pick_node()
            node.submit(request, self.clock_us)
        elif event.kind is EventKind.COLD_START_DONE:
            node_id, container_id = event.payload
            self.nodes[node_id].on_cold_start_done(container_id, self.clock_us)
        elif event.kind is EventKind.EXECUTION_DONE:
            node_id, container_id, epoch = event.payload
            self.nodes[node_id].handle_execution_done(container_id, epoch, self.clock_us)
        elif event.kind is EventKind.RATE_RECOMPUTE:
            (node_id,) = event.payload
            self.nodes[node_id].recompute_rates(self.clock_us)


def run_cluster(
    cluster: ClusterConfig,
    scenario: Scenario,
    catalog: FunctionCatalog,
    max_events: int | None = None,
    on_event=None,
    warm_up: bool = True,
) -> list[CompletionRecord]:
    """Run a scenario on a cluster; returns records sorted by request id."""
    engine = Engine(
        cluster, scenario, catalog, max_events=max_events, on_event=on_event, warm_up=warm_up
    )
    return engine.run()


def run_single(
    node_config: NodeConfig,
    scenario: Scenario,
    catalog: FunctionCatalog,
    max_events: int | None = None,
    on_event=None,
    warm_up: bool = True,
) -> list[CompletionRecord]:
    """Single-node run: a degenerate one-node cluster with no network delay."""
    cluster = ClusterConfig(node_configs=(node_config,))
    return run_cluster(
        cluster, scenario, catalog, max_events=max_events, on_event=on_event, warm_up=warm_up
    )


class EventTraceRecorder:
    """Optional per-event trace for debugging node behaviour.

    Pass ``recorder.observe`` as the engine's ``on_event`` hook, then
    ``write`` the collected rows:
    ``time_us,event,container,function,request_id``.

    Rows are captured after the event is applied, so a completion row
    names the container and function while the finished request itself
    lives in the records export.
    """

    def __init__(self) -> None:
        self.rows: list[list] = []

    def observe(self, engine: Engine, event: SimEvent) -> None:
        container = ""
        function = ""
        request_id = ""
        if event.kind is EventKind.ARRIVAL:
            (request,) = event.payload
            function = engine.catalog[request.function_index].name
            request_id = request.request_id
        elif event.kind in (EventKind.COLD_START_DONE, EventKind.EXECUTION_DONE):
            node_id, container_id = event.payload[0], event.payload[1]
            container = container_id
            node = engine.nodes[node_id]
            live = node.containers.get(container_id)
            if live is not None and live.function is not None:
                function = engine.catalog[live.function].name
            execution = node.busy.get(container_id) or node.cold_pending.get(container_id)
            if execution is not None:
                request_id = execution.queued.request.request_id
        self.rows.append(
            [event.time_us, event.kind.name.lower(), container, function, request_id]
        )

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["time_us", "event", "container", "function", "request_id"])
            writer.writerows(self.rows)


def export_records(records: list[CompletionRecord], path: str) -> None:
    """Write completion records as CSV for downstream analysis."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(RECORD_CSV_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.request_id,
                    r.function,
                    r.gen_us,
                    r.receipt_us,
                    r.work_us,
                    r.completion_us,
                    int(r.cold),
                    r.node_id,
                ]
            )
