"""One worker node: container pools, dispatch, cold starts and execution.

Two execution models are supported.  ``MEMORY_SHARING`` reproduces the
stock scheduler: any number of containers may run at once (bounded only
by the memory pool) and the OS time-slices them, modelled as egalitarian
processor sharing at rate ``min(1, cores / busy)``.  ``CORE_PINNED``
reproduces the alternative: at most ``cores`` containers execute at any
moment, each pinned to a whole core, so running work always progresses
at rate 1 and is never preempted.

A node is a single logical actor driven by the engine's event loop; it
never mutates state outside that loop.
"""

from __future__ import annotations

import enum
import math
import random
from collections import deque
from dataclasses import dataclass

from .catalog import FunctionCatalog
from .errors import NotApplicable, WarmupInfeasible
from .estimator import (
    COUNT_COMPLETIONS,
    COUNT_RECEIPTS,
    DEFAULT_ESTIMATOR_WINDOW_US,
    Estimator,
)
from .metrics import CompletionRecord
from .policy import PriorityQueue, Strategy, compute_priority
from .workload import (
    SAMPLING_DETERMINISTIC,
    SAMPLING_MODES,
    Request,
    sample_processing_time,
)

DEFAULT_MEMORY_POOL_MB = 32_768
DEFAULT_CONTAINER_MEMORY_MB = 256
DEFAULT_COLD_START_US = 500_000

COLD_START_CONSTANT = "constant"
COLD_START_UNIFORM = "uniform"
COLD_START_UNIFORM_LOW_US = 500_000
COLD_START_UNIFORM_HIGH_US = 2_000_000

# Completion events within half a microsecond of zero remaining work are
# treated as exact; processor-sharing reschedules use ceil, so a current
# event can be late by strictly less than one microsecond.
_REMAINING_EPS = 0.5


class ExecutionModel(enum.Enum):
    MEMORY_SHARING = "memory-sharing"
    CORE_PINNED = "core-pinned"

    @classmethod
    def parse(cls, text: str) -> "ExecutionModel":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown execution model {text!r}; expected one of "
                f"{', '.join(m.value for m in cls)}"
            ) from None


class ContainerState(enum.Enum):
    PREWARM = "prewarm"
    FREE = "free"
    BUSY = "busy"
    COLD_STARTING = "cold-starting"


@dataclass
class Container:
    container_id: int
    function: int | None  # None while in the prewarm pool
    state: ContainerState
    memory_mb: int
    last_used_us: int = 0


class OutcomeKind(enum.Enum):
    WARM_START = "warm-start"
    COLD_START_PREWARM = "cold-start-prewarm"
    COLD_START_NEW = "cold-start-new"
    COLD_START_EVICTION = "cold-start-after-eviction"
    QUEUED = "queued"


@dataclass(frozen=True)
class DispatchOutcome:
    kind: OutcomeKind
    container_id: int | None = None
    evicted: tuple[int, ...] = ()

    @property
    def is_cold(self) -> bool:
        return self.kind in (
            OutcomeKind.COLD_START_PREWARM,
            OutcomeKind.COLD_START_NEW,
            OutcomeKind.COLD_START_EVICTION,
        )


@dataclass(frozen=True)
class NodeConfig:
    cores: int
    memory_pool_mb: int = DEFAULT_MEMORY_POOL_MB
    container_memory_mb: int = DEFAULT_CONTAINER_MEMORY_MB
    cold_start_us: int = DEFAULT_COLD_START_US
    cold_start_mode: str = COLD_START_CONSTANT
    model: ExecutionModel = ExecutionModel.CORE_PINNED
    strategy: Strategy = Strategy.FIFO
    prewarm_count: int = 0
    sampling: str = SAMPLING_DETERMINISTIC
    estimator_window_us: int = DEFAULT_ESTIMATOR_WINDOW_US
    window_count_mode: str = COUNT_RECEIPTS
    context_switch_overhead: float = 0.0

    def __post_init__(self) -> None:
        if self.cores < 1:
            raise ValueError("cores must be >= 1")
        if self.memory_pool_mb < self.container_memory_mb:
            raise ValueError("memory pool must hold at least one container")
        if self.cold_start_us <= 0:
            raise ValueError("cold start duration must be positive")
        if self.cold_start_mode not in (COLD_START_CONSTANT, COLD_START_UNIFORM):
            raise ValueError(f"unknown cold start mode {self.cold_start_mode!r}")
        if self.sampling not in SAMPLING_MODES:
            raise ValueError(f"unknown sampling mode {self.sampling!r}")
        if self.window_count_mode not in (COUNT_RECEIPTS, COUNT_COMPLETIONS):
            raise ValueError(f"unknown window count mode {self.window_count_mode!r}")
        if not 0.0 <= self.context_switch_overhead < 1.0:
            raise ValueError("context switch overhead must be in [0, 1)")
        if self.prewarm_count < 0:
            raise ValueError("prewarm count must be >= 0")


@dataclass
class QueuedCall:
    """A received request waiting for a container.

    ``priority_ms`` is frozen at receipt and never recomputed; the stock
    scheduler leaves it unset and keeps plain arrival order instead.
    """

    request: Request
    receipt_us: int
    sequence: int
    priority_ms: float | None


@dataclass
class Execution:
    """A request bound to a container, cold-starting or running."""

    container_id: int
    queued: QueuedCall
    work_us: int
    remaining_us: float
    cold: bool
    start_us: int = -1
    epoch: int = 0
    dispatch_seq: int = -1


class Node:
    """Container pools plus dispatch logic for a single worker."""

    def __init__(
        self,
        config: NodeConfig,
        catalog: FunctionCatalog,
        node_id: int = 0,
        rng: random.Random | None = None,
        schedule_cold_done=None,
        schedule_execution_done=None,
        completion_sink: list | None = None,
    ) -> None:
        self.config = config
        self.catalog = catalog
        self.node_id = node_id
        self.rng = rng if rng is not None else random.Random(0)
        # Engine callbacks; tests may run a node standalone and drive these.
        self._schedule_cold_done = schedule_cold_done or (lambda t, cid: None)
        self._schedule_execution_done = schedule_execution_done or (lambda t, cid, epoch: None)
        self.records: list = completion_sink if completion_sink is not None else []

        self.estimator = Estimator(
            len(catalog),
            window_us=config.estimator_window_us,
            count_mode=config.window_count_mode,
        )
        self.containers: dict[int, Container] = {}
        self._free_by_fn: dict[int, list[int]] = {i: [] for i in range(len(catalog))}
        self._prewarm_ids: list[int] = []
        self.busy: dict[int, Execution] = {}
        self.cold_pending: dict[int, Execution] = {}
        self.queue = deque() if config.strategy is Strategy.BASELINE else PriorityQueue()

        self.used_memory_mb = 0
        self.cold_start_count = 0
        self.containers_created = 0
        self.core_time_us = 0.0

        self._next_container_id = 0
        self._next_sequence = 0
        self._next_dispatch_seq = 0
        self._next_epoch = 0
        self._rate = 1.0
        self._last_advance_us = 0

        for _ in range(config.prewarm_count):
            if self.used_memory_mb + config.container_memory_mb > config.memory_pool_mb:
                break
            container = self._create_container(None, ContainerState.PREWARM)
            self._prewarm_ids.append(container.container_id)

    # ------------------------------------------------------------------
    # pools and memory

    def _create_container(self, function: int | None, state: ContainerState) -> Container:
        container = Container(
            container_id=self._next_container_id,
            function=function,
            state=state,
            memory_mb=self.config.container_memory_mb,
        )
        self._next_container_id += 1
        self.containers[container.container_id] = container
        self.used_memory_mb += container.memory_mb
        self.containers_created += 1
        return container

    def _remove_container(self, container_id: int) -> None:
        container = self.containers.pop(container_id)
        self.used_memory_mb -= container.memory_mb

    def _free_memory_mb(self) -> int:
        return self.config.memory_pool_mb - self.used_memory_mb

    def _take_matching_free(self, fn: int) -> Container | None:
        pool = self._free_by_fn[fn]
        if not pool:
            return None
        container_id = pool.pop()  # most recently used: keeps cold ones evictable
        return self.containers[container_id]

    def _evict_for_space(self, fn: int, needed_mb: int) -> tuple[int, ...] | None:
        """Evict least-recently-used idle containers of other functions.

        Evicts nothing and returns None when the space cannot be freed.
        """
        deficit = needed_mb - self._free_memory_mb()
        if deficit <= 0:
            return ()
        candidates = [
            c
            for c in self.containers.values()
            if c.state is ContainerState.FREE and c.function != fn
        ]
        candidates.sort(key=lambda c: (c.last_used_us, c.container_id))
        victims: list[Container] = []
        freed = 0
        for candidate in candidates:
            if freed >= deficit:
                break
            victims.append(candidate)
            freed += candidate.memory_mb
        if freed < deficit:
            return None
        for victim in victims:
            self._free_by_fn[victim.function].remove(victim.container_id)
            self._remove_container(victim.container_id)
        return tuple(v.container_id for v in victims)

    def _release_container(self, container: Container, now_us: int) -> None:
        container.state = ContainerState.FREE
        container.last_used_us = now_us
        self._free_by_fn[container.function].append(container.container_id)

    # ------------------------------------------------------------------
    # warm-up

    def warm_up(self) -> int:
        """Pre-bind up to ``cores`` idle containers per function, memory permitting.

        Mirrors the measurement protocol: container initialisation happens
        before the load starts and is excluded from every statistic; the
        estimator stays empty so first calls are still treated as unknown.
        Returns the number of containers created.
        """
        if self.busy or self.cold_pending or len(self.queue) > 0:
            raise WarmupInfeasible("warm-up requires an idle node")
        n_f = len(self.catalog)
        capacity = self._free_memory_mb() // self.config.container_memory_mb
        if capacity < n_f:
            raise WarmupInfeasible(
                f"pool fits only {capacity} containers but the catalog has {n_f} functions"
            )
        created = 0
        for _round in range(self.config.cores):
            for fn in range(n_f):
                if self._free_memory_mb() < self.config.container_memory_mb:
                    return created
                container = self._create_container(fn, ContainerState.FREE)
                self._free_by_fn[fn].append(container.container_id)
                created += 1
        return created

    # ------------------------------------------------------------------
    # request intake

    @property
    def occupied_slots(self) -> int:
        # A cold-starting container already owns its execution slot, so the
        # busy limit can never be overshot when initialisation finishes.
        return len(self.busy) + len(self.cold_pending)

    @property
    def queue_length(self) -> int:
        return len(self.queue)

    def submit(self, request: Request, now_us: int) -> None:
        """Receive one request: log it, freeze its priority, dispatch or queue."""
        fn = request.function_index
        self.estimator.record_receipt(fn, now_us)
        sequence = self._next_sequence
        self._next_sequence += 1
        if self.config.strategy is Strategy.BASELINE:
            priority = None
        else:
            priority = compute_priority(self.config.strategy, fn, now_us, self.estimator)
        item = QueuedCall(request=request, receipt_us=now_us, sequence=sequence, priority_ms=priority)
        self._enqueue(item)
        self._pump(now_us)

    def _enqueue(self, item: QueuedCall) -> None:
        if isinstance(self.queue, deque):
            self.queue.append(item)
        else:
            self.queue.push(item)

    def _requeue_front(self, item: QueuedCall) -> None:
        if isinstance(self.queue, deque):
            self.queue.appendleft(item)
        else:
            self.queue.push(item)  # same (priority, sequence) key: position preserved

    def _dequeue(self) -> QueuedCall | None:
        if isinstance(self.queue, deque):
            return self.queue.popleft() if self.queue else None
        return self.queue.pop_min()

    def _pump(self, now_us: int) -> None:
        """Dispatch queued requests until blocked by slots, memory, or emptiness."""
        while len(self.queue) > 0:
            if (
                self.config.model is ExecutionModel.CORE_PINNED
                and self.occupied_slots >= self.config.cores
            ):
                return
            item = self._dequeue()
            if self.config.model is ExecutionModel.CORE_PINNED:
                outcome = self.dispatch_core_pinned(item, now_us)
            else:
                outcome = self.dispatch_memory_sharing(item, now_us)
            if outcome.kind is OutcomeKind.QUEUED:
                self._requeue_front(item)
                return

    # ------------------------------------------------------------------
    # dispatch cascades

    def dispatch_memory_sharing(self, item: QueuedCall, now_us: int) -> DispatchOutcome:
        """Stock cascade: free pool, prewarm pool, create, evict, queue."""
        if self.config.model is not ExecutionModel.MEMORY_SHARING:
            raise NotApplicable("node is not in the memory-sharing model")
        fn = item.request.function_index
        container = self._take_matching_free(fn)
        if container is not None:
            self._start_warm(container, item, now_us)
            return DispatchOutcome(OutcomeKind.WARM_START, container.container_id)
        if self._prewarm_ids:
            container = self.containers[self._prewarm_ids.pop(0)]
            container.function = fn
            self._begin_cold_start(container, item, now_us)
            return DispatchOutcome(OutcomeKind.COLD_START_PREWARM, container.container_id)
        if self._free_memory_mb() >= self.config.container_memory_mb:
            container = self._create_container(fn, ContainerState.COLD_STARTING)
            self._begin_cold_start(container, item, now_us)
            return DispatchOutcome(OutcomeKind.COLD_START_NEW, container.container_id)
        evicted = self._evict_for_space(fn, self.config.container_memory_mb)
        if evicted:
            container = self._create_container(fn, ContainerState.COLD_STARTING)
            self._begin_cold_start(container, item, now_us)
            return DispatchOutcome(
                OutcomeKind.COLD_START_EVICTION, container.container_id, evicted
            )
        return DispatchOutcome(OutcomeKind.QUEUED)

    def dispatch_core_pinned(self, item: QueuedCall, now_us: int) -> DispatchOutcome:
        """Core-pinned cascade: busy limit first, then warm, create, evict."""
        if self.config.model is not ExecutionModel.CORE_PINNED:
            raise NotApplicable("node is not in the core-pinned model")
        if self.occupied_slots >= self.config.cores:
            return DispatchOutcome(OutcomeKind.QUEUED)
        fn = item.request.function_index
        container = self._take_matching_free(fn)
        if container is not None:
            self._start_warm(container, item, now_us)
            return DispatchOutcome(OutcomeKind.WARM_START, container.container_id)
        if self._free_memory_mb() >= self.config.container_memory_mb:
            container = self._create_container(fn, ContainerState.COLD_STARTING)
            self._begin_cold_start(container, item, now_us)
            return DispatchOutcome(OutcomeKind.COLD_START_NEW, container.container_id)
        evicted = self._evict_for_space(fn, self.config.container_memory_mb)
        if evicted:
            container = self._create_container(fn, ContainerState.COLD_STARTING)
            self._begin_cold_start(container, item, now_us)
            return DispatchOutcome(
                OutcomeKind.COLD_START_EVICTION, container.container_id, evicted
            )
        return DispatchOutcome(OutcomeKind.QUEUED)

    # ------------------------------------------------------------------
    # execution lifecycle

    def _sample_work(self, fn: int) -> int:
        return sample_processing_time(self.catalog[fn], self.config.sampling, self.rng)

    def _cold_delay_us(self) -> int:
        if self.config.cold_start_mode == COLD_START_UNIFORM:
            return self.rng.randint(COLD_START_UNIFORM_LOW_US, COLD_START_UNIFORM_HIGH_US)
        return self.config.cold_start_us

    def _make_execution(self, container: Container, item: QueuedCall, cold: bool) -> Execution:
        work = self._sample_work(item.request.function_index)
        return Execution(
            container_id=container.container_id,
            queued=item,
            work_us=work,
            remaining_us=float(work),
            cold=cold,
        )

    def _start_warm(self, container: Container, item: QueuedCall, now_us: int) -> None:
        container.state = ContainerState.BUSY
        execution = self._make_execution(container, item, cold=False)
        self._begin_execution(execution, now_us)

    def _begin_cold_start(self, container: Container, item: QueuedCall, now_us: int) -> None:
        container.state = ContainerState.COLD_STARTING
        self.cold_start_count += 1
        execution = self._make_execution(container, item, cold=True)
        self.cold_pending[container.container_id] = execution
        self._schedule_cold_done(now_us + self._cold_delay_us(), container.container_id)

    def on_cold_start_done(self, container_id: int, now_us: int) -> None:
        execution = self.cold_pending.pop(container_id)
        container = self.containers[container_id]
        container.state = ContainerState.BUSY
        self._begin_execution(execution, now_us)

    def _begin_execution(self, execution: Execution, now_us: int) -> None:
        execution.start_us = now_us
        execution.dispatch_seq = self._next_dispatch_seq
        self._next_dispatch_seq += 1
        self._advance_work(now_us)
        self.busy[execution.container_id] = execution
        if self.config.model is ExecutionModel.CORE_PINNED:
            # One whole core each, no oversubscription: the finish time is
            # exact at scheduling time and never moves.
            execution.epoch = self._fresh_epoch()
            self._schedule_execution_done(
                now_us + execution.work_us, execution.container_id, execution.epoch
            )
        else:
            self.recompute_rates(now_us)

    def handle_execution_done(self, container_id: int, epoch: int, now_us: int) -> None:
        """Handle a completion event; stale epochs from re-rating are ignored."""
        execution = self.busy.get(container_id)
        if execution is None or execution.epoch != epoch:
            return
        self._advance_work(now_us)
        if execution.remaining_us > _REMAINING_EPS:
            raise RuntimeError(
                f"completion fired with {execution.remaining_us:.3f}us of work left"
            )
        self.on_execution_complete(container_id, now_us)

    def on_execution_complete(self, container_id: int, now_us: int) -> CompletionRecord:
        """Record the finished call, free its container, and refill the slot."""
        self._advance_work(now_us)
        execution = self.busy.pop(container_id)
        container = self.containers[container_id]
        item = execution.queued
        fn = item.request.function_index
        self.estimator.record_completion(fn, execution.work_us, now_us)
        self._release_container(container, now_us)
        record = CompletionRecord(
            request_id=item.request.request_id,
            function=self.catalog[fn].name,
            gen_us=item.request.gen_us,
            receipt_us=item.receipt_us,
            work_us=execution.work_us,
            completion_us=now_us,
            cold=execution.cold,
            node_id=self.node_id,
            start_us=execution.start_us,
            priority_ms=item.priority_ms,
            dispatch_seq=execution.dispatch_seq,
        )
        self.records.append(record)
        if self.config.model is ExecutionModel.MEMORY_SHARING:
            self.recompute_rates(now_us)
        self._pump(now_us)
        return record

    # ------------------------------------------------------------------
    # progress model

    def progress_rate(self, container_id: int) -> float:
        """Current progress rate of an active execution, in (0, 1]."""
        if container_id not in self.busy:
            raise NotApplicable(f"container {container_id} has no active execution")
        return self._rate

    def _current_rate(self) -> float:
        if self.config.model is ExecutionModel.CORE_PINNED:
            return 1.0
        k = len(self.busy)
        if k <= self.config.cores:
            return 1.0
        rate = self.config.cores / k
        if self.config.context_switch_overhead > 0.0:
            rate *= 1.0 - self.config.context_switch_overhead
        return rate

    def _advance_work(self, now_us: int) -> None:
        elapsed = now_us - self._last_advance_us
        if elapsed < 0:
            raise RuntimeError("node clock went backwards")
        if elapsed and self.busy:
            done = elapsed * self._rate
            for execution in self.busy.values():
                step = min(execution.remaining_us, done)
                execution.remaining_us -= step
                self.core_time_us += step
        self._last_advance_us = now_us

    def _fresh_epoch(self) -> int:
        # Node-global counter: a stale event can never collide with the
        # epoch of a later execution reusing the same container.
        self._next_epoch += 1
        return self._next_epoch

    def recompute_rates(self, now_us: int) -> None:
        """Re-rate all active executions after the busy set changed.

        Remaining work is first advanced at the old rate, then every
        projected completion is rescheduled at the new shared rate; events
        carrying a superseded epoch are ignored when they surface.
        """
        self._advance_work(now_us)
        self._rate = self._current_rate()
        for execution in self.busy.values():
            execution.epoch = self._fresh_epoch()
            # ceil keeps the event at or within 1us after the fluid finish time
            delay = max(0, math.ceil(execution.remaining_us / self._rate - 1e-9))
            self._schedule_execution_done(now_us + delay, execution.container_id, execution.epoch)
