import random

import pytest

from faasched import (
    ClusterConfig,
    Engine,
    EventKind,
    NodeConfig,
    Request,
    Scenario,
    Strategy,
    WarmupInfeasible,
    generate_uniform_scenario,
    run_single,
)
from faasched.catalog import FunctionCatalog, FunctionProfile
from faasched.node import ContainerState, ExecutionModel, Node, OutcomeKind, QueuedCall

MS = 1_000
SECOND = 1_000_000


def mini_catalog(*medians_ms):
    return FunctionCatalog(
        tuple(
            FunctionProfile(f"fn{i}", m * MS, m * MS, m * MS)
            for i, m in enumerate(medians_ms)
        )
    )


def make_node(config, catalog, **kwargs):
    return Node(config, catalog, rng=random.Random(1), **kwargs)


def queued(fn, receipt_us=0, sequence=0):
    return QueuedCall(
        request=Request(request_id=sequence, function_index=fn, gen_us=receipt_us),
        receipt_us=receipt_us,
        sequence=sequence,
        priority_ms=None,
    )


def make_engine(node_config, scenario, catalog, **kwargs):
    return Engine(ClusterConfig(node_configs=(node_config,)), scenario, catalog, **kwargs)


class TestWarmUp:
    def test_full_pools(self, catalog):
        node = make_node(NodeConfig(cores=2), catalog)
        assert node.warm_up() == 22
        free = [c for c in node.containers.values() if c.state is ContainerState.FREE]
        assert len(free) == 22

    def test_single_function_single_core(self):
        node = make_node(NodeConfig(cores=1), mini_catalog(100))
        assert node.warm_up() == 1

    def test_memory_limited_round_robin(self, catalog):
        # room for 15 containers: one full round of 11, then the first 4
        config = NodeConfig(cores=2, memory_pool_mb=15 * 256)
        node = make_node(config, catalog)
        assert node.warm_up() == 15
        per_fn = {i: 0 for i in range(11)}
        for container in node.containers.values():
            per_fn[container.function] += 1
        assert per_fn == {i: (2 if i < 4 else 1) for i in range(11)}

    def test_infeasible_when_pool_too_small(self, catalog):
        config = NodeConfig(cores=1, memory_pool_mb=10 * 256)
        node = make_node(config, catalog)
        with pytest.raises(WarmupInfeasible):
            node.warm_up()

    def test_requires_idle_node(self):
        catalog = mini_catalog(100)
        node = make_node(NodeConfig(cores=1), catalog)
        node.warm_up()
        node.submit(Request(0, 0, 0), 0)
        with pytest.raises(WarmupInfeasible):
            node.warm_up()


class TestMemorySharingDispatch:
    def test_matching_free_container_wins(self):
        catalog = mini_catalog(100, 200)
        config = NodeConfig(cores=1, model=ExecutionModel.MEMORY_SHARING, strategy=Strategy.BASELINE)
        node = make_node(config, catalog)
        node.warm_up()
        outcome = node.dispatch_memory_sharing(queued(0), 0)
        assert outcome.kind is OutcomeKind.WARM_START
        assert not outcome.is_cold
        assert node.cold_start_count == 0

    def test_prewarm_when_no_free(self):
        catalog = mini_catalog(100)
        config = NodeConfig(
            cores=1,
            model=ExecutionModel.MEMORY_SHARING,
            strategy=Strategy.BASELINE,
            prewarm_count=1,
        )
        node = make_node(config, catalog)
        outcome = node.dispatch_memory_sharing(queued(0), 0)
        assert outcome.kind is OutcomeKind.COLD_START_PREWARM
        assert outcome.is_cold
        assert node.cold_start_count == 1

    def test_creates_new_container_when_memory_allows(self):
        catalog = mini_catalog(100)
        config = NodeConfig(cores=1, model=ExecutionModel.MEMORY_SHARING, strategy=Strategy.BASELINE)
        node = make_node(config, catalog)
        outcome = node.dispatch_memory_sharing(queued(0), 0)
        assert outcome.kind is OutcomeKind.COLD_START_NEW
        assert node.cold_start_count == 1

    def test_evicts_idle_other_function_when_memory_full(self):
        catalog = mini_catalog(100, 200)
        config = NodeConfig(
            cores=1,
            memory_pool_mb=2 * 256,
            model=ExecutionModel.MEMORY_SHARING,
            strategy=Strategy.BASELINE,
        )
        node = make_node(config, catalog)
        node.warm_up()  # one free container per function fills the pool
        warm = node.dispatch_memory_sharing(queued(0, sequence=0), 0)
        assert warm.kind is OutcomeKind.WARM_START
        outcome = node.dispatch_memory_sharing(queued(0, sequence=1), 0)
        assert outcome.kind is OutcomeKind.COLD_START_EVICTION
        evicted = outcome.evicted[0]
        assert evicted not in node.containers  # the idle fn1 container is gone

    def test_eviction_picks_least_recently_used_victim(self):
        catalog = mini_catalog(100, 200, 300)
        config = NodeConfig(
            cores=2,
            memory_pool_mb=3 * 256,
            model=ExecutionModel.MEMORY_SHARING,
            strategy=Strategy.BASELINE,
        )
        node = make_node(config, catalog)
        node.warm_up()  # one container per function, pool full
        fn1_id = node._free_by_fn[1][0]
        fn2_id = node._free_by_fn[2][0]
        node.containers[fn1_id].last_used_us = 50
        node.containers[fn2_id].last_used_us = 10  # least recently used
        warm = node.dispatch_memory_sharing(queued(0, sequence=0), 60)
        assert warm.kind is OutcomeKind.WARM_START
        outcome = node.dispatch_memory_sharing(queued(0, sequence=1), 60)
        assert outcome.kind is OutcomeKind.COLD_START_EVICTION
        assert outcome.evicted == (fn2_id,)

    def test_queued_when_nothing_available(self):
        catalog = mini_catalog(100, 200)
        config = NodeConfig(
            cores=1,
            memory_pool_mb=256,
            model=ExecutionModel.MEMORY_SHARING,
            strategy=Strategy.BASELINE,
        )
        node = make_node(config, catalog)
        node.submit(Request(0, 1, 0), 0)  # occupies the only container slot (cold-starting)
        outcome = node.dispatch_memory_sharing(queued(0, sequence=1), 0)
        assert outcome.kind is OutcomeKind.QUEUED


class TestCorePinnedDispatch:
    def test_busy_limit_beats_warm_availability(self):
        catalog = mini_catalog(100, 200)
        config = NodeConfig(cores=1, model=ExecutionModel.CORE_PINNED)
        node = make_node(config, catalog)
        node.warm_up()
        node.submit(Request(0, 0, 0), 0)
        assert len(node.busy) == 1
        outcome = node.dispatch_core_pinned(queued(1, sequence=1), 0)
        assert outcome.kind is OutcomeKind.QUEUED  # a warm fn1 container exists

    def test_warm_start_under_the_limit(self):
        catalog = mini_catalog(100, 200)
        config = NodeConfig(cores=2, model=ExecutionModel.CORE_PINNED)
        node = make_node(config, catalog)
        node.warm_up()
        outcome = node.dispatch_core_pinned(queued(1), 0)
        assert outcome.kind is OutcomeKind.WARM_START
        assert node.cold_start_count == 0

    def test_no_eviction_regime_bound(self):
        # the no-eviction regime needs room for one container per function
        # per core: 11 * c * 256 MB, which a 32 GB pool covers up to c = 11
        pool, per_container = 32_768, 256
        assert 11 * 11 * per_container <= pool
        assert 11 * 12 * per_container > pool

    def test_uniform_run_in_regime_has_no_cold_starts(self, catalog):
        scenario = generate_uniform_scenario(catalog, 4, 30, seed=2)
        engine = make_engine(NodeConfig(cores=4, strategy=Strategy.SEPT), scenario, catalog)
        engine.run()
        node = engine.nodes[0]
        assert node.cold_start_count == 0
        assert node.containers_created == 44  # warm-up only

    def test_created_containers_bounded_by_functions_times_cores(self, catalog):
        scenario = generate_uniform_scenario(catalog, 4, 60, seed=3)
        config = NodeConfig(cores=4, strategy=Strategy.FIFO, prewarm_count=2)
        engine = make_engine(config, scenario, catalog)
        engine.run()
        node = engine.nodes[0]
        assert node.containers_created <= 11 * 4 + 2


class TestExecutionLifecycle:
    def test_single_request_completes_after_its_work(self):
        catalog = mini_catalog(807)
        scenario = Scenario(arrivals=((0, 0),), window_us=SECOND, seed=0)
        records = run_single(NodeConfig(cores=1), scenario, catalog)
        assert records[0].completion_us == records[0].start_us + 807 * MS == 807 * MS

    def test_cold_start_delays_execution(self):
        catalog = mini_catalog(100)
        scenario = Scenario(arrivals=((0, 0),), window_us=SECOND, seed=0)
        records = run_single(NodeConfig(cores=1), scenario, catalog, warm_up=False)
        assert records[0].cold
        assert records[0].start_us == 500 * MS
        assert records[0].completion_us == 600 * MS

    def test_queued_request_starts_at_completion_timestamp(self):
        catalog = mini_catalog(100)
        scenario = Scenario(arrivals=((0, 0), (1, 0)), window_us=SECOND, seed=0)
        records = run_single(NodeConfig(cores=1), scenario, catalog)
        assert records[1].start_us == records[0].completion_us

    def test_sept_runs_shorter_expected_job_first(self):
        catalog = mini_catalog(10_000, 100)  # fn0 long, fn1 short
        scenario = Scenario(
            arrivals=((0, 0), (10 * MS, 0), (20 * MS, 1)), window_us=SECOND, seed=0
        )
        config = NodeConfig(cores=1, strategy=Strategy.SEPT)
        engine = make_engine(config, scenario, catalog)
        for fn, median in ((0, 10_000 * MS), (1, 100 * MS)):
            engine.nodes[0].estimator.record_completion(fn, median)
        records = engine.run()
        by_id = {r.request_id: r for r in records}
        # the short fn1 call overtakes the queued long fn0 call, which then
        # runs from 10.1 s to 20.1 s
        assert by_id[2].completion_us == 10_100 * MS
        assert by_id[1].completion_us == 20_100 * MS

    def test_fifo_keeps_arrival_order_on_same_workload(self):
        catalog = mini_catalog(10_000, 100)
        scenario = Scenario(
            arrivals=((0, 0), (10 * MS, 0), (20 * MS, 1)), window_us=SECOND, seed=0
        )
        config = NodeConfig(cores=1, strategy=Strategy.FIFO)
        records = run_single(config, scenario, catalog)
        by_id = {r.request_id: r for r in records}
        assert by_id[1].completion_us == 20_000 * MS
        assert by_id[2].completion_us == 20_100 * MS


class TestCrossModelCombination:
    def test_priority_strategy_on_memory_sharing_model(self):
        # not a default pairing, but the config space allows it
        catalog = mini_catalog(10_000, 100)
        scenario = Scenario(
            arrivals=((0, 0), (10 * MS, 0), (20 * MS, 1)), window_us=SECOND, seed=0
        )
        config = NodeConfig(
            cores=1, model=ExecutionModel.MEMORY_SHARING, strategy=Strategy.SEPT
        )
        records = run_single(config, scenario, catalog)
        assert len(records) == 3
        assert all(r.priority_ms is not None for r in records)


class TestProgressModel:
    def drive_and_probe(self, model, cores, arrivals, probe):
        catalog = mini_catalog(10_000)
        scenario = Scenario(arrivals=tuple(arrivals), window_us=100 * SECOND, seed=0)
        strategy = Strategy.BASELINE if model is ExecutionModel.MEMORY_SHARING else Strategy.FIFO
        config = NodeConfig(cores=cores, model=model, strategy=strategy)
        engine = make_engine(config, scenario, catalog, on_event=probe)
        engine.run()
        return engine

    def test_memory_sharing_rate_is_fair_share(self):
        observed = []

        def probe(engine, event):
            node = engine.nodes[0]
            if node.busy:
                observed.append((len(node.busy), node.progress_rate(next(iter(node.busy)))))

        arrivals = [(i, 0) for i in range(20)]
        self.drive_and_probe(ExecutionModel.MEMORY_SHARING, 10, arrivals, probe)
        assert (20, 0.5) in observed  # 20 busy on 10 cores
        assert all(rate == 1.0 for k, rate in observed if k <= 10)

    def test_core_pinned_rate_is_always_one(self):
        observed = []

        def probe(engine, event):
            node = engine.nodes[0]
            for cid in node.busy:
                observed.append(node.progress_rate(cid))

        arrivals = [(i, 0) for i in range(20)]
        engine = self.drive_and_probe(ExecutionModel.CORE_PINNED, 10, arrivals, probe)
        assert observed and set(observed) == {1.0}
        assert max(len(engine.nodes[0].busy) for _ in [0]) <= 10

    def test_undersubscribed_memory_sharing_full_speed(self):
        observed = []

        def probe(engine, event):
            node = engine.nodes[0]
            if node.busy:
                observed.append(node.progress_rate(next(iter(node.busy))))

        arrivals = [(i, 0) for i in range(5)]
        self.drive_and_probe(ExecutionModel.MEMORY_SHARING, 10, arrivals, probe)
        assert set(observed) == {1.0}


class TestWorkConservation:
    @pytest.mark.parametrize("strategy", [Strategy.BASELINE, Strategy.FIFO, Strategy.SEPT])
    def test_core_time_equals_total_work(self, catalog, strategy):
        scenario = generate_uniform_scenario(catalog, 4, 30, seed=6)
        model = (
            ExecutionModel.MEMORY_SHARING
            if strategy is Strategy.BASELINE
            else ExecutionModel.CORE_PINNED
        )
        config = NodeConfig(cores=4, model=model, strategy=strategy)
        engine = make_engine(config, scenario, catalog)
        records = engine.run()
        total_work = sum(r.work_us for r in records)
        assert abs(engine.nodes[0].core_time_us - total_work) <= len(records) + 1

    def test_every_request_completes(self, catalog):
        scenario = generate_uniform_scenario(catalog, 4, 60, seed=6)
        records = run_single(NodeConfig(cores=4, strategy=Strategy.FC), scenario, catalog)
        assert len(records) == len(scenario)
        assert sorted(r.request_id for r in records) == list(range(len(scenario)))

    def test_conservation_survives_eviction_churn(self, catalog):
        # a pool below the no-eviction threshold forces cold starts and
        # container churn while processor sharing keeps re-rating work
        scenario = generate_uniform_scenario(catalog, 4, 60, seed=13)
        config = NodeConfig(
            cores=4,
            memory_pool_mb=16 * 256,
            model=ExecutionModel.MEMORY_SHARING,
            strategy=Strategy.BASELINE,
        )
        engine = make_engine(config, scenario, catalog)
        records = engine.run()
        node = engine.nodes[0]
        assert len(records) == len(scenario)
        assert node.cold_start_count > 0
        total_work = sum(r.work_us for r in records)
        assert abs(node.core_time_us - total_work) <= len(records) + 1
