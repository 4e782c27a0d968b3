import random

import pytest

from faasched import (
    Estimator,
    NotApplicable,
    PrioritizedRequest,
    PriorityQueue,
    Request,
    Strategy,
    compute_priority,
)
from oracles import pop_order_by_sorting

SECOND = 1_000_000


def primed_estimator(n_functions=2, fn=0, duration_us=807_000, count=10):
    est = Estimator(n_functions)
    for _ in range(count):
        est.record_completion(fn, duration_us)
    return est


def make_item(priority, sequence, request_id=0):
    request = Request(request_id=request_id, function_index=0, gen_us=0)
    return PrioritizedRequest(request=request, priority_ms=priority, sequence=sequence)


class TestComputePriority:
    def test_sept_uses_expected_processing(self):
        est = primed_estimator(duration_us=807_000)
        est.record_receipt(0, 0)
        assert compute_priority(Strategy.SEPT, 0, 0, est) == 807.0

    def test_eect_adds_receipt_time(self):
        est = primed_estimator(duration_us=1_022_000)
        receipt = 10_000_000
        est.record_receipt(0, receipt)
        assert compute_priority(Strategy.EECT, 0, receipt, est) == 11_022.0

    def test_fc_multiplies_by_window_count(self):
        est = primed_estimator(duration_us=8_552_000)
        for t in range(5):
            est.record_receipt(0, t * SECOND)
        now = 4 * SECOND
        assert est.calls_in_window(0, now) == 5
        assert compute_priority(Strategy.FC, 0, now, est) == 42_760.0

    def test_fifo_is_receipt_time(self):
        est = Estimator(1)
        est.record_receipt(0, 123_000)
        assert compute_priority(Strategy.FIFO, 0, 123_000, est) == 123.0

    def test_stock_scheduler_has_no_priority(self):
        est = Estimator(1)
        with pytest.raises(NotApplicable):
            compute_priority(Strategy.BASELINE, 0, 0, est)

    def test_unseen_function_contributes_zero(self):
        est = Estimator(2)
        est.record_receipt(1, 50_000)
        assert compute_priority(Strategy.SEPT, 1, 50_000, est) == 0.0
        assert compute_priority(Strategy.FC, 1, 50_000, est) == 0.0

    def test_rect_uses_previous_receipt(self):
        est = primed_estimator(duration_us=1_000_000)
        est.record_receipt(0, 2 * SECOND)
        est.record_receipt(0, 9 * SECOND)
        # previous call at 2 s, expected processing 1 s
        assert compute_priority(Strategy.RECT, 0, 9 * SECOND, est) == 3_000.0

    def test_rect_first_call_degenerates_to_eect(self):
        est = primed_estimator(duration_us=1_000_000)
        est.record_receipt(0, 7 * SECOND)
        assert compute_priority(Strategy.RECT, 0, 7 * SECOND, est) == compute_priority(
            Strategy.EECT, 0, 7 * SECOND, est
        )

    def test_fc_first_call_counts_itself(self):
        est = primed_estimator(duration_us=2_000_000)
        est.record_receipt(0, 1 * SECOND)
        assert compute_priority(Strategy.FC, 0, 1 * SECOND, est) == 2_000.0

    def test_strategy_parse(self):
        assert Strategy.parse("SEPT") is Strategy.SEPT
        with pytest.raises(ValueError):
            Strategy.parse("unknown")


class TestPriorityQueue:
    def test_pop_orders_by_priority(self):
        queue = PriorityQueue()
        for priority, seq in ((3.0, 0), (1.0, 1), (2.0, 2)):
            queue.push(make_item(priority, seq))
        assert [queue.pop_min().priority_ms for _ in range(3)] == [1.0, 2.0, 3.0]

    def test_ties_break_by_sequence(self):
        queue = PriorityQueue()
        queue.push(make_item(5.0, 2))
        queue.push(make_item(5.0, 1))
        assert queue.pop_min().sequence == 1
        assert queue.pop_min().sequence == 2

    def test_empty_pop_returns_none(self):
        assert PriorityQueue().pop_min() is None

    def test_len_and_peek(self):
        queue = PriorityQueue()
        assert not queue
        queue.push(make_item(1.0, 0))
        assert len(queue) == 1
        assert queue.peek_min().sequence == 0
        assert len(queue) == 1

    def test_matches_sorting_oracle_on_random_ops(self):
        rng = random.Random(77)
        sequence = 0
        operations = []
        for _ in range(1000):
            if rng.random() < 0.6:
                operations.append(("push", (rng.choice([0.0, 1.5, 2.0, 9.125]), sequence)))
                sequence += 1
            else:
                operations.append(("pop", None))
        expected = pop_order_by_sorting(operations)
        queue = PriorityQueue()
        got = []
        for op, payload in operations:
            if op == "push":
                priority, seq = payload
                queue.push(make_item(priority, seq))
            else:
                item = queue.pop_min()
                got.append(None if item is None else (item.priority_ms, item.sequence))
        assert got == expected

    def test_fifo_priorities_reproduce_receipt_order(self):
        rng = random.Random(5)
        est = Estimator(1)
        queue = PriorityQueue()
        now = 0
        for seq in range(50):
            now += rng.randint(0, 1000)
            est.record_receipt(0, now)
            priority = compute_priority(Strategy.FIFO, 0, now, est)
            queue.push(make_item(priority, seq, request_id=seq))
        popped = [queue.pop_min().sequence for _ in range(50)]
        assert popped == list(range(50))

    def test_fc_priorities_match_brute_force_recomputation(self):
        # two-function workload with deterministic processing: every stored
        # fc priority must equal an independent recount at its receipt
        from faasched import NodeConfig, Scenario, run_single
        from faasched.catalog import FunctionCatalog, FunctionProfile

        ms = 1_000
        catalog = FunctionCatalog(
            (
                FunctionProfile("short", 40 * ms, 40 * ms, 40 * ms),
                FunctionProfile("long", 900 * ms, 900 * ms, 900 * ms),
            )
        )
        rng = random.Random(71)
        arrivals = tuple(
            sorted((rng.randrange(3_000_000), rng.randrange(2)) for _ in range(120))
        )
        scenario = Scenario(arrivals=arrivals, window_us=3_000_000, seed=0)
        records = run_single(NodeConfig(cores=1, strategy=Strategy.FC), scenario, catalog)

        window = 60_000_000
        medians = {"short": 40 * ms, "long": 900 * ms}
        completions = sorted(records, key=lambda r: (r.completion_us, r.request_id))
        for record in sorted(records, key=lambda r: r.request_id):
            receipts = [
                r.receipt_us
                for r in records
                if r.function == record.function
                and record.receipt_us - window < r.receipt_us <= record.receipt_us
                and (r.receipt_us, r.request_id) <= (record.receipt_us, record.request_id)
            ]
            finished_before = [
                c for c in completions
                if c.function == record.function and c.completion_us <= record.receipt_us
            ]
            expected_ms = medians[record.function] / 1000.0 if finished_before else 0.0
            assert record.priority_ms == len(receipts) * expected_ms

        # pop order is exactly the (priority, receipt sequence) sort
        by_receipt = sorted(records, key=lambda r: (r.receipt_us, r.request_id))
        sequence = {r.request_id: i for i, r in enumerate(by_receipt)}
        expected_order = sorted(
            records, key=lambda r: (r.priority_ms, sequence[r.request_id])
        )
        # whenever two requests were both waiting at a dispatch moment, the
        # one taken first must win on the (priority, receipt sequence) key
        pops = sorted(records, key=lambda r: r.dispatch_seq)
        for k, earlier in enumerate(pops):
            key_earlier = (earlier.priority_ms, sequence[earlier.request_id])
            for later in pops[k + 1 :]:
                if later.receipt_us < earlier.start_us:
                    assert key_earlier < (later.priority_ms, sequence[later.request_id])
        assert len(expected_order) == len(pops)

    def test_priorities_do_not_change_after_insertion(self):
        est = primed_estimator(duration_us=100_000)
        est.record_receipt(0, 0)
        priority = compute_priority(Strategy.SEPT, 0, 0, est)
        item = make_item(priority, 0)
        queue = PriorityQueue()
        queue.push(item)
        # estimator drifts afterwards; the queued priority must not
        for _ in range(10):
            est.record_completion(0, 9_000_000)
        assert queue.pop_min().priority_ms == priority == 100.0
