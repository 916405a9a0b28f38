import pytest

from tailsim.engine import (EV_FLOW_START, EV_RUN_END, Engine,
                            SchedulingError)


def test_events_fire_in_time_order():
    eng = Engine()
    fired = []
    eng.on(EV_FLOW_START, lambda t, p: fired.append((t, p)))
    eng.schedule(50, EV_FLOW_START, "b")
    eng.schedule(10, EV_FLOW_START, "a")
    eng.schedule(99, EV_FLOW_START, "c")
    out = eng.run_until(1_000)
    assert fired == [(10, "a"), (50, "b"), (99, "c")]
    assert out.events == 3
    assert out.clock == 99


def test_equal_timestamps_fire_in_insertion_order():
    eng = Engine()
    fired = []
    eng.on(EV_FLOW_START, lambda t, p: fired.append(p))
    for tag in ("first", "second", "third"):
        eng.schedule(7, EV_FLOW_START, tag)
    eng.run_until(7)
    assert fired == ["first", "second", "third"]


def test_zero_delay_event_fires_after_current_event():
    eng = Engine()
    fired = []

    def handler(t, payload):
        fired.append(payload)
        if payload == "outer":
            eng.schedule(t, EV_FLOW_START, "inner")  # same-timestamp schedule

    eng.on(EV_FLOW_START, handler)
    eng.schedule(5, EV_FLOW_START, "outer")
    eng.run_until(10)
    assert fired == ["outer", "inner"]


def test_scheduling_in_the_past_is_rejected():
    eng = Engine()
    eng.on(EV_FLOW_START, lambda t, p: None)
    eng.schedule(10, EV_FLOW_START)
    eng.run_until(10)
    with pytest.raises(SchedulingError):
        eng.schedule(9, EV_FLOW_START)


def test_empty_run_reports_zero_events_and_clock():
    eng = Engine()
    out = eng.run_until(1_000_000_000)
    assert out.events == 0
    assert out.clock == 0


def test_run_until_leaves_later_events_pending():
    eng = Engine()
    seen = []
    eng.on(EV_RUN_END, lambda t, p: seen.append(t))
    eng.schedule(10, EV_RUN_END)
    eng.schedule(200, EV_RUN_END)
    out = eng.run_until(100)
    assert seen == [10]
    assert out.clock == 10
    assert eng.pending() == 1
    eng.run_until(200)
    assert seen == [10, 200]


def test_clock_never_decreases_and_trace_matches_processing_order():
    eng = Engine(collect_trace=True)
    clocks = []
    eng.on(EV_FLOW_START, lambda t, p: clocks.append(eng.clock))
    import random
    rnd = random.Random(3)
    for _ in range(500):
        eng.schedule(rnd.randrange(10_000), EV_FLOW_START)
    eng.run_until(10_000)
    assert clocks == sorted(clocks)
    trace = eng._trace
    assert trace == sorted(trace, key=lambda e: (e[0], e[1]))


def test_identical_schedules_produce_identical_digests():
    def build():
        eng = Engine(collect_trace=True)
        eng.on(EV_FLOW_START, lambda t, p: None)
        import random
        rnd = random.Random(11)
        for _ in range(200):
            eng.schedule(rnd.randrange(5_000), EV_FLOW_START)
        eng.run_until(5_000)
        return eng.trace_digest()

    assert build() == build()
