import pytest
from hypothesis import given, strategies as st

from ransim.core import (ConfigError, ModelError, RngRegistry, RngStream,
                         Simulator)


def test_event_order_by_time_then_fifo():
    sim = Simulator()
    log = []
    sim.schedule(20, "b", "x", lambda: log.append("b"))
    sim.schedule(10, "a", "x", lambda: log.append("a"))
    sim.schedule(10, "a2", "x", lambda: log.append("a2"))
    sim.schedule(10, "a3", "x", lambda: log.append("a3"))
    sim.run_until(100)
    assert log == ["a", "a2", "a3", "b"]


def test_run_until_advances_clock_to_t_end():
    sim = Simulator()
    sim.schedule(10, "a", "x", lambda: None)
    sim.run_until(50)
    assert sim.now == 50
    # Empty queue: the clock still lands on t_end.
    sim.run_until(80)
    assert sim.now == 80


def test_events_scheduled_during_run_fire_in_order():
    sim = Simulator()
    log = []

    def first():
        log.append("first")
        sim.schedule(sim.now, "nested", "x", lambda: log.append("nested"))

    sim.schedule(5, "first", "x", first)
    sim.schedule(5, "second", "x", lambda: log.append("second"))
    sim.run_until(10)
    assert log == ["first", "second", "nested"]


def test_schedule_into_past_rejected():
    sim = Simulator()
    sim.schedule(10, "a", "x", lambda: None)
    sim.run_until(10)
    with pytest.raises(ConfigError):
        sim.schedule(5, "late", "x", lambda: None)


def test_handler_exception_wrapped_with_context():
    sim = Simulator()

    def boom():
        raise ValueError("inner")

    sim.schedule(3, "exploder", "tgt", boom)
    with pytest.raises(ModelError) as exc:
        sim.run_until(10)
    assert "exploder" in str(exc.value)
    assert "t=3us" in str(exc.value)


def test_rng_streams_independent():
    reg = RngRegistry(42)
    a1 = [reg.stream("a").draw() for _ in range(5)]
    # Drawing on another stream must not perturb "a".
    reg2 = RngRegistry(42)
    reg2.stream("b").draw()
    a2 = [reg2.stream("a").draw() for _ in range(5)]
    assert a1 == a2


# Frozen golden draws: platform-stable because random.Random is MT19937 with
# a documented seeding scheme.  Regenerate only if the fan-out rule changes.
GOLDEN_SEED42_LINK_UE1 = [
    0.8350735196219271,
    0.7156807152757605,
    0.6858846201507536,
]


def test_rng_golden_draws_seed42():
    st_ = RngStream(42, "link:ue1")
    draws = [st_.draw() for _ in range(3)]
    assert draws == pytest.approx(GOLDEN_SEED42_LINK_UE1, abs=0)


@given(st.integers(min_value=0, max_value=2**31), st.text(min_size=1, max_size=8))
def test_rng_stream_reproducible(seed, name):
    s1 = RngStream(seed, name)
    s2 = RngStream(seed, name)
    assert [s1.draw() for _ in range(3)] == [s2.draw() for _ in range(3)]


def test_same_seed_same_event_trace():
    def build():
        sim = Simulator(RngRegistry(7))
        trace = []

        def tick(i):
            trace.append((sim.now, round(sim.rng.stream("s").draw(), 12)))
            if i < 20:
                sim.schedule_in(10, "tick", "x", lambda: tick(i + 1))

        sim.schedule(0, "tick", "x", lambda: tick(0))
        sim.run_until(1000)
        return trace

    assert build() == build()
