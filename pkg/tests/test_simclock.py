import pytest
from hypothesis import given, settings, strategies as st

from mbfreg.messages import Read, Reply, Write
from mbfreg.simclock import (Adversarial, AuthenticationError, Engine, FixedMax, Network, Phase,
                             SchedulingError, SeededUniform, make_policy)
from mbfreg.values import ValueEntry


def test_schedule_in_future_fires_at_tick():
    eng = Engine()
    eng.run_until(3)
    fired = []
    eng.schedule(5, lambda: fired.append(eng.now))
    eng.run_until(10)
    assert fired == [5]


def test_schedule_now_runs_after_already_queued_same_tick_events():
    eng = Engine()
    order = []

    def first():
        order.append("first")
        eng.schedule(eng.now, lambda: order.append("late"))

    eng.schedule(3, first)
    eng.schedule(3, lambda: order.append("second"))
    eng.run_until(3)
    assert order == ["first", "second", "late"]


def test_same_tick_events_run_in_insertion_order():
    eng = Engine()
    order = []
    eng.schedule(7, lambda: order.append("a"))
    eng.schedule(7, lambda: order.append("b"))
    eng.run_until(7)
    assert order == ["a", "b"]


def test_phases_order_moves_then_deliveries_then_timers():
    eng = Engine()
    order = []
    eng.schedule(4, lambda: order.append("timer"), phase=Phase.TIMER)
    eng.schedule(4, lambda: order.append("deliver"), phase=Phase.DELIVER)
    eng.schedule(4, lambda: order.append("move"), phase=Phase.MOVE)
    eng.run_until(4)
    assert order == ["move", "deliver", "timer"]


def test_scheduling_in_the_past_is_rejected():
    eng = Engine()
    eng.run_until(5)
    with pytest.raises(SchedulingError):
        eng.schedule(4, lambda: None)


def test_cancelled_event_does_not_fire():
    eng = Engine()
    fired = []
    eid = eng.schedule(2, lambda: fired.append(1))
    eng.cancel(eid)
    eng.run_until(5)
    assert fired == [] and eng.now == 5


def _net(policy, byz=frozenset(), n=5, delta=10):
    eng = Engine()
    got = []
    servers = [f"s{i}" for i in range(1, n + 1)]
    net = Network(eng, delta, policy, servers, got.append, is_byzantine=byz.__contains__)
    return eng, net, got


def test_fixed_max_delivers_after_delta():
    eng, net, got = _net(FixedMax(10))
    eng.run_until(100)
    net.broadcast("w", Write("w", ValueEntry("a", 1)))
    eng.run_until(200)
    assert [e.deliver_at for e in got] == [110] * 5


def test_adversarial_byzantine_recipient_gets_one_tick():
    eng, net, got = _net(Adversarial(10), byz=frozenset({"s2"}))
    eng.run_until(100)
    net.broadcast("c", Read("c"))
    eng.run_until(200)
    at = {e.to: e.deliver_at for e in got}
    assert at["s2"] == 101
    assert all(at[s] == 110 for s in at if s != "s2")


def test_broadcast_fans_out_to_every_server():
    eng, net, got = _net(FixedMax(10), n=5)
    envs = net.broadcast("c", Read("c"))
    assert len(envs) == 5 and {e.to for e in envs} == {f"s{i}" for i in range(1, 6)}


def test_sender_must_match_payload_origin():
    eng, net, _ = _net(FixedMax(10))
    with pytest.raises(AuthenticationError):
        net.unicast("s1", "c", Reply("s2", ()))


def test_seeded_uniform_is_reproducible():
    a, b = SeededUniform(10, 42), SeededUniform(10, 42)
    assert [a.delay(False, False) for _ in range(100)] == [b.delay(False, False) for _ in range(100)]


def test_seeded_uniform_stays_within_bounds_over_many_sends():
    pol = SeededUniform(7, 3)
    delays = [pol.delay(False, False) for _ in range(10_000)]
    assert min(delays) >= 1 and max(delays) <= 7
    assert set(delays) == set(range(1, 8))


@settings(max_examples=200, deadline=None)
@given(delta=st.integers(1, 30), name=st.sampled_from(["fixed-max", "uniform", "adversarial"]),
       seed=st.integers(0, 1000), byz=st.booleans(), sends=st.integers(1, 30))
def test_every_envelope_respects_the_delay_bound(delta, name, seed, byz, sends):
    eng = Engine()
    got = []
    net = Network(eng, delta, make_policy(name, delta, seed), ["s1", "s2"], got.append,
                  is_byzantine=lambda pid: byz and pid == "s1")
    for i in range(sends):
        eng.run_until(i)
        net.unicast("c", "s1" if i % 2 else "s2", Read("c"))
    eng.run_until(sends + delta + 1)
    assert len(got) == sends
    assert all(1 <= e.deliver_at - e.sent_at <= delta for e in got)


def test_unknown_policy_rejected():
    with pytest.raises(ValueError):
        make_policy("teleport", 10)
