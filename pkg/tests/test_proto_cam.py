import pytest
from hypothesis import given, settings, strategies as st

from mbfreg.messages import Echo, Read, Reply, Write
from mbfreg.proto_cam import (UnsupportedRegime, count_support, movement_ratio,
                              select_d_pairs_max_sn, thresholds_cam)
from mbfreg.simclock import Envelope
from mbfreg.values import INITIAL, ValueEntry

V73 = ValueEntry("7", 3)
V99 = ValueEntry("9", 9)


def test_thresholds_one_move_per_round():
    th = thresholds_cam(10, 20, 1)
    assert (th.k, th.n_min, th.reply_q, th.echo_q) == (1, 5, 3, 2)


def test_thresholds_two_moves_per_round():
    th = thresholds_cam(10, 10, 2)
    assert (th.k, th.n_min, th.reply_q, th.echo_q) == (2, 13, 7, 6)


@pytest.mark.parametrize("Delta", [9, 30, 45])
def test_thresholds_undefined_outside_regime(Delta):
    with pytest.raises(UnsupportedRegime):
        movement_ratio(10, Delta)


def test_selector_keeps_pairs_with_enough_senders():
    echoes = {"s1": {ValueEntry("a", 1)}, "s2": {ValueEntry("a", 1)}, "s3": {ValueEntry("a", 1)},
              "s4": {ValueEntry("b", 2)}}
    assert select_d_pairs_max_sn(echoes, 2) == [ValueEntry("a", 1)]


def test_selector_counts_a_sender_once():
    assert count_support({"s1": [V73, V73, V73]}) == {V73: 1}
    assert select_d_pairs_max_sn({"s1": [V73, V73]}, 2) == []


def _naive_select(pairs, q, d=3):
    """Reference: list every (sender, pair) and count senders per pair by brute force."""
    result = []
    for e in {e for _, e in pairs}:
        if len({s for s, x in pairs if x == e}) >= q:
            result.append(e)
    result.sort(key=lambda e: (e.sn, e.value))
    return result[-d:]


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["s1", "s2", "s3", "s4", "s5"]),
                          st.builds(ValueEntry, st.sampled_from("xyz"), st.integers(0, 6))),
                max_size=30),
       st.integers(1, 5))
def test_selector_matches_naive_count(pairs, q):
    echoes = {}
    for s, e in pairs:
        echoes.setdefault(s, []).append(e)
    assert select_d_pairs_max_sn(echoes, q) == _naive_select(pairs, q)


def _echo(host, sender, *entries, bottom=False):
    host.deliver(Envelope(sender, host.sid, Echo(sender, tuple(entries), bottom=bottom), 0, 0))


def test_maintenance_keeps_quorum_pair_and_drops_lone_forgery(quiet_world):
    w = quiet_world("CAM")        # n=5, echo_q=2
    s = w.hosts["s1"]
    s.maintenance()
    _echo(s, "s2", V73)
    _echo(s, "s3", V73)
    _echo(s, "s4", V99)
    w.run(2 * w.cfg.delta)
    assert V73 in s.V and V99 not in s.V
    assert not s.curing_state


def test_only_bottom_echoes_leave_v_empty(quiet_world):
    w = quiet_world("CAM")
    s = w.hosts["s1"]
    for h in w.hosts.values():
        h.V.clear()                       # nobody has anything to echo back
    s.maintenance()
    for j in ("s2", "s3", "s4", "s5"):
        _echo(s, j, bottom=True)
    w.run(2 * w.cfg.delta)
    assert len(s.V) == 0


def test_bottom_discards_earlier_echoes_of_that_sender_only(quiet_world):
    w = quiet_world("CAM")
    s = w.hosts["s1"]
    s.maintenance()
    _echo(s, "s2", V99)
    _echo(s, "s2", bottom=True)           # s2 was just cured: V99 may be garbage
    _echo(s, "s3", V99)
    assert "s2" not in s.echo_vals
    _echo(s, "s2", V73)                   # after its own recovery, s2 echoes again
    _echo(s, "s4", V73)
    w.run(2 * w.cfg.delta)
    assert V73 in s.V and V99 not in s.V


def test_curing_server_ignores_reads_until_done(quiet_world):
    w = quiet_world("CAM")
    s = w.hosts["s1"]
    s.maintenance()
    sent = w.net.sent
    s.deliver(Envelope("r1", "s1", Read("r1"), 0, 0))
    assert w.net.sent == sent and "r1" in s.pending_read


def test_correct_server_answers_reads_with_v(quiet_world):
    w = quiet_world("CAM")
    s = w.hosts["s2"]
    seen = []
    w.readers["r1"].deliver = seen.append
    s.deliver(Envelope("r1", "s2", Read("r1"), 0, 0))
    w.run(w.cfg.delta)
    assert [e.payload for e in seen] == [Reply("s2", (INITIAL,))]


def test_write_reaches_pending_readers_and_curing_servers(quiet_world):
    w = quiet_world("CAM")
    s = w.hosts["s2"]
    s.pending_read.add("r1")
    s.curing.add("s5")
    before = w.net.sent
    entry = ValueEntry("a", 1)
    s.deliver(Envelope("w", "s2", Write("w", entry), 0, 0))
    assert entry in s.V and w.net.sent == before + 2


def test_writes_from_non_writers_are_ignored(quiet_world):
    w = quiet_world("CAM")
    s = w.hosts["s2"]
    s.deliver(Envelope("r1", "s2", Write("r1", ValueEntry("evil", 5)), 0, 0))
    assert ValueEntry("evil", 5) not in s.V


def test_departure_triggers_maintenance_lasting_two_deltas(quiet_world):
    w = quiet_world("CAM")
    s = w.hosts["s3"]
    w.run(100)
    s.infected()
    s.released()
    assert s.curing_state
    w.run(119)
    assert s.curing_state
    w.run(120)
    assert not s.curing_state and w.recoveries == {("s3", 100): 120}
    assert INITIAL in s.V


def test_reinfection_cancels_pending_maintenance(quiet_world):
    w = quiet_world("CAM")
    s = w.hosts["s3"]
    s.released()
    w.run(5)
    s.infected()
    w.run(40)
    assert s.curing_state and not w.recoveries
