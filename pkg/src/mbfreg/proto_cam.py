"""Server side of the register emulation when servers know they were just cured.

A cured server is told so by the oracle at the tick its agent leaves.  It
then wipes its state, asks everybody for their values, announces that its
own recent echoes are untrustworthy (the ⊥ echo), and after 2δ rebuilds ``V``
from the pairs echoed by enough distinct servers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional

from .messages import Echo, EchoReq, Read, ReadAck, Reply, Write
from .simclock import Engine, Envelope, Network, Phase
from .values import INITIAL, ValueEntry, VSet


class UnsupportedRegime(ValueError):
    """Raised for Δ outside [δ, 3δ), where the thresholds are not defined."""


def movement_ratio(delta: int, delta_move: int) -> int:
    """k = ⌈2δ/Δ⌉ — how many agent moves fit in one request/reply round."""
    if not delta <= delta_move < 3 * delta:
        raise UnsupportedRegime(f"need δ ≤ Δ < 3δ, got δ={delta}, Δ={delta_move}")
    return math.ceil(2 * delta / delta_move)


@dataclass(frozen=True)
class CamThresholds:
    k: int
    n_min: int
    reply_q: int
    echo_q: int


def thresholds_cam(delta: int, delta_move: int, f: int) -> CamThresholds:
    if f < 1:
        raise ValueError("f must be at least 1")
    k = movement_ratio(delta, delta_move)
    if k == 1:
        n_min, reply_q = 4 * f + 1, 2 * f + 1
    else:
        n_min, reply_q = 6 * f + 1, 3 * f + 1
    return CamThresholds(k, n_min, reply_q, (k + 1) * f)


def count_support(echo_vals: Mapping[str, Iterable[ValueEntry]]) -> dict[ValueEntry, int]:
    """Number of distinct senders vouching for each pair."""
    support: dict[ValueEntry, int] = {}
    for entries in echo_vals.values():
        for e in set(entries):
            support[e] = support.get(e, 0) + 1
    return support


def select_d_pairs_max_sn(echo_vals: Mapping[str, Iterable[ValueEntry]], echo_q: int,
                          d: int = 3) -> list[ValueEntry]:
    """Pairs echoed by at least ``echo_q`` distinct senders; the ``d`` newest if more qualify."""
    support = count_support(echo_vals)
    qualified = sorted((e for e, c in support.items() if c >= echo_q), key=ValueEntry.key)
    return qualified[-d:]


class CamServer:
    """One replica.  Handlers run only while the host is not Byzantine."""

    def __init__(self, sid: str, engine: Engine, network: Network, thresholds: CamThresholds,
                 delta: int, writer: str = "w",
                 on_recover: Optional[Callable[[str, int, int], None]] = None):
        self.sid = sid
        self.engine = engine
        self.net = network
        self.th = thresholds
        self.delta = delta
        self.writer = writer
        self.on_recover = on_recover
        self.V = VSet([INITIAL])
        self.pending_read: set[str] = set()
        self.cured = False
        self.curing_state = False
        self.echo_vals: dict[str, set[ValueEntry]] = {}
        self.bottom_senders: set[str] = set()
        self.curing: set[str] = set()
        self.byzantine = False
        self.epoch = 0              # bumped on every infection; stale timers check it
        self._departed_at: Optional[int] = None

    # -- host lifecycle (driven by the world) ------------------------------
    def infected(self) -> None:
        self.byzantine = True
        self.epoch += 1

    def released(self) -> None:
        """The agent left: the oracle reports ``cured`` and maintenance starts at once."""
        self.byzantine = False
        self.cured = True
        self._departed_at = self.engine.now
        self.maintenance()

    def captured_readers(self) -> set[str]:
        return set(self.pending_read)

    def corrupt(self, garbage: list[ValueEntry], now: int) -> None:
        self.V.replace(garbage)
        self.echo_vals = {s: set(garbage) for s in self.net.servers}
        self.bottom_senders.clear()
        self.curing = set(self.net.servers)

    # -- maintenance -------------------------------------------------------
    def maintenance(self) -> None:
        self.cured = False
        self.curing_state = True
        self.V.clear()
        self.echo_vals.clear()
        self.bottom_senders.clear()
        self.pending_read.clear()
        self.curing.clear()
        self.net.broadcast(self.sid, EchoReq(self.sid))
        self._aware_all()
        epoch = self.epoch
        self.engine.schedule(self.engine.now + self.delta, self._aware_all_again, epoch)
        self.engine.schedule(self.engine.now + 2 * self.delta, self._finish_maintenance, epoch)

    def _aware_all(self) -> None:
        self.net.broadcast(self.sid, Echo(self.sid, bottom=True))

    def _aware_all_again(self, epoch: int) -> None:
        if epoch == self.epoch and not self.byzantine:
            self._aware_all()

    def _finish_maintenance(self, epoch: int) -> None:
        if epoch != self.epoch or self.byzantine:
            return   # re-infected meanwhile: the adversary owns this host again
        self.V.insert_all(select_d_pairs_max_sn(self.echo_vals, self.th.echo_q))
        for j in sorted(self.curing):
            self.net.unicast(self.sid, j, Echo(self.sid, self.V.entries))
        self.curing_state = False
        if self.V:
            for c in sorted(self.pending_read):
                self.net.unicast(self.sid, c, Reply(self.sid, self.V.entries))
        if self.on_recover is not None and self._departed_at is not None:
            self.on_recover(self.sid, self._departed_at, self.engine.now)
        self._departed_at = None

    # -- message handlers --------------------------------------------------
    def deliver(self, env: Envelope) -> None:
        p = env.payload
        servers = self.net.server_set
        if isinstance(p, Write):
            if env.sender == self.writer:
                self.on_write(p.entry)
        elif isinstance(p, Read):
            if env.sender not in servers:
                self.on_read(p.client)
        elif isinstance(p, ReadAck):
            if env.sender not in servers:
                self.pending_read.discard(p.client)
        elif isinstance(p, Echo):
            if env.sender in servers:
                self.on_echo(p)
        elif isinstance(p, EchoReq):
            if env.sender in servers:
                self.on_echo_req(p.server)
        # anything else (REPLY, READ_FW) is noise for a CAM server

    def on_write(self, entry: ValueEntry) -> None:
        self.V.insert(entry)
        for c in sorted(self.pending_read):
            self.net.unicast(self.sid, c, Reply(self.sid, (entry,)))
        for j in sorted(self.curing):
            self.net.unicast(self.sid, j, Echo(self.sid, self.V.entries))

    def on_read(self, client: str) -> None:
        self.pending_read.add(client)
        if self.V and not self.curing_state:
            self.net.unicast(self.sid, client, Reply(self.sid, self.V.entries))

    def on_echo(self, echo: Echo) -> None:
        if echo.bottom:
            # whatever this sender echoed before now may stem from its Byzantine past
            self.bottom_senders.add(echo.server)
            self.echo_vals.pop(echo.server, None)
        else:
            self.echo_vals.setdefault(echo.server, set()).update(echo.entries)

    def on_echo_req(self, requester: str) -> None:
        self.curing.add(requester)
        if self.V:
            self.net.unicast(self.sid, requester, Echo(self.sid, self.V.entries))

    # -- observation -------------------------------------------------------
    def reply_source(self) -> tuple[ValueEntry, ...]:
        return self.V.entries

    def snapshot(self) -> dict:
        return {"V": [e.to_json() for e in self.V], "curing_state": self.curing_state,
                "pending_read": sorted(self.pending_read)}
