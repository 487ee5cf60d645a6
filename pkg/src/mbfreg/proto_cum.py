"""Server side of the register emulation when servers cannot tell they were cured.

Every server runs a maintenance cycle every 2δ whether it needs it or not:
it promotes ``V_safe`` to ``V``, asks everybody for their values under a
fresh nonce and refills ``V_safe`` from pairs that enough distinct servers
vouch for.  Freshly written values wait in ``W`` for 4δ so that they survive
until the cycles have picked them up.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional

from .messages import Echo, EchoReq, Read, ReadAck, ReadFw, Reply, Write
from .proto_cam import count_support, movement_ratio
from .simclock import Engine, Envelope, Network
from .values import INITIAL, ValueEntry, VSet, newest


@dataclass(frozen=True)
class CumThresholds:
    k: int
    n_min: int
    reply_q: int
    echo_q: int


# Echo threshold per agent, by moves per round.  With one move per round a
# cured server can collect 4f garbage echoes in one cycle (its own staged
# writes, hosts cured at the cycle start, and hosts Byzantine during it), so
# 3f + 1 is not enough there.
ECHO_PER_AGENT = {1: 4, 2: 6}


def thresholds_cum(delta: int, delta_move: int, f: int) -> CumThresholds:
    if f < 1:
        raise ValueError("f must be at least 1")
    k = movement_ratio(delta, delta_move)
    return CumThresholds(k, (5 * k + 2) * f + 1, (3 * k + 1) * f + 1, ECHO_PER_AGENT[k] * f + 1)


def select_three_pairs_max_sn(echo_vals: Mapping[str, Iterable[ValueEntry]],
                              echo_q: int) -> Optional[list[ValueEntry]]:
    """Like the cured-aware selector, but ``None`` (not ``[]``) when nothing qualifies."""
    support = count_support(echo_vals)
    qualified = sorted((e for e, c in support.items() if c >= echo_q), key=ValueEntry.key)
    return qualified[-3:] if qualified else None


def con_cut(V: Iterable[ValueEntry], V_safe: Iterable[ValueEntry],
            W: Iterable[ValueEntry]) -> list[ValueEntry]:
    """``V_safe ∘ V ∘ W`` without duplicates, cut to the three newest pairs."""
    return newest([*V_safe, *V, *W], 3)


class CumServer:
    def __init__(self, sid: str, engine: Engine, network: Network, thresholds: CumThresholds,
                 delta: int, phase: int, rng: random.Random, writer: str = "w",
                 on_recover: Optional[Callable[[str, int, int], None]] = None):
        if not 0 <= phase < 2 * delta:
            raise ValueError("maintenance phase must lie in [0, 2δ)")
        self.sid = sid
        self.engine = engine
        self.net = network
        self.th = thresholds
        self.delta = delta
        self.phase = phase
        self.rng = rng
        self.writer = writer
        self.on_recover = on_recover
        self.V = VSet([INITIAL])
        self.V_safe = VSet([INITIAL])
        self.W: dict[ValueEntry, int] = {}        # pair -> expiry tick
        self.pending_read: set[str] = set()
        self.echo_read: set[str] = set()
        self.echo_vals: dict[str, set[ValueEntry]] = {}
        self._support: dict[ValueEntry, int] = {}   # distinct senders per pair, kept in step
        self.rand: Optional[int] = None
        self.byzantine = False
        # instrumentation only; the protocol never reads these
        self._departed_at: Optional[int] = None
        self._taint_until = 0
        self._clean_cycle_at: Optional[int] = None

    def start(self) -> None:
        self.engine.schedule(self.phase, self._cycle)

    # -- host lifecycle ----------------------------------------------------
    def infected(self) -> None:
        self.byzantine = True
        self._departed_at = None
        self._clean_cycle_at = None

    def released(self) -> None:
        now = self.engine.now
        self.byzantine = False
        self._departed_at = now
        self._clean_cycle_at = None
        self.timer_check()
        self._taint_until = max(self.W.values(), default=now)
        self._check_quorum()

    def captured_readers(self) -> set[str]:
        return self.pending_read | self.echo_read

    def corrupt(self, garbage: list[ValueEntry], now: int) -> None:
        self.V.replace(garbage)
        self.V_safe.replace(garbage)
        self.W = {g: now + 4 * self.delta for g in garbage}
        if garbage:   # a non-compliant timer that timer_check must throw away
            self.W[ValueEntry(garbage[0].value + "-late", garbage[0].sn + 1)] = now + 9 * self.delta
        self.rand = 0
        self.echo_vals = {s: set(garbage) for s in self.net.servers}
        self._support = count_support(self.echo_vals)

    # -- maintenance -------------------------------------------------------
    def _cycle(self) -> None:
        now = self.engine.now
        self.engine.schedule(now + 2 * self.delta, self._cycle)
        if self.byzantine:
            return
        self._track_recovery(now)
        self.echo_vals.clear()
        self._support.clear()
        self.V.replace(self.V_safe)
        self.V_safe.clear()
        self.rand = self.rng.getrandbits(64)
        self.net.broadcast(self.sid, EchoReq(self.sid, self.rand))

    def _track_recovery(self, now: int) -> None:
        if self._departed_at is None:
            return
        if self._clean_cycle_at is None:
            self._clean_cycle_at = now      # first cycle run entirely by correct code
            return
        if self.on_recover is not None:
            self.on_recover(self.sid, self._departed_at, max(now, self._taint_until))
        self._departed_at = None

    def timer_check(self) -> None:
        if not self.W:
            return
        now = self.engine.now
        limit = 4 * self.delta
        self.W = {e: exp for e, exp in self.W.items() if now < exp <= now + limit}

    def _check_quorum(self) -> None:
        q = self.th.echo_q
        qualified = sorted((e for e, c in self._support.items() if c >= q), key=ValueEntry.key)
        if not qualified:
            return
        picked = qualified[-3:]
        before = self.V_safe.entries
        self.V_safe.insert_all(picked)
        if self.V_safe.entries != before:
            reply = Reply(self.sid, self.V_safe.entries)
            for c in sorted(self.pending_read | self.echo_read):
                self.net.unicast(self.sid, c, reply)

    # -- message handlers --------------------------------------------------
    def deliver(self, env: Envelope) -> None:
        self.timer_check()
        p = env.payload
        servers = self.net.server_set
        if isinstance(p, Write):
            if env.sender == self.writer:
                self.on_write(p.entry)
        elif isinstance(p, Read):
            if env.sender not in servers:
                self.on_read(p.client)
        elif isinstance(p, ReadFw):
            if env.sender in servers:
                self.pending_read.add(p.client)
        elif isinstance(p, ReadAck):
            if env.sender not in servers:
                self.pending_read.discard(p.client)
                self.echo_read.discard(p.client)
        elif isinstance(p, Echo):
            if env.sender in servers:
                self.on_echo(p)
        elif isinstance(p, EchoReq):
            if env.sender in servers:
                self.on_echo_req(p)

    def on_write(self, entry: ValueEntry) -> None:
        self.W.setdefault(entry, self.engine.now + 4 * self.delta)
        reply = Reply(self.sid, (entry,))
        for c in sorted(self.pending_read | self.echo_read):
            self.net.unicast(self.sid, c, reply)
        # carries no nonce, so receivers' freshness guard never counts it
        self.net.broadcast(self.sid, Echo(self.sid, (entry,)))

    def on_read(self, client: str) -> None:
        self.pending_read.add(client)
        self.net.unicast(self.sid, client, Reply(self.sid, tuple(self.reply_source())))
        self.net.broadcast(self.sid, ReadFw(self.sid, client))

    def on_echo(self, echo: Echo) -> None:
        if echo.nonce is None or echo.nonce != self.rand:
            return
        mine = self.echo_vals.setdefault(echo.server, set())
        crossed = False
        for e in echo.entries:
            if e not in mine:
                mine.add(e)
                c = self._support[e] = self._support.get(e, 0) + 1
                crossed |= c == self.th.echo_q
        self.echo_read |= echo.pending
        if crossed:
            self._check_quorum()

    def on_echo_req(self, req: EchoReq) -> None:
        entries = tuple(dict.fromkeys([*self.V, *sorted(self.W, key=ValueEntry.key)]))
        self.net.unicast(self.sid, req.server,
                         Echo(self.sid, entries, pending=frozenset(self.pending_read),
                              nonce=req.nonce))

    # -- observation -------------------------------------------------------
    def reply_source(self) -> list[ValueEntry]:
        self.timer_check()
        return con_cut(self.V, self.V_safe, self.W)

    def snapshot(self) -> dict:
        return {"V": [e.to_json() for e in self.V], "V_safe": [e.to_json() for e in self.V_safe],
                "W": sorted([[e.value, e.sn, exp] for e, exp in self.W.items()], key=lambda x: x[1]),
                "pending_read": sorted(self.pending_read)}
