"""Deterministic discrete-event engine and the authenticated message layer.

Time is an integer tick.  Within one tick, events run in three phases:
agent movements first, then message deliveries, then protocol timers.  Inside
a phase, events run in insertion order.  Running deliveries before timers
means a wait of ``x`` ticks observes every message delivered at exactly the
deadline tick, i.e. "delivered by time t+x" has its inclusive meaning.
"""

from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, Iterable, Optional, Protocol

from .messages import Payload, describe


class Phase(IntEnum):
    MOVE = 0
    DELIVER = 1
    TIMER = 2


class SchedulingError(ValueError):
    pass


class Engine:
    """Global clock plus a priority queue of timed callbacks."""

    def __init__(self) -> None:
        self.now = 0
        self._queue: list = []
        self._seq = itertools.count()
        self._cancelled: set[int] = set()
        self.executed = 0

    def schedule(self, at: int, callback: Callable[..., None], *args,
                 phase: Phase = Phase.TIMER) -> int:
        if at < self.now:
            raise SchedulingError(f"cannot schedule at {at}, clock is at {self.now}")
        event_id = next(self._seq)
        heapq.heappush(self._queue, (at, int(phase), event_id, callback, args))
        return event_id

    def cancel(self, event_id: int) -> None:
        self._cancelled.add(event_id)

    def pending(self) -> int:
        return len(self._queue)

    def run_until(self, t: int) -> None:
        if t < self.now:
            raise SchedulingError(f"cannot run backwards to {t} from {self.now}")
        queue = self._queue
        while queue and queue[0][0] <= t:
            at, _phase, event_id, callback, args = heapq.heappop(queue)
            if event_id in self._cancelled:
                self._cancelled.discard(event_id)
                continue
            self.now = at
            self.executed += 1
            callback(*args)
        self.now = t


# --------------------------------------------------------------------------
# Delay policies
# --------------------------------------------------------------------------

class DelayPolicy(Protocol):
    name: str

    def delay(self, sender_byz: bool, recipient_byz: bool) -> int: ...


@dataclass
class FixedMax:
    delta: int
    name: str = "fixed-max"

    def delay(self, sender_byz: bool, recipient_byz: bool) -> int:
        return self.delta


class SeededUniform:
    name = "uniform"

    def __init__(self, delta: int, seed: int):
        self.delta = delta
        self.rng = random.Random(seed)

    def delay(self, sender_byz: bool, recipient_byz: bool) -> int:
        return self.rng.randint(1, self.delta)


@dataclass
class Adversarial:
    """Traffic touching a Byzantine host takes one tick; everything else takes δ."""

    delta: int
    name: str = "adversarial"

    def delay(self, sender_byz: bool, recipient_byz: bool) -> int:
        return 1 if (sender_byz or recipient_byz) else self.delta


def make_policy(name: str, delta: int, seed: int = 0) -> DelayPolicy:
    if name in ("fixed-max", "fixed", "max"):
        return FixedMax(delta)
    if name in ("uniform", "seeded-uniform"):
        return SeededUniform(delta, seed)
    if name == "adversarial":
        return Adversarial(delta)
    raise ValueError(f"unknown delay policy {name!r}")


# --------------------------------------------------------------------------
# Network
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Envelope:
    sender: str
    to: str
    payload: Payload
    sent_at: int
    deliver_at: int


class AuthenticationError(ValueError):
    pass


class Network:
    """Reliable, authenticated point-to-point channels with bounded delay.

    ``is_byzantine`` is consulted at send time by the adversarial policy.
    ``route`` is called with each envelope at its delivery tick.
    """

    def __init__(self, engine: Engine, delta: int, policy: DelayPolicy,
                 servers: Iterable[str],
                 route: Callable[[Envelope], None],
                 is_byzantine: Callable[[str], bool] = lambda pid: False,
                 trace: Optional[list] = None):
        if delta < 1:
            raise ValueError("δ must be at least one tick")
        self.engine = engine
        self.delta = delta
        self.policy = policy
        self.servers = list(servers)
        self.server_set = frozenset(self.servers)
        self.route = route
        self.is_byzantine = is_byzantine
        self.trace = trace
        self.sent = 0
        self.delivered = 0

    def unicast(self, sender: str, to: str, payload: Payload) -> Envelope:
        if payload.origin != sender:
            raise AuthenticationError(f"{sender} cannot send a payload signed by {payload.origin}")
        now = self.engine.now
        d = self.policy.delay(self.is_byzantine(sender), self.is_byzantine(to))
        if not 1 <= d <= self.delta:
            raise AssertionError(f"delay policy produced {d} outside [1, {self.delta}]")
        env = Envelope(sender, to, payload, now, now + d)
        self.sent += 1
        self.engine.schedule(env.deliver_at, self._deliver, env, phase=Phase.DELIVER)
        return env

    def broadcast(self, sender: str, payload: Payload) -> list[Envelope]:
        return [self.unicast(sender, s, payload) for s in self.servers]

    def _deliver(self, env: Envelope) -> None:
        self.delivered += 1
        if self.trace is not None:
            rec = {"t": env.deliver_at, "ev": "deliver", "from": env.sender, "to": env.to,
                   "sent": env.sent_at}
            rec.update(describe(env.payload))
            self.trace.append(rec)
        self.route(env)
