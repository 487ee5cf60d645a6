"""Mobile Byzantine agents: schedules, failure timelines and adversary strategies."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

from .messages import Echo, EchoReq, Read, ReadFw, Reply
from .values import ValueEntry


def server_ids(n: int) -> list[str]:
    return [f"s{i}" for i in range(1, n + 1)]


def server_index(sid: str) -> int:
    return int(sid[1:])


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------

@dataclass
class AgentSchedule:
    agent_id: int
    dwell_min: int
    visits: list[tuple[str, int]] = field(default_factory=list)

    def to_text(self) -> str:
        pairs = " ".join(f"({s},{t})" for s, t in self.visits)
        return f"agent {self.agent_id} dwell {self.dwell_min} : {pairs}"


@dataclass(frozen=True)
class Violation:
    agent_id: int
    index: int
    reason: str


class ScheduleError(ValueError):
    pass


def validate(schedule: AgentSchedule, delta_global: int) -> Optional[Violation]:
    """Return ``None`` when the schedule respects ITB dwell rules, else the first offence."""
    if schedule.dwell_min < delta_global:
        return Violation(schedule.agent_id, 0,
                         f"dwell {schedule.dwell_min} below global minimum {delta_global}")
    for i in range(1, len(schedule.visits)):
        (prev_s, prev_t), (cur_s, cur_t) = schedule.visits[i - 1], schedule.visits[i]
        gap = cur_t - prev_t
        if gap < schedule.dwell_min:
            return Violation(schedule.agent_id, i, f"gap {gap} < dwell {schedule.dwell_min}")
        if cur_s == prev_s:
            return Violation(schedule.agent_id, i, "agent 'moves' to the server it occupies")
    if schedule.visits and schedule.visits[0][1] < 0:
        return Violation(schedule.agent_id, 0, "negative arrival tick")
    return None


_LINE = re.compile(r"^\s*agent\s+(\d+)\s+dwell\s+(\d+)\s*:\s*(.*)$")
_PAIR = re.compile(r"\(\s*(s\d+)\s*,\s*(\d+)\s*\)")


def parse_schedules(text: str) -> list[AgentSchedule]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        m = _LINE.match(line)
        if not m:
            raise ScheduleError(f"line {lineno}: cannot parse {line!r}")
        visits = [(s, int(t)) for s, t in _PAIR.findall(m.group(3))]
        out.append(AgentSchedule(int(m.group(1)), int(m.group(2)), visits))
    return out


def format_schedules(schedules: Iterable[AgentSchedule]) -> str:
    return "\n".join(s.to_text() for s in schedules) + "\n"


def generate_sstar(n: int, f: int, delta_move: int, horizon: int, start: int = 0) -> list[AgentSchedule]:
    """Lock-step worst case: every ``delta_move`` ticks all agents jump to the next group.

    Group ``i`` is servers ``i*f+1 … i*f+f`` taken cyclically over the ``n``
    servers, so every server is hit once before any is hit again.
    """
    if not n >= f >= 1:
        raise ValueError("need n ≥ f ≥ 1")
    if 2 * f > n:
        raise ValueError("lock-step groups would overlap; need n ≥ 2f")
    ids = server_ids(n)
    schedules = [AgentSchedule(a, delta_move, []) for a in range(f)]
    i = 0
    for t in range(start, horizon, delta_move):
        for a in range(f):
            schedules[a].visits.append((ids[(i * f + a) % n], t))
        i += 1
    return schedules


def generate_random_itb(n: int, f: int, delta_move: int, horizon: int, seed: int,
                        tail_mean: float = 3.0) -> list[AgentSchedule]:
    """Unsynchronised agents: dwell = Δᵢ + geometric tail, target uniform among free servers."""
    rng = random.Random(seed)
    ids = server_ids(n)
    dwell = [delta_move] + [delta_move + rng.randint(0, max(0, delta_move // 2)) for _ in range(f - 1)]
    start = rng.sample(ids, f)
    schedules = [AgentSchedule(a, dwell[a], [(start[a], 0)]) for a in range(f)]
    where = list(start)
    p = 1.0 / (1.0 + tail_mean)

    def tail() -> int:
        if rng.random() < 0.5:
            return 0
        k = 0
        while rng.random() > p:
            k += 1
        return k

    next_move = [dwell[a] + tail() for a in range(f)]
    while True:
        a = min(range(f), key=lambda x: (next_move[x], x))
        t = next_move[a]
        if t >= horizon:
            break
        busy = set(where)
        target = rng.choice([s for s in ids if s not in busy])
        where[a] = target
        schedules[a].visits.append((target, t))
        next_move[a] = t + dwell[a] + tail()
    return schedules


# ---------------------------------------------------------------------------
# Failure timelines
# ---------------------------------------------------------------------------

class Label(str, Enum):
    CORRECT = "correct"
    CURED = "cured"
    BYZANTINE = "byzantine"


@dataclass
class Interval:
    start: int
    end: Optional[int]          # exclusive; None = still open ("pending")
    label: Label
    departed_at: Optional[int] = None

    def covers(self, t: int, horizon: int) -> bool:
        end = horizon if self.end is None else self.end
        return self.start <= t < end


@dataclass
class Move:
    tick: int
    agent: int
    server: str
    arrive: bool


class FailureTimeline:
    """Per-server labelled intervals; ticks not covered by any interval are Correct."""

    def __init__(self, servers: Sequence[str], horizon: int):
        self.servers = list(servers)
        self.horizon = horizon
        self.intervals: dict[str, list[Interval]] = {s: [] for s in self.servers}
        self.moves: list[Move] = []

    # -- queries -----------------------------------------------------------
    def label_at(self, server: str, t: int) -> Label:
        for iv in self.intervals[server]:
            if iv.covers(t, self.horizon):
                return iv.label
        return Label.CORRECT

    def byzantine_at(self, t: int) -> set[str]:
        return {s for s in self.servers if self.label_at(s, t) is Label.BYZANTINE}

    def departures(self) -> list[tuple[str, int]]:
        return [(m.server, m.tick) for m in self.moves if not m.arrive]

    def cured_spans(self) -> list[Interval]:
        return [iv for s in self.servers for iv in self.intervals[s] if iv.label is Label.CURED]

    # -- finalisation ------------------------------------------------------
    def finalize(self, recoveries: dict[tuple[str, int], int]) -> None:
        """Close cured intervals with the protocol-measured recovery ticks.

        A cured interval ends at the earliest of: the measured recovery, the
        next infection of the same server, or the horizon (left open).
        """
        for s in self.servers:
            ivs = self.intervals[s]
            for i, iv in enumerate(ivs):
                if iv.label is not Label.CURED:
                    continue
                nxt = min((o.start for o in ivs if o.label is Label.BYZANTINE and o.start >= iv.start),
                          default=None)
                rec = recoveries.get((s, iv.departed_at))
                candidates = [x for x in (rec, nxt) if x is not None]
                iv.end = min(candidates) if candidates else None

    def to_json(self) -> dict:
        return {s: [[iv.start, iv.end, iv.label.value] for iv in self.intervals[s]]
                for s in self.servers}


def derive_timeline(schedules: Sequence[AgentSchedule], servers: Sequence[str],
                    horizon: int) -> FailureTimeline:
    """Build Byzantine occupancy and open Cured intervals from agent schedules."""
    delta_global = min((s.dwell_min for s in schedules), default=1)
    for sch in schedules:
        bad = validate(sch, delta_global)
        if bad is not None:
            raise ScheduleError(f"agent {bad.agent_id}, visit {bad.index}: {bad.reason}")
        for srv, _ in sch.visits:
            if srv not in servers:
                raise ScheduleError(f"agent {sch.agent_id} visits unknown server {srv}")
    tl = FailureTimeline(servers, horizon)
    occupancy: list[tuple[str, int, int, int]] = []   # (server, start, end, agent)
    for sch in schedules:
        visits = [(s, t) for s, t in sch.visits if t < horizon]
        for i, (srv, t) in enumerate(visits):
            end = visits[i + 1][1] if i + 1 < len(visits) else horizon
            occupancy.append((srv, t, end, sch.agent_id))
            tl.moves.append(Move(t, sch.agent_id, srv, True))
            if end < horizon:
                tl.moves.append(Move(end, sch.agent_id, srv, False))
    by_server: dict[str, list[tuple[int, int, int]]] = {}
    for srv, a, b, agent in occupancy:
        by_server.setdefault(srv, []).append((a, b, agent))
    for srv, spans in by_server.items():
        spans.sort()
        for (a1, b1, ag1), (a2, b2, ag2) in zip(spans, spans[1:]):
            if a2 < b1:
                raise ScheduleError(f"agents {ag1} and {ag2} overlap on {srv} at tick {a2}")
        for a, b, _ in spans:
            tl.intervals[srv].append(Interval(a, b, Label.BYZANTINE))
            if b < horizon:
                nxt = [x for x, _, _ in spans if x >= b]
                if nxt and nxt[0] == b:
                    continue   # re-infected at the very tick it was vacated
                # open until the protocol reports recovery, but never past a re-infection
                tl.intervals[srv].append(Interval(b, nxt[0] if nxt else None, Label.CURED,
                                                  departed_at=b))
        tl.intervals[srv].sort(key=lambda iv: iv.start)
    # departures before arrivals at equal ticks, agents in id order
    tl.moves.sort(key=lambda m: (m.tick, m.arrive, m.agent))
    return tl


def cured_oracle(timeline: FailureTimeline, server: str, t: int, model: str = "CAM") -> bool:
    """Cured-state oracle available to servers in the cured-aware model."""
    if model.upper() != "CAM":
        raise ValueError("the cured oracle only exists in the cured-aware model")
    return timeline.label_at(server, t) is Label.CURED


@dataclass(frozen=True)
class FailureSets:
    co: frozenset
    cu: frozenset
    b: frozenset
    b_tilde: frozenset
    co_tilde: frozenset     # correct for at least one tick of the window
    sil: frozenset
    co_all: frozenset = frozenset()   # correct at every tick of the window


def failure_sets(timeline: FailureTimeline, t1: int, t2: int, delta: int) -> FailureSets:
    """Point sets at ``t1`` plus the interval sets over ``[t1, t2]``."""
    lab = timeline.label_at
    srv = timeline.servers
    co = frozenset(s for s in srv if lab(s, t1) is Label.CORRECT)
    cu = frozenset(s for s in srv if lab(s, t1) is Label.CURED)
    b = frozenset(s for s in srv if lab(s, t1) is Label.BYZANTINE)
    window = range(t1, t2 + 1)
    b_tilde = frozenset(s for s in srv if any(lab(s, x) is Label.BYZANTINE for x in window))
    co_tilde = frozenset(s for s in srv if any(lab(s, x) is Label.CORRECT for x in window))
    sil_window = range(t1, t2 - delta + 1)
    sil = frozenset(s for s in srv
                    if len(sil_window) > 0 and all(lab(s, x) is Label.CURED for x in sil_window))
    co_all = frozenset(s for s in srv if all(lab(s, x) is Label.CORRECT for x in window))
    return FailureSets(co, cu, b, b_tilde, co_tilde, sil, co_all)


# ---------------------------------------------------------------------------
# Adversary strategies
# ---------------------------------------------------------------------------

class AdversaryContext:
    """What the (coordinated) adversary may use: the network, the clock and what it has seen."""

    def __init__(self, network, engine, delta: int, model: str, readers: Sequence[str], seed: int):
        self.network = network
        self.engine = engine
        self.delta = delta
        self.model = model
        self.readers = list(readers)
        self.rng = random.Random(seed)
        #: nonces learned from ECHO_REQ envelopes delivered to Byzantine hosts
        self.nonces: dict[str, int] = {}

    @property
    def now(self) -> int:
        return self.engine.now

    def send(self, host: str, to: str, payload) -> None:
        self.network.unicast(host, to, payload)

    def broadcast(self, host: str, payload) -> None:
        self.network.broadcast(host, payload)


class ByzStrategy:
    """Base strategy: the host's outgoing traffic is whatever these hooks send."""

    name = "base"

    def garbage(self, ctx: AdversaryContext) -> tuple[ValueEntry, ...]:
        return ()

    def on_arrive(self, ctx: AdversaryContext, host) -> None:
        pass

    def on_message(self, ctx: AdversaryContext, host, env) -> None:
        pass

    def on_depart(self, ctx: AdversaryContext, host) -> None:
        pass


class Silent(ByzStrategy):
    """Drops everything; leaves the captured state untouched."""

    name = "silent"


class _Polluter(ByzStrategy):
    """Answers every request with garbage and leaves garbage behind."""

    def _echo_to(self, ctx: AdversaryContext, host, to: str, nonce: Optional[int]) -> None:
        ctx.send(host.sid, to, Echo(host.sid, self.garbage(ctx),
                                    pending=frozenset(ctx.readers), nonce=nonce))

    def on_arrive(self, ctx, host) -> None:
        g = self.garbage(ctx)
        for c in sorted(host.captured_readers()):
            ctx.send(host.sid, c, Reply(host.sid, g))
        if ctx.model == "CAM":
            ctx.broadcast(host.sid, Echo(host.sid, g))
        else:
            for srv, r in sorted(ctx.nonces.items()):
                self._echo_to(ctx, host, srv, r)

    def on_message(self, ctx, host, env) -> None:
        p = env.payload
        if isinstance(p, Read):
            ctx.send(host.sid, p.client, Reply(host.sid, self.garbage(ctx)))
        elif isinstance(p, ReadFw):
            ctx.send(host.sid, p.client, Reply(host.sid, self.garbage(ctx)))
        elif isinstance(p, EchoReq):
            if p.nonce is not None:
                ctx.nonces[p.server] = p.nonce
            self._echo_to(ctx, host, p.server, p.nonce)

    def on_depart(self, ctx, host) -> None:
        host.corrupt(list(self.garbage(ctx)), ctx.now)


class EchoFixedValue(_Polluter):
    """Every Byzantine host pushes the same forged pair, so forgeries can pile up."""

    name = "echo-fixed"

    def __init__(self, value: str = "forged", sn: int = 999_999):
        self.entry = ValueEntry(value, sn)

    def garbage(self, ctx):
        return (self.entry,)


class RandomGarbage(_Polluter):
    """Fresh random pairs on every message."""

    name = "random-garbage"

    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)

    def garbage(self, ctx):
        k = self.rng.randint(1, 3)
        return tuple(ValueEntry(f"junk{self.rng.randrange(10**6)}", self.rng.randint(1, 10**6))
                     for _ in range(k))


class MirrorAttack(ByzStrategy):
    """Indistinguishability attack: answer reads with the *other* execution's value."""

    name = "mirror"

    def __init__(self, mirrored: ValueEntry):
        self.mirrored = mirrored

    def garbage(self, ctx):
        return (self.mirrored,)

    def on_message(self, ctx, host, env) -> None:
        if isinstance(env.payload, Read):
            ctx.send(host.sid, env.payload.client, Reply(host.sid, (self.mirrored,)))


STRATEGIES = ("echo-fixed", "random-garbage", "silent")


def make_strategy(name: str, seed: int = 0) -> ByzStrategy:
    if name == "silent":
        return Silent()
    if name in ("echo-fixed", "echo-fixed-value"):
        return EchoFixedValue()
    if name in ("random-garbage", "random"):
        return RandomGarbage(seed)
    raise ValueError(f"unknown Byzantine strategy {name!r}")
