"""The single writer and the readers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .messages import Read, ReadAck, Reply, Write
from .simclock import Engine, Envelope, Network
from .values import ValueEntry


class NoQuorum:
    """Returned by :func:`select_value` when no pair reaches the reply quorum."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NO_QUORUM"

    def __bool__(self) -> bool:
        return False


NO_QUORUM = NoQuorum()


def select_value(reply: Iterable[tuple[str, ValueEntry]], reply_q: int):
    """Newest pair reported by at least ``reply_q`` distinct servers, else ``NO_QUORUM``."""
    senders: dict[ValueEntry, set[str]] = {}
    for server, entry in reply:
        senders.setdefault(entry, set()).add(server)
    best: Optional[ValueEntry] = None
    for entry, who in senders.items():
        if len(who) >= reply_q and (best is None or entry.key() > best.key()):
            best = entry
    return NO_QUORUM if best is None else best


class SWMRViolation(RuntimeError):
    pass


@dataclass
class OpRecord:
    kind: str                   # "write" | "read"
    client: str
    t_begin: int
    t_end: Optional[int] = None
    entry: Optional[ValueEntry] = None    # written pair, or the pair a read returned
    no_quorum: bool = False

    @property
    def complete(self) -> bool:
        return self.t_end is not None

    def to_json(self) -> dict:
        return {"kind": self.kind, "client": self.client, "t_begin": self.t_begin,
                "t_end": self.t_end, "entry": None if self.entry is None else self.entry.to_json(),
                "no_quorum": self.no_quorum}


class Writer:
    def __init__(self, cid: str, engine: Engine, network: Network, delta: int,
                 record: Callable[[OpRecord], None]):
        self.cid = cid
        self.engine = engine
        self.net = network
        self.delta = delta
        self.record = record
        self.csn = 0
        self.in_flight: Optional[OpRecord] = None

    def write(self, value: str) -> OpRecord:
        if self.in_flight is not None:
            raise SWMRViolation(f"write of {value!r} while csn {self.csn} is still in flight")
        self.csn += 1
        op = OpRecord("write", self.cid, self.engine.now, entry=ValueEntry(value, self.csn))
        self.in_flight = op
        self.record(op)
        self.net.broadcast(self.cid, Write(self.cid, op.entry))
        self.engine.schedule(self.engine.now + self.delta, self._confirm, op)
        return op

    def _confirm(self, op: OpRecord) -> None:
        op.t_end = self.engine.now
        self.in_flight = None

    def deliver(self, env: Envelope) -> None:
        pass    # servers never talk to the writer


class Reader:
    def __init__(self, cid: str, engine: Engine, network: Network, delta: int, reply_q: int,
                 record: Callable[[OpRecord], None]):
        self.cid = cid
        self.engine = engine
        self.net = network
        self.delta = delta
        self.reply_q = reply_q
        self.record = record
        self.reply: set[tuple[str, ValueEntry]] = set()
        self.current: Optional[OpRecord] = None
        self.deadline: Optional[int] = None

    @property
    def busy(self) -> bool:
        return self.current is not None

    def read(self) -> OpRecord:
        if self.current is not None:
            raise RuntimeError(f"reader {self.cid} already has a read in flight")
        self.reply = set()
        op = OpRecord("read", self.cid, self.engine.now)
        self.current = op
        self.deadline = self.engine.now + 2 * self.delta
        self.record(op)
        self.net.broadcast(self.cid, Read(self.cid))
        self.engine.schedule(self.deadline, self._finish, op)
        return op

    def deliver(self, env: Envelope) -> None:
        p = env.payload
        if isinstance(p, Reply) and env.sender in self.net.server_set:
            for e in p.entries:
                self.reply.add((env.sender, e))

    def _finish(self, op: OpRecord) -> None:
        picked = select_value(self.reply, self.reply_q)
        op.t_end = self.engine.now
        if picked is NO_QUORUM:
            op.no_quorum = True
        else:
            op.entry = picked
        self.current = None
        self.deadline = None
        self.net.broadcast(self.cid, ReadAck(self.cid))
