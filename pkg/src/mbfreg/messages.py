"""Message payloads exchanged between clients and servers.

Every payload names its originator; the network refuses to deliver a payload
whose originator differs from the envelope sender, which is how the
authenticated-channel assumption is enforced.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .values import ValueEntry


@dataclass(frozen=True)
class Write:
    writer: str
    entry: ValueEntry

    @property
    def origin(self) -> str:
        return self.writer


@dataclass(frozen=True)
class Read:
    client: str

    @property
    def origin(self) -> str:
        return self.client


@dataclass(frozen=True)
class ReadAck:
    client: str

    @property
    def origin(self) -> str:
        return self.client


@dataclass(frozen=True)
class ReadFw:
    server: str
    client: str

    @property
    def origin(self) -> str:
        return self.server


@dataclass(frozen=True)
class Reply:
    server: str
    entries: tuple[ValueEntry, ...]

    @property
    def origin(self) -> str:
        return self.server


@dataclass(frozen=True)
class Echo:
    """An echo of a server's values.

    ``bottom`` marks the cured-aware "I was just cured" echo; ``nonce`` is
    only meaningful in the cured-unaware protocol.
    """

    server: str
    entries: tuple[ValueEntry, ...] = ()
    bottom: bool = False
    pending: frozenset = field(default_factory=frozenset)
    nonce: Optional[int] = None

    @property
    def origin(self) -> str:
        return self.server


@dataclass(frozen=True)
class EchoReq:
    server: str
    nonce: Optional[int] = None

    @property
    def origin(self) -> str:
        return self.server


Payload = Union[Write, Read, ReadAck, ReadFw, Reply, Echo, EchoReq]


def describe(payload: Payload) -> dict:
    """JSON-friendly rendering used by trace dumps."""
    kind = type(payload).__name__.upper()
    out: dict = {"kind": kind, "origin": payload.origin}
    if isinstance(payload, Write):
        out["entry"] = payload.entry.to_json()
    elif isinstance(payload, (Read, ReadAck)):
        pass
    elif isinstance(payload, ReadFw):
        out["client"] = payload.client
    elif isinstance(payload, Reply):
        out["entries"] = [e.to_json() for e in payload.entries]
    elif isinstance(payload, Echo):
        out["entries"] = [e.to_json() for e in payload.entries]
        if payload.bottom:
            out["bottom"] = True
        if payload.pending:
            out["pending"] = sorted(payload.pending)
        if payload.nonce is not None:
            out["nonce"] = payload.nonce
    elif isinstance(payload, EchoReq):
        if payload.nonce is not None:
            out["nonce"] = payload.nonce
    return out
