"""Regular-register history checking, exact termination, and measured curing time."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .clients import OpRecord
from .mobility import FailureTimeline, Label
from .values import INITIAL, ValueEntry


@dataclass
class History:
    ops: list[OpRecord] = field(default_factory=list)

    def add(self, op: OpRecord) -> None:
        self.ops.append(op)

    @property
    def writes(self) -> list[OpRecord]:
        return sorted((o for o in self.ops if o.kind == "write"), key=lambda o: o.entry.sn)

    @property
    def reads(self) -> list[OpRecord]:
        return [o for o in self.ops if o.kind == "read"]

    def to_json(self) -> list[dict]:
        return [o.to_json() for o in self.ops]

    @classmethod
    def from_json(cls, rows: Iterable[dict]) -> "History":
        h = cls()
        for r in rows:
            entry = None if r["entry"] is None else ValueEntry(r["entry"][0], r["entry"][1])
            h.add(OpRecord(r["kind"], r["client"], r["t_begin"], r["t_end"], entry,
                           r.get("no_quorum", False)))
        return h


@dataclass(frozen=True)
class Finding:
    kind: str
    client: str
    t_begin: int
    t_end: Optional[int]
    detail: str


def _precedes(a: OpRecord, b: OpRecord) -> bool:
    return a.t_end is not None and a.t_end < b.t_begin


def check_validity(h: History) -> list[Finding]:
    """Every complete read returns the last preceding write or an overlapping one.

    Reads that found no quorum are termination problems, not validity ones,
    and are skipped here.  An empty list means the history is valid.
    """
    writes = h.writes
    for a, b in zip(writes, writes[1:]):
        if not _precedes(a, b):
            raise ValueError(f"writes sn={a.entry.sn} and sn={b.entry.sn} overlap (not SWMR)")
    findings = []
    for r in h.reads:
        if not r.complete or r.no_quorum:
            continue
        before = [w for w in writes if _precedes(w, r)]
        last = before[-1].entry if before else INITIAL
        allowed = {last}
        allowed.update(w.entry for w in writes if not _precedes(w, r) and not _precedes(r, w))
        if r.entry not in allowed:
            findings.append(Finding("validity", r.client, r.t_begin, r.t_end,
                                    f"returned {r.entry!r}, allowed {sorted(allowed, key=ValueEntry.key)}"))
    return findings


def check_termination(h: History, delta: int) -> list[Finding]:
    findings = []
    for op in h.ops:
        if not op.complete:
            findings.append(Finding("incomplete", op.client, op.t_begin, None, "never returned"))
            continue
        want = delta if op.kind == "write" else 2 * delta
        if op.t_end - op.t_begin != want:
            findings.append(Finding("duration", op.client, op.t_begin, op.t_end,
                                    f"took {op.t_end - op.t_begin}, expected {want}"))
        if op.kind == "read" and op.no_quorum:
            findings.append(Finding("no-quorum", op.client, op.t_begin, op.t_end,
                                    "no pair reached the reply quorum"))
    return findings


@dataclass(frozen=True)
class CuredSpan:
    server: str
    departed_at: int
    ended_at: int
    how: str          # "recovered" | "reinfected" | "horizon"

    @property
    def length(self) -> int:
        return self.ended_at - self.departed_at


def cured_spans(timeline: FailureTimeline, recoveries: dict[tuple[str, int], int]) -> list[CuredSpan]:
    spans = []
    for s in timeline.servers:
        for iv in timeline.intervals[s]:
            if iv.label is not Label.CURED:
                continue
            rec = recoveries.get((s, iv.departed_at))
            nxt = min((o.start for o in timeline.intervals[s]
                       if o.label is Label.BYZANTINE and o.start >= iv.start), default=None)
            if rec is not None and (nxt is None or rec <= nxt):
                spans.append(CuredSpan(s, iv.departed_at, rec, "recovered"))
            elif nxt is not None:
                spans.append(CuredSpan(s, iv.departed_at, nxt, "reinfected"))
            else:
                spans.append(CuredSpan(s, iv.departed_at, timeline.horizon, "horizon"))
    return spans


def measure_gamma(timeline: FailureTimeline, recoveries: dict[tuple[str, int], int]) -> int:
    """Longest span from an agent's departure to the host's measured recovery.

    Spans cut short by a re-infection count with their truncated length;
    spans still open at the horizon count as far as they were observed.
    """
    return max((sp.length for sp in cured_spans(timeline, recoveries)), default=0)
