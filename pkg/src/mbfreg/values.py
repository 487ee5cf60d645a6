"""Register values and the bounded ordered sets servers keep them in."""

from __future__ import annotations

from typing import Iterable, Iterator, NamedTuple

#: Number of pairs a server retains in ``V`` / ``V_safe``.
CAPACITY = 3


class ValueEntry(NamedTuple):
    """A written value tagged with the writer's sequence number.

    A named tuple rather than a dataclass: pairs are hashed millions of times
    per run and tuple hashing is done in C.
    """

    value: str
    sn: int

    def key(self) -> tuple[int, str]:
        return (self.sn, self.value)

    def to_json(self) -> list:
        return [self.value, self.sn]

    def __repr__(self) -> str:  # compact form keeps traces readable
        return f"<{self.value},{self.sn}>"


INITIAL = ValueEntry("v0", 0)


class VSet:
    """Up to ``CAPACITY`` entries kept ascending by sequence number.

    Inserting a pair whose sequence number is already present is a no-op
    (first writer of a given sn wins); inserting past capacity evicts the
    lowest sequence number.
    """

    __slots__ = ("_entries", "capacity")

    def __init__(self, entries: Iterable[ValueEntry] = (), capacity: int = CAPACITY):
        self.capacity = capacity
        self._entries: list[ValueEntry] = []
        for e in entries:
            self.insert(e)

    def insert(self, entry: ValueEntry) -> None:
        for cur in self._entries:
            if cur.sn == entry.sn:
                return
        self._entries.append(entry)
        self._entries.sort(key=ValueEntry.key)
        if len(self._entries) > self.capacity:
            del self._entries[0]

    def insert_all(self, entries: Iterable[ValueEntry]) -> None:
        for e in entries:
            self.insert(e)

    def clear(self) -> None:
        self._entries.clear()

    def replace(self, entries: Iterable[ValueEntry]) -> None:
        self._entries.clear()
        self.insert_all(entries)

    @property
    def entries(self) -> tuple[ValueEntry, ...]:
        return tuple(self._entries)

    def __contains__(self, entry: object) -> bool:
        return entry in self._entries

    def __iter__(self) -> Iterator[ValueEntry]:
        return iter(tuple(self._entries))

    def __len__(self) -> int:
        return len(self._entries)

    def __bool__(self) -> bool:
        return bool(self._entries)

    def __repr__(self) -> str:
        return "VSet(" + ",".join(map(repr, self._entries)) + ")"


def newest(entries: Iterable[ValueEntry], limit: int = CAPACITY) -> list[ValueEntry]:
    """Deduplicate ``entries`` (keeping first occurrence) and keep the ``limit`` newest."""
    seen: dict[ValueEntry, None] = {}
    for e in entries:
        seen.setdefault(e, None)
    ordered = sorted(seen, key=ValueEntry.key)
    return ordered[-limit:] if limit else []
