"""Brute-force cross-checks for the closed-form bounds, and the indistinguishability attack.

Nothing here calls :mod:`mbfreg.bounds`; the two routes are compared only by
tests and by the ``verify-bounds`` command.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .clients import NO_QUORUM, select_value
from .messages import Read, Reply
from .mobility import AgentSchedule, FailureTimeline, Label, derive_timeline, generate_sstar, server_ids
from .simclock import Adversarial, Engine, Envelope, Network
from .values import ValueEntry

STATE_LIMIT = 10_000_000


class EnumerationTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class EnumGrid:
    """One desk-scale scenario point; a single agent (f = 1)."""

    n: int = 5
    delta: int = 2
    Delta: int = 4
    gamma: int = 4
    T_r: int = 4
    horizon: Optional[int] = None     # None: the agent has been moving forever

    def __post_init__(self) -> None:
        if not 2 <= self.n <= 8:
            raise ValueError("enumeration grid needs 2 ≤ n ≤ 8")
        if min(self.delta, self.Delta, self.T_r) < 1 or self.gamma < 0:
            raise ValueError("durations must be positive")


# ---------------------------------------------------------------------------
# Most servers touched by one agent within a read window
# ---------------------------------------------------------------------------

def enumerate_maxB(grid: EnumGrid) -> int:
    """Largest number of distinct hosts one agent occupies during ``[t, t+T_r]``.

    Explores every ITB-valid behaviour of a single agent as a state machine:
    a state is (ticks spent on the current host, capped at Δ; distinct hosts
    seen in the window so far).  Each tick the agent either stays or, once it
    has dwelt Δ ticks, jumps to another host — a fresh one if any is left, or
    one it already visited.  With no horizon the window may open at any
    point of the agent's stay; with a horizon the agent lands at tick 0 and
    the window is clipped to ``[0, horizon)``.
    """
    D, n = grid.Delta, grid.n
    seen = 0

    def step(states: set[tuple[int, int]]) -> set[tuple[int, int]]:
        nonlocal seen
        out = set()
        for dwell, count in states:
            out.add((min(dwell + 1, D), count))
            if dwell >= D:
                out.add((1, count))                 # back to a host already counted
                if count < n:
                    out.add((1, count + 1))         # on to a fresh host
        seen += len(out)
        if seen > STATE_LIMIT:
            raise EnumerationTooLarge(f"more than {STATE_LIMIT} states explored")
        return out

    best = 0
    if grid.horizon is None:
        frontier = {(d, 1) for d in range(1, D + 1)}
        for _ in range(grid.T_r):
            frontier = step(frontier)
        return max(c for _, c in frontier)
    # bounded run: the agent lands at tick 0; every tick may open the window
    before: set[int] = {1}                            # dwell values reachable at tick x
    for start in range(grid.horizon):
        frontier = {(d, 1) for d in before}
        last = min(start + grid.T_r, grid.horizon - 1)
        for _ in range(start, last):
            frontier = step(frontier)
        best = max(best, max(c for _, c in frontier))
        before = {min(d + 1, D) for d in before} | ({1} if any(d >= D for d in before) else set())
    return best


def enumerate_maxB_schedules(grid: EnumGrid) -> int:
    """Literal cross-check of :func:`enumerate_maxB` for tiny bounded grids.

    Lists every visit sequence (host, landing tick) with dwell ≥ Δ inside
    ``[0, horizon)`` and every window start.
    """
    if grid.horizon is None:
        raise ValueError("literal enumeration needs a finite horizon")
    H, D, n = grid.horizon, grid.Delta, grid.n
    hosts = range(n)
    best = 0
    count = 0

    def occupied(visits: list[tuple[int, int]], x: int) -> int:
        cur = visits[0][0]
        for h, t in visits:
            if t <= x:
                cur = h
        return cur

    def rec(visits: list[tuple[int, int]]) -> None:
        nonlocal best, count
        count += 1
        if count > STATE_LIMIT:
            raise EnumerationTooLarge("too many schedules")
        for t in range(H):
            window = range(t, min(t + grid.T_r, H - 1) + 1)
            best = max(best, len({occupied(visits, x) for x in window}))
        last_host, last_t = visits[-1]
        for nxt in range(last_t + D, H):
            for h in hosts:
                if h != last_host:
                    rec(visits + [(h, nxt)])

    for h in hosts:
        rec([(h, 0)])
    return best


# ---------------------------------------------------------------------------
# Reply sets seen by a reader under the lock-step worst case
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioSets:
    """Sizes of the failure sets around one read window, one agent."""

    b_tilde: int      # Byzantine at some tick of [t, t+T_r]
    cured: int        # cured at t
    silent: int       # cured throughout [t, t+T_r−δ]
    cb: int           # Byzantine in the window, but not during [t, t+δ]
    bc: int           # Byzantine in the window, correct again by t+T_r−δ
    cuc: int          # cured at t, correct again by t+T_r−δ (cured-unaware only)
    window_start: int

    @property
    def answered_correctly(self) -> int:
        return self.cb + self.bc + self.cuc


class _Ring:
    """Host ``i`` is Byzantine on [iΔ, (i+1)Δ) and cured for γ ticks after that."""

    def __init__(self, Delta: int, gamma: int):
        self.D, self.g = Delta, gamma

    def label(self, i: int, x: int) -> str:
        a = i * self.D
        b = a + self.D
        if a <= x < b:
            return "B"
        if b <= x < b + self.g:
            return "C"
        return "O"

    def hosts_near(self, lo: int, hi: int) -> range:
        return range(lo // self.D - self.g // self.D - 2, hi // self.D + 2)


def _scan(ring: _Ring, delta: int, T_r: int, t: int, unaware: bool) -> ScenarioSets:
    lab = ring.label
    window = range(t, t + T_r + 1)
    early = range(t, t + delta + 1)
    settle = range(t, t + T_r - delta + 1)
    hosts = ring.hosts_near(t, t + T_r)
    b_tilde = [i for i in hosts if any(lab(i, x) == "B" for x in window)]
    cured = [i for i in hosts if lab(i, t) == "C"]
    silent = [i for i in cured if all(lab(i, x) == "C" for x in settle)]
    cb = [i for i in b_tilde if all(lab(i, x) != "B" for x in early)]
    bc = [i for i in b_tilde
          if any(lab(i, x) == "O" and lab(i, x - 1) == "C" for x in range(t + 1, t + T_r - delta + 1))]
    cuc = [i for i in cured if i not in silent] if unaware else []
    return ScenarioSets(len(b_tilde), len(cured), len(silent), len(cb), len(bc), len(cuc), t)


def _aligned_start(Delta: int, T_r: int, gamma: int, model: str) -> int:
    """A window start far enough from the origin with the extremal alignment.

    Cured-aware: an agent leaves its host one tick into the window.
    Cured-unaware: an agent lands on a new host at the window's last tick.
    """
    base = (gamma // Delta + 3) * Delta
    if model == "CAM":
        return base - 1
    return base + Delta - (T_r % Delta) if T_r % Delta else base


def scenario_sets(delta: int, Delta: int, gamma: int, T_r: int, model: str) -> ScenarioSets:
    """Failure-set sizes at the extremal lock-step alignment for ``model``.

    If the cured-unaware alignment leaves no host cured when the window opens,
    cured hosts play no role and the cured-aware alignment is the worst one.
    """
    ring = _Ring(Delta, gamma)
    if model == "CAM":
        return _scan(ring, delta, T_r, _aligned_start(Delta, T_r, gamma, "CAM"), unaware=False)
    s = _scan(ring, delta, T_r, _aligned_start(Delta, T_r, gamma, "CUM"), unaware=True)
    if s.cured:
        return s
    s = _scan(ring, delta, T_r, _aligned_start(Delta, T_r, gamma, "CAM"), unaware=False)
    return ScenarioSets(s.b_tilde, 0, s.silent, s.cb, s.bc, 0, s.window_start)


def enumerate_reply_sets(delta: int, Delta: int, gamma: int, T_r: int, model: str,
                         n: int, f: int = 1) -> tuple[int, int]:
    """(most incorrect replies, fewest correct replies) a reader may collect.

    Incorrect replies come from every host Byzantine during the window and,
    when servers cannot tell they were cured, from hosts cured when it opens.
    Correct replies come from every other host that is not silent, plus
    hosts that answer correctly before their infection or after their cure.
    Counts are per reply message, so one host may contribute to both sides.
    """
    if f == 0:
        return 0, n
    s = scenario_sets(delta, Delta, gamma, T_r, model)
    if model == "CAM":
        incorrect = s.b_tilde * f
        correct = n - incorrect - s.silent * f + s.answered_correctly * f
    else:
        incorrect = (s.b_tilde + s.cured) * f
        correct = n - incorrect + s.answered_correctly * f
    return incorrect, correct


def default_enum_points() -> list[tuple[int, int, int, int]]:
    """(δ, Δ, γ, T_r) with δ ∈ {2,3}, Δ ∈ 2..8, T_r ∈ 4..12 (≥ 2δ), γ ∈ {2δ, 4δ}."""
    pts = []
    for delta in (2, 3):
        for Delta in range(2, 9):
            for T_r in range(max(4, 2 * delta), 13):
                for gamma in (2 * delta, 4 * delta):
                    pts.append((delta, Delta, gamma, T_r))
    return pts


# ---------------------------------------------------------------------------
# The two-execution attack
# ---------------------------------------------------------------------------

V0 = ValueEntry("v0", 1)
V1 = ValueEntry("v1", 1)


@dataclass(frozen=True)
class PlannedReply:
    server: str
    tick: int
    honest: bool      # True: the register's current value; False: the other one


@dataclass
class AttackPlan:
    model: str
    n: int
    f: int
    delta: int
    Delta: int
    gamma: int
    T_r: int
    schedule: list[AgentSchedule]
    window: tuple[int, int]
    value_pair: tuple[ValueEntry, ValueEntry]
    replies: list[PlannedReply]
    incorrect_available: int
    correct_count: int
    roles: dict[str, list[str]] = field(default_factory=dict)
    # each execution's Byzantine hosts answer with the value the other execution holds
    byz_strategy: tuple[str, str] = ("answer v1", "answer v0")


@dataclass(frozen=True)
class Infeasible:
    reason: str
    incorrect_available: int
    correct_count: int


@dataclass
class AttackOutcome:
    plan: AttackPlan
    multisets: tuple[tuple, tuple]
    correct_values: tuple[ValueEntry, ValueEntry]
    rule_outcomes: dict[str, tuple]

    @property
    def indistinguishable(self) -> bool:
        return self.multisets[0] == self.multisets[1]

    def to_json(self) -> dict:
        return {
            "model": self.plan.model, "n": self.plan.n, "f": self.plan.f,
            "window": list(self.plan.window),
            "replies_per_value": self.plan.correct_count,
            "incorrect_available": self.plan.incorrect_available,
            "E0": [[e.value, e.sn, c] for (e, c) in self.multisets[0]],
            "E1": [[e.value, e.sn, c] for (e, c) in self.multisets[1]],
            "correct_values": [self.correct_values[0].to_json(), self.correct_values[1].to_json()],
            "indistinguishable": self.indistinguishable,
            "rules": {k: [str(a), str(b)] for k, (a, b) in self.rule_outcomes.items()},
        }


def _timeline(n: int, f: int, Delta: int, gamma: int, horizon: int
              ) -> tuple[list[AgentSchedule], FailureTimeline]:
    schedule = generate_sstar(n, f, Delta, horizon)
    tl = derive_timeline(schedule, server_ids(n), horizon)
    tl.finalize({(s, d): d + gamma for s, d in tl.departures()})
    return schedule, tl


def _plan_replies(tl: FailureTimeline, t: int, delta: int, T_r: int, model: str
                  ) -> tuple[list[PlannedReply], dict[str, list[str]]]:
    lab = tl.label_at
    end = t + T_r
    last_correct_send = end - delta
    replies: list[PlannedReply] = []
    roles: dict[str, list[str]] = {}
    for s in tl.servers:
        window = range(t, end + 1)
        byz_ticks = [x for x in window if lab(s, x) is Label.BYZANTINE]
        role = roles.setdefault(s, [])
        read_arrives = t + 1 if lab(s, t) is Label.BYZANTINE else t + delta
        # the side that lies: Byzantine hosts, and cured hosts that do not know it
        if byz_ticks:
            role.append("byzantine")
            replies.append(PlannedReply(s, byz_ticks[0], False))
        elif model == "CUM" and lab(s, t) is Label.CURED:
            role.append("cured")
            replies.append(PlannedReply(s, t, False))
        # the honest side: the first tick, once the read is known, at which s runs
        # correct code with a trustworthy state and can still be heard in time
        ok = [x for x in range(read_arrives, last_correct_send + 1) if lab(s, x) is Label.CORRECT]
        if ok:
            x = ok[0]
            earlier_bad = any(lab(s, y) is not Label.CORRECT for y in range(t, x))
            role.append("correct-after" if earlier_bad else
                        ("correct-before" if byz_ticks else "correct"))
            replies.append(PlannedReply(s, x, True))
        elif not byz_ticks and lab(s, t) is Label.CURED:
            role.append("silent")
    return replies, roles


def build_attack(n: int, model: str, delta: int, Delta: int, gamma: int, T_r: int,
                 f: int = 1) -> AttackPlan | Infeasible:
    """Two executions the reader cannot tell apart, if ``n`` servers are too few.

    In E0 the register holds ``v0`` and in E1 it holds ``v1``.  Honest replies
    carry the current value; lying replies carry the other one.  Whenever the
    adversary controls at least as many replies as the honest side sends, it
    sends exactly as many, and both executions deliver the same multiset.
    """
    # windows open after every host has been visited once (no start-up transient)
    t = _aligned_start(Delta, T_r, gamma, model) + n * Delta
    horizon = t + 2 * (T_r + Delta + gamma)
    schedule, tl = _timeline(n, f, Delta, gamma, horizon)
    replies, roles = _plan_replies(tl, t, delta, T_r, model)
    if model == "CUM" and not any(lab == "cured" for r in roles.values() for lab in r):
        t = _aligned_start(Delta, T_r, gamma, "CAM") + n * Delta
        replies, roles = _plan_replies(tl, t, delta, T_r, model)
    lies = [r for r in replies if not r.honest]
    honest = [r for r in replies if r.honest]
    if len(lies) < len(honest):
        return Infeasible(f"{len(honest)} honest replies outnumber {len(lies)} lying ones",
                          len(lies), len(honest))
    chosen = sorted(honest + lies[:len(honest)], key=lambda r: (r.tick, r.server, r.honest))
    return AttackPlan(model, n, f, delta, Delta, gamma, T_r, schedule, (t, t + T_r),
                      (V0, V1), chosen, len(lies), len(honest), roles)


def _simulate(plan: AttackPlan, current: ValueEntry, other: ValueEntry) -> Counter:
    """Run one execution through the engine; return what the reader collected."""
    engine = Engine()
    servers = server_ids(plan.n)
    horizon = max(t for sch in plan.schedule for _, t in sch.visits) + 1
    _, tl = _timeline(plan.n, plan.f, plan.Delta, plan.gamma, horizon)
    got: list[tuple[str, ValueEntry]] = []
    t0, t1 = plan.window
    deadline = t1 + 1          # a lie sent at t1 is "instantaneous": one tick here

    def route(env: Envelope) -> None:
        if env.to == "r" and isinstance(env.payload, Reply) and engine.now <= deadline:
            if env.payload.entries[0] is current and engine.now > t1:
                raise AssertionError("an honest reply missed the read window")
            got.extend((env.sender, e) for e in env.payload.entries)

    net = Network(engine, plan.delta, Adversarial(plan.delta), servers, route,
                  is_byzantine=lambda pid: pid in servers and
                  tl.label_at(pid, engine.now) is Label.BYZANTINE)
    engine.schedule(t0, lambda: net.broadcast("r", Read("r")))
    for r in plan.replies:
        value = current if r.honest else other
        engine.schedule(r.tick, lambda r=r, value=value: net.unicast(r.server, "r",
                                                                     Reply(r.server, (value,))))
    engine.run_until(deadline)
    return Counter(e for _, e in got)


def simulate_attack(plan: AttackPlan) -> AttackOutcome:
    v0, v1 = plan.value_pair
    m0 = _simulate(plan, v0, v1)
    m1 = _simulate(plan, v1, v0)
    key = lambda item: item[0].key()
    ms = (tuple(sorted(m0.items(), key=key)), tuple(sorted(m1.items(), key=key)))
    rules = {}
    for name, rule in _RULES.items():
        rules[name] = (rule(m0, plan), rule(m1, plan))
    return AttackOutcome(plan, ms, (v0, v1), rules)


def _as_pairs(m: Counter) -> list[tuple[str, ValueEntry]]:
    return [(f"x{i}", e) for e, c in m.items() for i in range(c)]


_RULES = {
    "reply-quorum": lambda m, p: select_value(_as_pairs(m), p.correct_count),
    "plurality": lambda m, p: max(m.items(), key=lambda kv: (kv[1], kv[0].key()))[0] if m else NO_QUORUM,
    "newest": lambda m, p: max(m, key=ValueEntry.key) if m else NO_QUORUM,
}


# ---------------------------------------------------------------------------
# Occurrence profile of round-robin senders
# ---------------------------------------------------------------------------

def occurrence_profile(n: int, x: int) -> tuple[int, ...]:
    """Messages per sender when ``x`` messages arrive round-robin from ``n`` senders."""
    counts = [0] * n
    for i in range(x):
        counts[i % n] += 1
    return tuple(sorted(counts, reverse=True))


def sweep_composition_identity(max_n: int = 8, max_rounds: int = 4) -> dict:
    """Check: ``x mod n`` senders deliver ``⌊x/n⌋+1`` messages, the others ``⌊x/n⌋``."""
    rows = []
    for n in range(1, max_n + 1):
        for x in range(0, max_rounds * n + 1):
            prof = occurrence_profile(n, x)
            q, r = divmod(x, n)
            expect = tuple([q + 1] * r + [q] * (n - r))
            rows.append({"n": n, "x": x, "profile": list(prof), "ok": prof == expect})
    return {"points": len(rows), "ok": all(r["ok"] for r in rows), "rows": rows}
