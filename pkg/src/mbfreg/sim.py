"""One simulated execution: servers, clients, agents and the adversary wired together."""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from .checker import History, check_termination, check_validity, cured_spans, measure_gamma
from .clients import Reader, Writer
from .mobility import (AdversaryContext, AgentSchedule, FailureTimeline, Move, derive_timeline,
                       format_schedules, generate_random_itb, generate_sstar, make_strategy,
                       parse_schedules, server_ids, server_index)
from .proto_cam import CamServer, thresholds_cam
from .proto_cum import CumServer, thresholds_cum
from .simclock import Engine, Envelope, Network, Phase, make_policy

SCHEMA_VERSION = "mbfreg.report/1"


@dataclass
class RunConfig:
    model: str = "CAM"                 # CAM | CUM
    n: Optional[int] = None            # default: the model's minimum
    f: int = 1
    delta: int = 10
    Delta: int = 20
    schedule: str = "sstar"            # sstar | random | file | none
    schedule_text: Optional[str] = None
    strategy: str = "echo-fixed"
    delay_policy: str = "adversarial"
    horizon: int = 4000
    seed: int = 0
    readers: int = 3
    op_script: Optional[list] = None   # [[client, "read"|"write", tick], ...]
    write_gap: tuple = (5, 25)         # extra idle time between writes, in units of δ
    read_gap: tuple = (1, 8)           # extra idle time between reads of one reader, in δ
    phase_offset: int = 0              # CUM: phase_i = (index(i) + offset) mod 2δ
    phases: Optional[list] = None      # CUM: explicit per-server phases (overrides offset)
    sstar_start: int = 0
    trace_messages: bool = False

    def __post_init__(self) -> None:
        self.model = self.model.upper()
        if self.model not in ("CAM", "CUM"):
            raise ValueError(f"unknown model {self.model!r}")
        self.write_gap = tuple(self.write_gap)
        self.read_gap = tuple(self.read_gap)
        for name, (lo, hi) in (("write_gap", self.write_gap), ("read_gap", self.read_gap)):
            # a zero gap would invoke the next operation on the tick the previous one ends
            if not 1 <= lo <= hi:
                raise ValueError(f"{name} must satisfy 1 ≤ low ≤ high, got {(lo, hi)}")

    @property
    def thresholds(self):
        fn = thresholds_cam if self.model == "CAM" else thresholds_cum
        return fn(self.delta, self.Delta, self.f)

    @property
    def n_servers(self) -> int:
        return self.n if self.n is not None else self.thresholds.n_min

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**known)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["write_gap"] = list(self.write_gap)
        d["read_gap"] = list(self.read_gap)
        return d


def _rng(seed: int, purpose: str) -> random.Random:
    return random.Random(f"{seed}/{purpose}")


def build_schedules(cfg: RunConfig, servers: Sequence[str]) -> list[AgentSchedule]:
    n = len(servers)
    if cfg.schedule == "sstar":
        return generate_sstar(n, cfg.f, cfg.Delta, cfg.horizon, start=cfg.sstar_start)
    if cfg.schedule == "random":
        return generate_random_itb(n, cfg.f, cfg.Delta, cfg.horizon,
                                   seed=_rng(cfg.seed, "schedule").getrandbits(32))
    if cfg.schedule == "file":
        if cfg.schedule_text is None:
            raise ValueError("schedule 'file' needs schedule_text")
        return parse_schedules(cfg.schedule_text)
    if cfg.schedule == "none":
        return []
    raise ValueError(f"unknown schedule kind {cfg.schedule!r}")


def build_op_script(cfg: RunConfig) -> list[tuple[str, str, int]]:
    if cfg.op_script is not None:
        return [(c, op, int(t)) for c, op, t in cfg.op_script]
    rng = _rng(cfg.seed, "ops")
    d = cfg.delta
    script = []
    t = d + rng.randint(0, 2 * d)
    while t + d <= cfg.horizon - 2 * d:
        script.append(("w", "write", t))
        t += d + rng.randint(cfg.write_gap[0] * d, cfg.write_gap[1] * d)
    for r in range(1, cfg.readers + 1):
        t = rng.randint(0, 4 * d)
        while t + 2 * d <= cfg.horizon - d:
            script.append((f"r{r}", "read", t))
            t += 2 * d + rng.randint(cfg.read_gap[0] * d, cfg.read_gap[1] * d)
    script.sort(key=lambda x: (x[2], x[0]))
    return script


class World:
    """Owns every process of one run and routes envelopes to them."""

    def __init__(self, cfg: RunConfig, schedules: Optional[list[AgentSchedule]] = None):
        self.cfg = cfg
        self.engine = Engine()
        self.servers = server_ids(cfg.n_servers)
        self.th = cfg.thresholds
        self.trace: list[dict] = []
        self.recoveries: dict[tuple[str, int], int] = {}
        self.history = History()
        self.byz_hosts: set[str] = set()
        policy = make_policy(cfg.delay_policy, cfg.delta, _rng(cfg.seed, "delays").getrandbits(32))
        self.net = Network(self.engine, cfg.delta, policy, self.servers, self._route,
                           is_byzantine=self.byz_hosts.__contains__,
                           trace=self.trace if cfg.trace_messages else None)
        self.schedules = build_schedules(cfg, self.servers) if schedules is None else schedules
        self.timeline: FailureTimeline = derive_timeline(self.schedules, self.servers, cfg.horizon)

        self.hosts: dict = {}
        nonce_rng = _rng(cfg.seed, "nonces")
        for sid in self.servers:
            if cfg.model == "CAM":
                host = CamServer(sid, self.engine, self.net, self.th, cfg.delta,
                                 on_recover=self._recovered)
            else:
                idx = server_index(sid)
                if cfg.phases is not None:
                    phase = int(cfg.phases[idx - 1]) % (2 * cfg.delta)
                else:
                    phase = (idx + cfg.phase_offset) % (2 * cfg.delta)
                host = CumServer(sid, self.engine, self.net, self.th, cfg.delta, phase,
                                 random.Random(nonce_rng.getrandbits(64)),
                                 on_recover=self._recovered)
            self.hosts[sid] = host

        self.writer = Writer("w", self.engine, self.net, cfg.delta, self.history.add)
        self.readers = {f"r{i}": Reader(f"r{i}", self.engine, self.net, cfg.delta,
                                        self.th.reply_q, self.history.add)
                        for i in range(1, cfg.readers + 1)}
        self.clients = {"w": self.writer, **self.readers}
        self.strategy = make_strategy(cfg.strategy, _rng(cfg.seed, "strategy").getrandbits(32))
        self.adversary = AdversaryContext(self.net, self.engine, cfg.delta, cfg.model,
                                          list(self.readers), _rng(cfg.seed, "adv").getrandbits(32))

        for m in self.timeline.moves:
            self.engine.schedule(m.tick, self._move, m, phase=Phase.MOVE)
        for sid in self.servers:
            if cfg.model == "CUM":
                self.hosts[sid].start()
        self.script = build_op_script(cfg)
        for client, op, t in self.script:
            self.engine.schedule(t, self._invoke, client, op, phase=Phase.TIMER)

    # -- event callbacks ---------------------------------------------------
    def _move(self, m: Move) -> None:
        host = self.hosts[m.server]
        if m.arrive:
            self.byz_hosts.add(m.server)
            host.infected()
            self._log({"ev": "arrive", "agent": m.agent, "server": m.server})
            self.strategy.on_arrive(self.adversary, host)
        else:
            self.strategy.on_depart(self.adversary, host)
            self.byz_hosts.discard(m.server)
            self._log({"ev": "depart", "agent": m.agent, "server": m.server})
            host.released()

    def _invoke(self, client: str, op: str) -> None:
        if op == "write":
            rec = self.writer.write(f"v{self.writer.csn + 1}")
        else:
            rec = self.readers[client].read()
        self._log({"ev": "invoke", "client": client, "op": op,
                   **({"entry": rec.entry.to_json()} if rec.entry else {})})

    def _recovered(self, sid: str, departed_at: int, tick: int) -> None:
        self.recoveries[(sid, departed_at)] = tick
        self._log({"ev": "recovered", "server": sid, "departed": departed_at, "at": tick})

    def _route(self, env: Envelope) -> None:
        host = self.hosts.get(env.to)
        if host is None:
            self.clients[env.to].deliver(env)
        elif env.to in self.byz_hosts:
            self.strategy.on_message(self.adversary, host, env)
        else:
            host.deliver(env)

    def _log(self, rec: dict) -> None:
        self.trace.append({"t": self.engine.now, **rec})

    # -- driving -------------------------------------------------------------
    def run(self, until: Optional[int] = None) -> None:
        self.engine.run_until(self.cfg.horizon if until is None else until)

    def correct_hosts(self, t: Optional[int] = None) -> list[str]:
        """Servers that are neither Byzantine nor still cured at tick ``t`` (default: now)."""
        t = self.engine.now if t is None else t
        out = []
        for s in self.servers:
            if s in self.byz_hosts:
                continue
            cured = False
            for iv in self.timeline.intervals[s]:
                if iv.label.value == "cured" and iv.start <= t:
                    rec = self.recoveries.get((s, iv.departed_at))
                    if rec is None or t < rec:
                        nxt = [o.start for o in self.timeline.intervals[s]
                               if o.label.value == "byzantine" and o.start > iv.start]
                        if not nxt or t < nxt[0]:
                            cured = True
            if not cured:
                out.append(s)
        return out


@dataclass
class RunResult:
    config: RunConfig
    history: History
    timeline: FailureTimeline
    recoveries: dict
    trace: list
    report: dict

    @property
    def ok(self) -> bool:
        return self.report["ok"]

    def trace_lines(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in self.trace)

    def report_json(self) -> str:
        return json.dumps(self.report, sort_keys=True, indent=2)


def gamma_bound(cfg: RunConfig) -> int:
    return (2 if cfg.model == "CAM" else 4) * cfg.delta


def run(cfg: RunConfig, schedules: Optional[list[AgentSchedule]] = None) -> RunResult:
    world = World(cfg, schedules)
    world.run()
    world.timeline.finalize(world.recoveries)
    h = world.history
    validity = check_validity(h)
    termination = check_termination(h, cfg.delta)
    gamma = measure_gamma(world.timeline, world.recoveries)
    spans = cured_spans(world.timeline, world.recoveries)
    bound = gamma_bound(cfg)
    long_spans = [sp for sp in spans if sp.length > bound]
    reads = h.reads
    report = {
        "schema": SCHEMA_VERSION,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "n": len(world.servers),
        "thresholds": asdict(world.th),
        "writes": len(h.writes),
        "reads": len(reads),
        "no_quorum_reads": sum(1 for r in reads if r.no_quorum),
        "validity_violations": [f.__dict__ for f in validity],
        "termination_violations": [f.__dict__ for f in termination],
        "departures": len(spans),
        "gamma_measured": gamma,
        "gamma_bound": bound,
        "gamma_violations": [sp.__dict__ for sp in long_spans],
        "messages_sent": world.net.sent,
        "messages_delivered": world.net.delivered,
        "ok": not validity and not termination and not long_spans,
    }
    world.trace.extend({"t": None, "ev": "op", **op.to_json()} for op in h.ops)
    return RunResult(cfg, h, world.timeline, dict(world.recoveries), world.trace, report)
