"""Deterministic discrete-event simulation of the two bundled protocols.

Participants execute every action through :func:`tsmon.semantics.step` on
their bundled typestate, so the emitted traces conform by construction and a
replay reproduces the exact configuration trajectory.  Messages that a
participant ignores as outdated or duplicated are not action executions and
do not appear in traces.

Randomness comes from SplitMix64 so runs are reproducible bit for bit from
the seed, also across reimplementations.  Stream layout: a master generator
is seeded with the configured seed; the network stream is split off first
(``master.next_u64()`` seeds it), then one behaviour stream per consumer in
a fixed order (the ABP receiver's laziness stream; each bit-vote peer's vote
stream in peer order).  Per message send the network stream draws, in order:
the drop decision, the duplication decision, then, when jitter is non-zero,
one delay draw per delivered copy.  Broadcasts send to peers in id order.
"""

from __future__ import annotations

import dataclasses
import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from . import semantics, specs
from .model import ProtocolSpec
from .monitor import DIRECTION_IN, DIRECTION_OUT, TraceEvent, trace_event_to_json

__all__ = [
    "AbpConfig",
    "BitVoteConfig",
    "NetConfig",
    "SimRun",
    "SplitMix64",
    "TICK_BUDGET",
    "majority_bit",
    "run_abp",
    "run_bitvote",
    "write_run",
]

TICK_BUDGET = 100_000

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 generator: state += 0x9E3779B97F4A7C15, output finalized
    with the MurmurHash3-style mixer.  Small and easy to port."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def split(self) -> "SplitMix64":
        return SplitMix64(self.next_u64())

    def uniform(self) -> float:
        """A float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) / float(1 << 53)

    def randrange(self, n: int) -> int:
        return self.next_u64() % n

    def bit(self) -> int:
        return self.next_u64() & 1


@dataclass(frozen=True)
class NetConfig:
    """Unreliable-channel model: per-send loss/duplication and delays."""

    seed: int = 0
    drop_prob: float = 0.0
    dup_prob: float = 0.0
    base_delay: int = 1
    jitter: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.drop_prob < 1.0:
            raise ValueError("drop_prob must be in [0, 1)")
        if not 0.0 <= self.dup_prob < 1.0:
            raise ValueError("dup_prob must be in [0, 1)")
        if self.base_delay < 0 or self.jitter < 0:
            raise ValueError("delays must be non-negative")


@dataclass(frozen=True)
class AbpConfig:
    """Alternating-bit run: ``rounds`` bit emissions; the sender resends the
    pending bit every ``resend_interval`` ticks.  ``ack_prob`` below 1 models
    a lazy receiver that ignores some messages instead of acknowledging."""

    net: NetConfig = field(default_factory=NetConfig)
    rounds: int = 1
    resend_interval: int = 10
    ack_prob: float = 1.0

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.resend_interval < 1:
            raise ValueError("resend_interval must be >= 1")
        if not 0.0 < self.ack_prob <= 1.0:
            raise ValueError("ack_prob must be in (0, 1]")


@dataclass(frozen=True)
class BitVoteConfig:
    """Bit-vote run: ``n`` peers, at most ``k`` vote requests per round, a
    new request every ``retry_interval`` ticks while acknowledgements are
    missing.  ``peer_to_leader_drop``, when set, overrides the drop
    probability on the peer-to-leader direction only (and may be 1.0 to cut
    those links entirely)."""

    net: NetConfig = field(default_factory=NetConfig)
    n: int = 2
    k: int = 5
    voting_rounds: int = 1
    retry_interval: int = 10
    peer_to_leader_drop: Optional[float] = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.voting_rounds < 1:
            raise ValueError("voting_rounds must be >= 1")
        if self.retry_interval < 1:
            raise ValueError("retry_interval must be >= 1")
        if self.peer_to_leader_drop is not None and not 0.0 <= self.peer_to_leader_drop <= 1.0:
            raise ValueError("peer_to_leader_drop must be in [0, 1]")


@dataclass(frozen=True)
class _Message:
    action: str
    sender: str
    bit: Optional[int] = None
    round: Optional[int] = None


@dataclass(frozen=True)
class SimEvent:
    time: int
    kind: str  # "deliver" | "timer"
    dst: str
    payload: object


@dataclass
class SimRun:
    """Result of one simulation: per-participant traces plus run metadata."""

    protocol: str
    traces: dict[str, tuple[TraceEvent, ...]]
    ticks: int
    truncated: bool
    config: object

    def manifest(self) -> dict:
        cfg = dataclasses.asdict(self.config)
        return {
            "protocol": self.protocol,
            "seed": cfg["net"]["seed"],
            "config": cfg,
            "participants": sorted(self.traces),
            "ticks": self.ticks,
            "truncated": self.truncated,
        }


class _EventLoop:
    def __init__(self) -> None:
        self._heap: list[tuple[int, int, SimEvent]] = []
        self._counter = 0
        self.now = 0

    def push(self, event: SimEvent) -> None:
        heapq.heappush(self._heap, (event.time, self._counter, event))
        self._counter += 1

    def run(self, handler, budget: int) -> bool:
        """Dispatch events in (time, insertion) order; True if truncated."""
        while self._heap:
            time, _, event = heapq.heappop(self._heap)
            if time > budget:
                return True
            self.now = time
            handler(event)
        return False


class _Participant:
    """Drives one typestate and records its executed actions."""

    def __init__(self, name: str, spec: ProtocolSpec):
        self.name = name
        self.spec = spec
        self.cfg = semantics.initial_config(spec)
        self.events: list[TraceEvent] = []

    def execute(self, action: str, direction: str) -> semantics.StepOutcome:
        outcome = semantics.step(self.spec, self.cfg, action)
        self.events.append(
            TraceEvent(self.name, action, direction, None, len(self.events))
        )
        self.cfg = outcome.next
        return outcome


class _Network:
    def __init__(self, loop: _EventLoop, net: NetConfig, rng: SplitMix64):
        self.loop = loop
        self.net = net
        self.rng = rng

    def send(self, dst: str, msg: _Message, drop_override: Optional[float] = None) -> None:
        drop_prob = self.net.drop_prob if drop_override is None else drop_override
        dropped = self.rng.uniform() < drop_prob
        duplicated = self.rng.uniform() < self.net.dup_prob
        copies = (0 if dropped else 1) + (1 if duplicated else 0)
        for _ in range(copies):
            delay = self.net.base_delay
            if self.net.jitter:
                delay += self.rng.randrange(self.net.jitter + 1)
            self.loop.push(SimEvent(self.loop.now + delay, "deliver", dst, msg))


def majority_bit(votes: Iterable[int]) -> int:
    """Most frequent bit among the votes; ties and the empty case give 0."""
    votes = list(votes)
    return 1 if votes.count(1) > votes.count(0) else 0


# --------------------------------------------------------------------------
# Alternating bit protocol
# --------------------------------------------------------------------------


def run_abp(cfg: AbpConfig, tick_budget: int = TICK_BUDGET) -> SimRun:
    """Simulate one alternating-bit exchange of ``cfg.rounds`` bit emissions.

    The sender emits msg with the pending bit, resending every
    ``resend_interval`` ticks, and flips the bit on a matching ack; stale
    acks are ignored.  The receiver acknowledges every delivered msg
    (duplicates included), except those the laziness draw discards.  A run
    exceeding the tick budget stops gracefully with the truncation flag set.
    """
    master = SplitMix64(cfg.net.seed)
    loop = _EventLoop()
    network = _Network(loop, cfg.net, master.split())
    lazy_rng = master.split()

    sender = _Participant("sender", specs.load("sender"))
    receiver = _Participant("receiver", specs.load("receiver"))

    state = {"bit": 0, "acked": 0}

    def emit_msg() -> None:
        sender.execute("msg", DIRECTION_OUT)
        network.send("receiver", _Message("msg", "sender", bit=state["bit"]))
        loop.push(SimEvent(loop.now + cfg.resend_interval, "timer", "sender", state["acked"]))

    def handle(event: SimEvent) -> None:
        if event.kind == "timer":
            # Resend epochs are counted in acks: a timer armed before the
            # ack for its bit arrived is stale and does nothing.
            if event.payload == state["acked"] and state["acked"] < cfg.rounds:
                emit_msg()
            return
        msg = event.payload
        if event.dst == "receiver":
            receiver.execute("msg", DIRECTION_IN)
            if lazy_rng.uniform() < cfg.ack_prob:
                receiver.execute("ack", DIRECTION_OUT)
                network.send("sender", _Message("ack", "receiver", bit=msg.bit))
            return
        # ack at the sender
        if state["acked"] >= cfg.rounds or msg.bit != state["bit"]:
            return  # outdated ack, ignored
        sender.execute("ack", DIRECTION_IN)
        state["acked"] += 1
        if state["acked"] < cfg.rounds:
            state["bit"] ^= 1
            emit_msg()

    emit_msg()
    truncated = loop.run(handle, tick_budget)
    return SimRun(
        protocol="abp",
        traces={
            "sender": tuple(sender.events),
            "receiver": tuple(receiver.events),
        },
        ticks=loop.now,
        truncated=truncated,
        config=cfg,
    )


# --------------------------------------------------------------------------
# Bit vote protocol
# --------------------------------------------------------------------------


def run_bitvote(cfg: BitVoteConfig, tick_budget: int = TICK_BUDGET) -> SimRun:
    """Simulate ``cfg.voting_rounds`` rounds of quorum voting.

    Per round the leader broadcasts vreq (at most ``k`` times, one every
    ``retry_interval`` ticks) and counts distinct peer acknowledgements; its
    typestate moves to the write-back state when all ``n`` arrived (P1) or
    the budget is spent (P2), at which point it broadcasts vwb with the
    majority bit and starts the next round.  Peers answer each request of a
    round they have not seen closed with a per-round pseudo-random vote, and
    ignore duplicates and messages of closed rounds.
    """
    master = SplitMix64(cfg.net.seed)
    loop = _EventLoop()
    network = _Network(loop, cfg.net, master.split())

    leader = _Participant("leader", specs.load("leader"))
    peer_names = [f"peer{i}" for i in range(cfg.n)]
    peer_spec = specs.load("peer")
    peers = {name: _Participant(name, peer_spec) for name in peer_names}
    vote_rngs = {name: master.split() for name in peer_names}

    lstate = {"round": 1, "votes": {}, "finished": False}
    pstate = {
        name: {"max_round": 0, "closed": 0, "bits": {}} for name in peer_names
    }

    def leader_vreq() -> None:
        outcome = leader.execute("vreq", DIRECTION_OUT)
        for name in peer_names:
            network.send(name, _Message("vreq", "leader", round=lstate["round"]))
        if outcome.next.state == "L2":
            finish_round()
        else:
            loop.push(
                SimEvent(loop.now + cfg.retry_interval, "timer", "leader", lstate["round"])
            )

    def finish_round() -> None:
        bit = majority_bit(lstate["votes"].values())
        leader.execute("vwb", DIRECTION_OUT)
        for name in peer_names:
            network.send(name, _Message("vwb", "leader", bit=bit, round=lstate["round"]))
        if lstate["round"] == cfg.voting_rounds:
            lstate["finished"] = True
            return
        lstate["round"] += 1
        lstate["votes"] = {}
        loop.push(SimEvent(loop.now + cfg.retry_interval, "timer", "leader", lstate["round"]))

    def handle(event: SimEvent) -> None:
        if event.kind == "timer":
            if not lstate["finished"] and event.payload == lstate["round"]:
                leader_vreq()
            return
        msg = event.payload
        if event.dst == "leader":
            if (
                lstate["finished"]
                or msg.round != lstate["round"]
                or msg.sender in lstate["votes"]
            ):
                return  # outdated or duplicate acknowledgement
            outcome = leader.execute("vack", DIRECTION_IN)
            lstate["votes"][msg.sender] = msg.bit
            if outcome.next.state == "L2":
                finish_round()
            return
        peer = peers[event.dst]
        st = pstate[event.dst]
        if msg.action == "vreq":
            if msg.round <= st["closed"] or msg.round < st["max_round"]:
                return  # a closed or superseded round
            st["max_round"] = msg.round
            peer.execute("vreq", DIRECTION_IN)
            if msg.round not in st["bits"]:
                st["bits"][msg.round] = vote_rngs[event.dst].bit()
            peer.execute("vack", DIRECTION_OUT)
            network.send(
                "leader",
                _Message("vack", event.dst, bit=st["bits"][msg.round], round=msg.round),
                drop_override=cfg.peer_to_leader_drop,
            )
        else:  # vwb
            if msg.round <= st["closed"]:
                return  # duplicate write-back
            peer.execute("vwb", DIRECTION_IN)
            st["closed"] = msg.round
            st["max_round"] = max(st["max_round"], msg.round)

    leader_vreq()
    truncated = loop.run(handle, tick_budget)
    traces = {"leader": tuple(leader.events)}
    for name in peer_names:
        traces[name] = tuple(peers[name].events)
    return SimRun(
        protocol="bitvote",
        traces=traces,
        ticks=loop.now,
        truncated=truncated,
        config=cfg,
    )


# --------------------------------------------------------------------------
# File output
# --------------------------------------------------------------------------


def write_run(run: SimRun, out_dir: str | Path) -> dict:
    """Write one ``<participant>.jsonl`` trace per participant plus
    ``manifest.json`` into ``out_dir``; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in sorted(run.traces):
        lines = "".join(
            json.dumps(trace_event_to_json(ev)) + "\n" for ev in run.traces[name]
        )
        (out / f"{name}.jsonl").write_text(lines, encoding="utf-8")
    manifest = run.manifest()
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest
