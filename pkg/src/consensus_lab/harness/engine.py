"""Execution engine: schedules, single runs, traces and verdicts.

Trace file format (one record per line, tab separated)::

    # consensus-lab trace 1 <json metadata>
    <step>\\t<pid>\\t<location>\\t<instruction json>\\t<response json>\\t<decision or ->

Instructions are ``{"op": name, "arg": value}``; values use the canonical
encoding of :mod:`consensus_lab.memory`.  The metadata holds the protocol
description, the inputs and the schedule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

from ..errors import ConsensusLabError, ReplayDivergence
from ..memory import Configuration, Memory, decode_value, encode_value
from ..protocols import Decide, Protocol
from .rng import SchedulerRNG

OK = "ok"
AGREEMENT = "agreement-violation"
VALIDITY = "validity-violation"
SOLO_EXCEEDED = "solo-budget-exceeded"
BUDGET = "budget-exhausted"
PROTOCOL_ERROR = "protocol-error"
INCONCLUSIVE = "inconclusive"

VIOLATIONS = (AGREEMENT, VALIDITY, SOLO_EXCEEDED, PROTOCOL_ERROR)
DEFAULT_BUDGET = 10_000


class Step(NamedTuple):
    index: int
    pid: int
    location: Any
    instr: Any
    response: Any
    decided: int | None


@dataclass
class Trace:
    meta: dict
    steps: list[Step] = field(default_factory=list)

    @property
    def schedule(self) -> list[int]:
        return [s.pid for s in self.steps]

    def dumps(self) -> str:
        lines = ["# consensus-lab trace 1 " + json.dumps(self.meta, sort_keys=True, separators=(",", ":"))]
        for s in self.steps:
            lines.append(
                "\t".join(
                    (
                        str(s.index),
                        str(s.pid),
                        encode_value(s.location, compact=True),
                        encode_value(s.instr, compact=True),
                        encode_value(s.response, compact=True),
                        "-" if s.decided is None else str(s.decided),
                    )
                )
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> Trace:
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# consensus-lab trace 1 "):
            raise ValueError("not a consensus-lab trace")
        meta = json.loads(lines[0][len("# consensus-lab trace 1 ") :])
        steps = []
        for line in lines[1:]:
            if not line.strip():
                continue
            idx, pid, loc, instr, resp, dec = line.split("\t")
            steps.append(
                Step(
                    int(idx),
                    int(pid),
                    decode_value(json.loads(loc)),
                    decode_value(json.loads(instr)),
                    decode_value(json.loads(resp)),
                    None if dec == "-" else int(dec),
                )
            )
        return cls(meta, steps)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Trace) and self.dumps() == other.dumps()


@dataclass(frozen=True)
class Schedule:
    """Who moves next.

    ``strategy`` is one of ``solo``, ``round-robin``, ``random``, ``replay``
    or ``exhaustive``.  ``budget`` caps the number of steps of a run
    (``None``: the solo budget for ``solo``, :data:`DEFAULT_BUDGET` otherwise).
    """

    strategy: str
    pid: int | None = None
    seed: int | None = None
    order: tuple[int, ...] | None = None
    depth: int | None = None
    budget: int | None = None
    responses: tuple | None = None

    @classmethod
    def solo(cls, pid: int, budget: int | None = None) -> Schedule:
        return cls("solo", pid=pid, budget=budget)

    @classmethod
    def round_robin(cls, budget: int | None = None) -> Schedule:
        return cls("round-robin", budget=budget)

    @classmethod
    def random(cls, seed: int, budget: int | None = None) -> Schedule:
        return cls("random", seed=seed, budget=budget)

    @classmethod
    def replay(cls, source: Trace | Sequence[int], budget: int | None = None) -> Schedule:
        if isinstance(source, Trace):
            extra = (source.meta["error_pid"],) if "error_pid" in source.meta else ()
            return cls(
                "replay",
                order=tuple(source.schedule) + extra,
                responses=tuple(s.response for s in source.steps),
                budget=budget,
            )
        return cls("replay", order=tuple(source), budget=budget)

    @classmethod
    def exhaustive(cls, depth: int) -> Schedule:
        return cls("exhaustive", depth=depth)

    @classmethod
    def parse(cls, text: str, seed: int | None = None, budget: int | None = None) -> Schedule:
        """Parse ``solo:P``, ``rr``/``round-robin``, ``random[:SEED]``,
        ``exhaustive:DEPTH`` or ``replay:P,P,...``."""
        kind, _, arg = text.partition(":")
        if kind == "solo":
            return cls.solo(int(arg), budget)
        if kind in ("rr", "round-robin"):
            return cls.round_robin(budget)
        if kind == "random":
            return cls.random(int(arg) if arg else (seed if seed is not None else 0), budget)
        if kind == "exhaustive":
            return cls.exhaustive(int(arg))
        if kind == "replay":
            return cls.replay([int(x) for x in arg.split(",") if x], budget)
        raise ValueError(f"unknown schedule {text!r}")

    def __str__(self) -> str:
        if self.strategy == "solo":
            return f"solo:{self.pid}"
        if self.strategy == "random":
            return f"random:{self.seed}"
        if self.strategy == "exhaustive":
            return f"exhaustive:{self.depth}"
        if self.strategy == "replay":
            return "replay:" + ",".join(map(str, self.order or ()))
        return self.strategy


@dataclass
class Verdict:
    outcome: str
    message: str = ""
    witness: Trace | None = None
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.outcome == OK

    @property
    def violation(self) -> bool:
        return self.outcome in VIOLATIONS

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "message": self.message,
            "stats": self.stats,
            "witness": self.witness.dumps() if self.witness is not None else None,
        }


# ---------------------------------------------------------------------------


def initial_configuration(protocol: Protocol, inputs: Sequence[int]) -> Configuration:
    if len(inputs) != protocol.n:
        raise ValueError(f"{len(inputs)} inputs for n={protocol.n}")
    for x in inputs:
        if not 0 <= x < protocol.m:
            raise ValueError(f"input {x} outside 0..{protocol.m - 1}")
    mem = Memory(protocol.iset, protocol.initial, protocol.locations)
    locals_, actions = [], []
    for p, x in enumerate(inputs):
        st, act = protocol.start(p, x)
        if isinstance(act, Decide):
            raise ValueError("a process must take a step before deciding")
        locals_.append(st)
        actions.append(act)
    return Configuration(mem, locals_, actions, [None] * protocol.n)


def advance(protocol: Protocol, config: Configuration, p: int) -> Step:
    """Let process ``p`` take its poised step in place."""
    loc, instr = config.actions[p]
    mem = config.memory
    if protocol.has_guard:
        protocol.guard(mem.value(loc) if loc is not None else None, loc, instr)
    resp = mem.apply(loc, instr)
    st, act = protocol.step(config.locals[p], resp)
    config.locals[p] = st
    index = config.steps
    config.steps += 1
    if isinstance(act, Decide):
        config.actions[p] = None
        config.decided[p] = act.value
        return Step(index, p, loc, instr, resp, act.value)
    config.actions[p] = act
    return Step(index, p, loc, instr, resp, None)


def check_decisions(decided: Sequence[int | None], inputs: Sequence[int]) -> tuple[str, str] | None:
    values = {d for d in decided if d is not None}
    if len(values) > 1:
        return AGREEMENT, f"processes decided {sorted(values)}"
    for p, d in enumerate(decided):
        if d is not None and d not in inputs:
            return VALIDITY, f"process {p} decided {d}, not an input"
    return None


def _stats(protocol: Protocol, config: Configuration) -> dict:
    return {
        "steps": config.steps,
        "touched": config.memory.touched,
        "scans": sum(protocol.scans(s) for s in config.locals),
        "decided": list(config.decided),
    }


def run(protocol: Protocol, inputs: Sequence[int], schedule: Schedule) -> tuple[Verdict, Trace]:
    """Run one execution; deterministic in (protocol, inputs, schedule)."""
    if schedule.strategy == "exhaustive":
        raise ValueError("use explore() for exhaustive schedules")
    inputs = tuple(inputs)
    meta = {**protocol.describe(), "inputs": list(inputs), "schedule": str(schedule)}
    trace = Trace(meta)
    steps = trace.steps
    config = initial_configuration(protocol, inputs)
    strategy = schedule.strategy
    budget = schedule.budget
    solo = None
    if strategy == "solo":
        solo = protocol.solo_budget()
        if budget is None:
            budget = solo.steps
    elif budget is None:
        budget = len(schedule.order) if strategy == "replay" else DEFAULT_BUDGET
    rng = SchedulerRNG(schedule.seed) if strategy == "random" else None
    order = schedule.order or ()
    responses = schedule.responses
    decided = config.decided
    n = protocol.n
    rr = 0
    outcome, message = OK, ""
    try:
        while True:
            running = [p for p in range(n) if decided[p] is None]
            if not running:
                break
            if strategy == "solo":
                if decided[schedule.pid] is not None:
                    break
                p = schedule.pid
            elif strategy == "replay":
                if config.steps >= len(order):
                    break
                p = order[config.steps]
                if decided[p] is not None:
                    raise ReplayDivergence(f"step {config.steps}: process {p} already decided")
            if config.steps >= budget:
                if solo is not None:
                    outcome, message = SOLO_EXCEEDED, f"process {schedule.pid} undecided after {budget} solo steps"
                else:
                    outcome, message = BUDGET, f"step budget {budget} exhausted"
                break
            if strategy == "random":
                p = running[rng.below(len(running))]
            elif strategy == "round-robin":
                while decided[rr % n] is not None:
                    rr += 1
                p = rr % n
                rr += 1
            step = advance(protocol, config, p)
            steps.append(step)
            if responses is not None and step.index < len(responses) and step.response != responses[step.index]:
                raise ReplayDivergence(f"step {step.index}: response {step.response!r} != {responses[step.index]!r}")
            if step.decided is not None:
                bad = check_decisions(decided, inputs)
                if bad:
                    outcome, message = bad
                    break
    except ReplayDivergence:
        raise
    except ConsensusLabError as exc:
        outcome, message = PROTOCOL_ERROR, f"{type(exc).__name__}: {exc}"
        trace.meta["error_pid"] = p
    if outcome == OK and solo is not None and solo.scans is not None:
        used = protocol.scans(config.locals[schedule.pid])
        if used > solo.scans:
            outcome, message = SOLO_EXCEEDED, f"{used} scans > solo bound {solo.scans}"
    verdict = Verdict(outcome, message, trace if outcome in VIOLATIONS else None, _stats(protocol, config))
    return verdict, trace


# ---------------------------------------------------------------------------
# Trace-free fast path for large random sweeps.

_CACHE_LIMIT = 2_000_000
_TWO64 = 1 << 64


class FastRunner:
    """Trace-free random runs for large sweeps.

    Produces exactly the execution of ``run(protocol, inputs,
    Schedule.random(seed, budget))``.  For protocols whose transitions
    repeat (``protocol.memoize``) and whose cells are small, each distinct
    (local state, poised action) pair is interned as an integer node and
    whole transitions ``(node, old cell) -> (new cell, next node)`` are
    memoized; the first occurrence of a transition runs the real
    instruction and guard, so errors are raised exactly as in :func:`run`.
    """

    def __init__(self, protocol: Protocol) -> None:
        self.protocol = protocol
        self.memo = getattr(protocol, "memoize", True) and not protocol.iset.is_buffer
        self._reset_tables()

    def _reset_tables(self) -> None:
        self.ids: dict = {}
        self.nodes: list = []
        self.trans: dict = {}

    def node(self, state: Any, action: Any) -> int:
        key = (state, action)
        nid = self.ids.get(key)
        if nid is None:
            nid = self.ids[key] = len(self.nodes)
            self.nodes.append((state, action, action.value if type(action) is Decide else None))
        return nid

    def run(self, inputs: Sequence[int], seed: int, budget: int = DEFAULT_BUDGET) -> tuple[str, str, dict]:
        protocol = self.protocol
        if len(self.trans) > _CACHE_LIMIT:
            self._reset_tables()
        config = initial_configuration(protocol, inputs)
        mem = config.memory
        cells = mem.cells
        fresh = mem._fresh()
        locals_, actions, decided = config.locals, config.actions, config.decided
        step = protocol.step
        guard = protocol.guard if protocol.has_guard else None
        rng = SchedulerRNG(seed)
        buf, pos, refill = rng._buf, 0, rng.refill
        limits = [0] + [_TWO64 - (_TWO64 % k) for k in range(1, protocol.n + 1)]
        running = list(range(protocol.n))
        memo = self.memo
        if memo:
            trans, nodes, node = self.trans, self.nodes, self.node
            cur = [node(locals_[p], actions[p]) for p in running]
        outcome, message = OK, ""
        steps = 0
        try:
            while running:
                if steps >= budget:
                    outcome, message = BUDGET, f"step budget {budget} exhausted"
                    break
                k = len(running)
                if k == 1:
                    p = running[0]
                else:
                    limit = limits[k]
                    while True:
                        if pos == len(buf):
                            buf, pos = refill(), 0
                        w = buf[pos]
                        pos += 1
                        if w < limit:
                            break
                    p = running[w % k]
                steps += 1
                if memo:
                    nid = cur[p]
                    loc = nodes[nid][1][0]
                    key = (nid, cells.get(loc, fresh))
                    hit = trans.get(key)
                    if hit is None:
                        state, (loc, instr), _ = nodes[nid]
                        if guard is not None:
                            guard(key[1], loc, instr)
                        resp = mem.apply(loc, instr)
                        st, act = step(state, resp)
                        hit = trans[key] = (cells[loc], node(st, act))
                    cells[loc], nid = hit
                    cur[p] = nid
                    value = nodes[nid][2]
                    if value is not None:
                        decided[p] = value
                        running.remove(p)
                        bad = check_decisions(decided, inputs)
                        if bad:
                            outcome, message = bad
                            break
                    continue
                loc, instr = actions[p]
                if guard is not None:
                    guard(mem.value(loc) if loc is not None else None, loc, instr)
                st, act = step(locals_[p], mem.apply(loc, instr))
                locals_[p] = st
                if type(act) is Decide:
                    actions[p] = None
                    decided[p] = act.value
                    running.remove(p)
                    bad = check_decisions(decided, inputs)
                    if bad:
                        outcome, message = bad
                        break
                else:
                    actions[p] = act
        except ConsensusLabError as exc:
            outcome, message = PROTOCOL_ERROR, f"{type(exc).__name__}: {exc}"
        if memo:
            for q, nid in enumerate(cur):
                state, act, _ = nodes[nid]
                locals_[q] = state
                actions[q] = None if type(act) is Decide else act
        config.steps = steps
        return outcome, message, _stats(protocol, config)
