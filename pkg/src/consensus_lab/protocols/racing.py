"""Racing counters: promote a value, scan, decide once one component leads by n."""

from __future__ import annotations

from ..memory import READ_ADD, READ_MULTIPLY, READ_SETBIT, READ_WRITE_INCREMENT, InstructionSet, buffer_set
from ..objects import (
    BaseAddCounter,
    BitBlockCounter,
    Call,
    Counter,
    IncrementPairCounter,
    PrimeCounter,
    SWRCounter,
)
from .base import Decide, Protocol


class RacingCounters(Protocol):
    """Obstruction-free m-valued consensus from an m-component counter.

    A process promotes its input, then alternates scan / promote.  After a
    scan it decides v if component v exceeds every other component by at
    least n; otherwise it promotes the largest component (smallest index on
    ties).
    """

    name = "racing"

    def __init__(self, counter: Counter, iset: InstructionSet, name: str | None = None) -> None:
        self.counter = counter
        self.n = counter.n
        self.m = counter.m
        self.iset = iset
        self.locations = counter.locations
        self.initial = counter.initial
        if name:
            self.name = name
        self.params = (("counter", counter.name),)

    # state: (pid, phase, counter op state, completed scans)
    def start(self, pid, value):
        if not 0 <= value < self.m:
            raise ValueError(f"input {value} outside 0..{self.m - 1}")
        local = self.counter.initial_local(pid)
        return self._op(pid, "inc", self.counter.increment(local, pid, value), 0)

    @staticmethod
    def _op(pid, phase, call: Call, scans):
        return (pid, phase, call.state, scans), (call.location, call.instr)

    def step(self, state, response):
        pid, phase, op, scans = state
        counter = self.counter
        r = counter.resume(op, response)
        if isinstance(r, Call):
            return (pid, phase, r.state, scans), (r.location, r.instr)
        if phase == "inc":
            return self._op(pid, "scan", counter.scan(r.state, pid), scans)
        counts = r.result
        scans += 1
        best = max(counts)
        v = counts.index(best)
        lead = self.n
        if all(best >= c + lead for u, c in enumerate(counts) if u != v):
            return (pid, "done", None, scans), Decide(v)
        return self._op(pid, "inc", self.promote(r.state, pid, v, counts), scans)

    def promote(self, local, pid, v, counts) -> Call:
        return self.counter.increment(local, pid, v)

    def scans(self, state):
        return state[3]


class BoundedRacing(RacingCounters):
    """Racing on a bounded counter: decrement the strongest rival once it reaches n."""

    has_guard = True

    def __init__(self, counter: Counter, iset: InstructionSet, name: str | None = None) -> None:
        if not counter.bounded:
            raise ValueError("bounded racing needs a counter with decrement")
        super().__init__(counter, iset, name)

    def promote(self, local, pid, v, counts):
        rivals = [(c, u) for u, c in enumerate(counts) if u != v]
        c_u, u = max(rivals, key=lambda t: (t[0], -t[1]))
        if c_u >= self.n:
            return self.counter.decrement(local, pid, u)
        return self.counter.increment(local, pid, v)

    def guard(self, before, location, instr):
        self.counter.check(before, instr)


def racing_multiply(n: int) -> RacingCounters:
    return RacingCounters(PrimeCounter(n, n), READ_MULTIPLY, "racing-multiply")


def racing_add_bounded(n: int) -> BoundedRacing:
    return BoundedRacing(BaseAddCounter(n, n), READ_ADD, "racing-add-bounded")


def racing_setbit(n: int) -> RacingCounters:
    return RacingCounters(BitBlockCounter(n, n), READ_SETBIT, "racing-setbit")


def racing_increment_pair(n: int, scan_budget: int | None = None) -> RacingCounters:
    """Binary consensus on two read/increment locations."""
    return RacingCounters(IncrementPairCounter(n, 2, scan_budget), READ_WRITE_INCREMENT, "racing-increment-pair")


def buffer_consensus(n: int, capacity: int, scan_budget: int | None = None) -> RacingCounters:
    """n-consensus on ceil(n/l) l-buffers via simulated single-writer registers."""
    p = RacingCounters(SWRCounter(n, n, capacity, scan_budget), buffer_set(capacity), "buffer")
    p.params = (("l", capacity),)
    return p
