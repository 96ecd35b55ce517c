"""Anonymous lap-racing n-consensus on n-1 read/swap locations.

Every location holds ``(pid, seq, laps)`` where ``laps`` is an n-vector; the
``(pid, seq)`` tag only makes double-collect scans sound and is otherwise
ignored.  A process keeps its view of every value's lap, merges in what it
scans and what its last swap returned, and either fixes the first location
that disagrees with its view or, when all locations agree, decides a value
that is two laps ahead or moves the leading value to its next lap.
"""

from __future__ import annotations

from ..memory import READ, READ_SWAP, Instr
from ..objects import Call, DoubleCollect
from .base import Decide, Protocol, SoloBudget


class SwapConsensus(Protocol):
    name = "swap"
    #: the (pid, seq) tags make every transition unique, so the sweep
    #: runner does not memoize them
    memoize = False
    iset = READ_SWAP

    def __init__(self, n: int, scan_budget: int | None = None) -> None:
        if n < 2:
            raise ValueError("need n >= 2")
        self.n = n
        self.m = n
        self.locations = n - 1
        self.zero = (0,) * n
        self.initial = (-1, 0, self.zero)
        self.collect = DoubleCollect(range(n - 1), READ, scan_budget)

    # state: (pid, seq, laps, s, phase, cs, scans)
    #   phase "scan": collecting, cs is the double-collect state
    #   phase "swap"/"done": cs is the number of collects the last scan used
    def start(self, pid, value):
        laps = self.zero[:value] + (1,) + self.zero[value + 1 :]
        c = self.collect.begin()
        return (pid, 0, laps, self.zero, "scan", c.state, 0), (c.location, c.instr)

    def step(self, state, response):
        pid, seq, laps, s, phase, cs, scans = state
        if phase == "swap":
            c = self.collect.begin()
            return (pid, seq, laps, response[2], "scan", c.state, scans), (c.location, c.instr)
        r = self.collect.resume(cs, response)
        if isinstance(r, Call):
            return (pid, seq, laps, s, "scan", r.state, scans), (r.location, r.instr)
        scans += 1
        a = [x[2] for x in r.result]
        laps = tuple(max(laps[v], s[v], *(aj[v] for aj in a)) for v in range(self.n))
        top = max(laps)
        leader = laps.index(top)
        if all(aj == laps for aj in a):
            if all(top >= laps[v] + 2 for v in range(self.n) if v != leader):
                return (pid, seq, laps, s, "done", r.state, scans), Decide(leader)
            laps = laps[:leader] + (top + 1,) + laps[leader + 1 :]
        j = next(i for i, aj in enumerate(a) if aj != laps)
        return (pid, seq + 1, laps, s, "swap", r.state, scans), (j, Instr("swap", (pid, seq, laps)))

    def scans(self, state):
        return state[6]

    def scan_precedes(self, start, completed) -> bool:
        """Whether the scan in flight in ``start`` took effect before it.

        A double-collect scan takes effect between its last two collects.
        If ``start`` is already past its first collect and the scan then
        finishes without starting another collect (``completed`` is the
        state right after it finishes), both of those collects began
        before ``start``.
        """
        if start[4] != "scan" or start[5][0] is None:
            return False
        return completed[5] == start[5][2]

    def laps(self, state) -> tuple:
        return state[2]

    def solo_budget(self):
        n = self.n
        scans = 3 * n - 2
        # each scan is at most 3 collects of n-1 reads, each swap one step
        return SoloBudget(scans * 3 * (n - 1) + scans, scans)
