from __future__ import annotations

from ..memory import MAX_REGISTER, READ_MAX, Instr
from ..objects import Call, DoubleCollect, MaxRegisterPair
from .base import Decide, Protocol


class MaxRegisterConsensus(Protocol):
    """n-consensus on two max-registers m1 (location 0) and m2 (location 1).

    Registers hold encoded pairs (r, x).  After writing (0, input) to m1, a
    process scans both and then:

    * m1 = (r+1, x), m2 = (r, x)  -> decide x
    * m1 = m2 = (r, x)            -> write-max (r+1, x) to m1
    * otherwise                   -> write-max m1's value to m2
    """

    name = "maxreg"
    iset = MAX_REGISTER
    locations = 2

    def __init__(self, n: int, scan_budget: int | None = None) -> None:
        self.n = n
        self.m = n
        self.pair = MaxRegisterPair(n)
        self.initial = self.pair.encode(0, 0)
        self.collect = DoubleCollect((0, 1), READ_MAX, scan_budget)

    # state: ("write", scans) | ("scan", collect state, scans)
    def start(self, pid, value):
        return ("write", 0), (0, Instr("write-max", self.pair.encode(0, value)))

    def step(self, state, response):
        if state[0] == "write":
            c = self.collect.begin()
            return ("scan", c.state, state[1]), (c.location, c.instr)
        r = self.collect.resume(state[1], response)
        if isinstance(r, Call):
            return ("scan", r.state, state[2]), (r.location, r.instr)
        scans = state[2] + 1
        a, b = r.result
        r1, x1 = self.pair.decode(a)
        r2, x2 = self.pair.decode(b)
        if x1 == x2 and r1 == r2 + 1:
            return ("done", scans), Decide(x1)
        if a == b:
            return ("write", scans), (0, Instr("write-max", self.pair.encode(r1 + 1, x1)))
        return ("write", scans), (1, Instr("write-max", a))

    def scans(self, state):
        return state[-1]
