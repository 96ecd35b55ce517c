"""Wait-free binary consensus on one location with a combined instruction set."""

from __future__ import annotations

from ..errors import ZeroRead
from ..memory import DEC_MUL, DECREMENT, FAA_TAS, READ, TEST_AND_SET, Instr
from .base import Decide, Protocol, SoloBudget


class FaaTas(Protocol):
    """Input 0 does fetch-and-add(2), input 1 does test-and-set().

    Decide 1 on an odd response or on 0 returned by test-and-set, else 0.
    """

    name = "faa-tas"
    iset = FAA_TAS
    initial = 0
    locations = 1

    def __init__(self, n: int) -> None:
        self.n = n
        self.m = 2

    def start(self, pid, value):
        instr = TEST_AND_SET if value == 1 else Instr("fetch-and-add", 2)
        return (value,), (0, instr)

    def step(self, state, response):
        if response % 2 == 1 or (state[0] == 1 and response == 0):
            return state, Decide(1)
        return state, Decide(0)

    def solo_budget(self):
        return SoloBudget(1)


class DecMul(Protocol):
    """Input 0 decrements, input 1 multiplies by n; then read and decide by sign.

    The location starts at 1.  It stays positive iff a multiply came first,
    and once a decrement comes first it never becomes positive again, so a
    read of 0 means a decrement won.  With ``strict=True`` a read of exactly 0
    raises :class:`ZeroRead` instead.
    """

    name = "dec-mul"
    iset = DEC_MUL
    initial = 1
    locations = 1

    def __init__(self, n: int, strict: bool = False) -> None:
        self.n = n
        self.m = 2
        self.strict = strict
        if strict:
            self.params = (("strict", True),)

    def start(self, pid, value):
        instr = Instr("multiply", self.n) if value == 1 else DECREMENT
        return ("update",), (0, instr)

    def step(self, state, response):
        if state[0] == "update":
            return ("read",), (0, READ)
        if response > 0:
            return state, Decide(1)
        if response == 0 and self.strict:
            raise ZeroRead("read returned 0")
        return state, Decide(0)

    def solo_budget(self):
        return SoloBudget(2)
