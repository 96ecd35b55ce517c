"""n-valued consensus from binary consensus, one bit per round.

Round i (most significant bit first) owns ``c + 2w`` consecutive locations:
a designated block for bit 0, one for bit 1 (``w`` locations each), then the
``c`` locations of a fresh binary consensus instance.  The last round has no
designated blocks, which gives ``(c + 2w) * ceil(log2 n) - 2w`` locations.

A process records its value in the designated block of its current bit,
runs binary consensus on that bit and, if it lost, adopts a value recorded
in the winning bit's block.

Designated blocks come in two flavours:

* ``w = 1``: one location holding ``value + 1`` (0 means empty), written
  with ``write``;
* ``w = n``: n single-bit locations, value x recorded by setting bit x
  (with write1 or test-and-set) and found by reading bits until a 1.
"""

from __future__ import annotations

from typing import Callable

from ..errors import MissingRecordedValue
from ..memory import (
    READ,
    READ_TAS_RESET,
    READ_WRITE01,
    READ_WRITE_INCREMENT,
    RESET,
    TEST_AND_SET,
    WRITE0,
    WRITE1,
    Instr,
    InstructionSet,
)
from ..objects import Call, DoubleCollect
from .base import Decide, Protocol, ceil_log2
from .racing import racing_increment_pair


class BitByBit(Protocol):
    name = "bit-by-bit"

    def __init__(
        self,
        binary: Callable[[], Protocol],
        n: int,
        iset: InstructionSet,
        block: int = 1,
        set_instr: Instr = WRITE1,
        name: str | None = None,
    ) -> None:
        self.n = n
        self.m = n
        self.inner = binary()
        if self.inner.m != 2 or self.inner.locations is None:
            raise ValueError("need a binary protocol with a finite location count")
        self.c = self.inner.locations
        self.iset = iset
        self.initial = self.inner.initial
        self.block = block
        self.set_instr = set_instr
        self.rounds = max(1, ceil_log2(n))
        self.round_size = self.c + 2 * block
        self.locations = self.round_size * self.rounds - 2 * block
        if name:
            self.name = name

    def bit(self, value: int, rnd: int) -> int:
        return (value >> (self.rounds - 1 - rnd)) & 1

    def designated(self, rnd: int, b: int) -> int:
        return rnd * self.round_size + b * self.block

    def binary_base(self, rnd: int) -> int:
        if rnd == self.rounds - 1:
            return rnd * self.round_size
        return rnd * self.round_size + 2 * self.block

    def _record(self, pid, value, rnd, scans):
        b = self.bit(value, rnd)
        if rnd == self.rounds - 1:
            return self._binary_start(pid, value, rnd, scans)
        loc = self.designated(rnd, b)
        if self.block == 1:
            return (pid, value, rnd, "record", None, scans), (loc, Instr("write", value + 1))
        return (pid, value, rnd, "record", None, scans), (loc + value, self.set_instr)

    def _binary_start(self, pid, value, rnd, scans):
        inner, action = self.inner.start(pid, self.bit(value, rnd))
        return self._inner(pid, value, rnd, inner, action, scans)

    def _inner(self, pid, value, rnd, inner, action, scans):
        if isinstance(action, Decide):
            return self._decided_bit(pid, value, rnd, action.value, scans + self.inner.scans(inner))
        loc, instr = action
        return (pid, value, rnd, "binary", inner, scans), (loc + self.binary_base(rnd), instr)

    def _decided_bit(self, pid, value, rnd, bit, scans):
        last = rnd == self.rounds - 1
        if bit == self.bit(value, rnd):
            if last:
                return (pid, value, rnd, "done", None, scans), Decide(value)
            return self._record(pid, value, rnd + 1, scans)
        if last:
            # every value in play agrees on the earlier bits
            return (pid, value, rnd, "done", None, scans), Decide(value ^ 1)
        loc = self.designated(rnd, bit)
        return (pid, value, rnd, ("adopt", bit, 0), None, scans), (loc, READ)

    # state: (pid, value, round, phase, inner state, scans)
    def start(self, pid, value):
        if not 0 <= value < self.n:
            raise ValueError(f"input {value} outside 0..{self.n - 1}")
        return self._record(pid, value, 0, 0)

    def step(self, state, response):
        pid, value, rnd, phase, inner, scans = state
        if phase == "record":
            return self._binary_start(pid, value, rnd, scans)
        if phase == "binary":
            inner, action = self.inner.step(inner, response)
            return self._inner(pid, value, rnd, inner, action, scans)
        _, bit, k = phase
        if self.block == 1:
            if response == 0:
                raise MissingRecordedValue(f"round {rnd} block {bit} is empty")
            return self._record(pid, response - 1, rnd + 1, scans)
        if response == 1:
            return self._record(pid, k, rnd + 1, scans)
        if k + 1 >= self.n:
            raise MissingRecordedValue(f"round {rnd} block {bit} is empty")
        loc = self.designated(rnd, bit) + k + 1
        return (pid, value, rnd, ("adopt", bit, k + 1), None, scans), (loc, READ)

    def scans(self, state):
        extra = self.inner.scans(state[4]) if state[3] == "binary" else 0
        return state[5] + extra


class BitRace(Protocol):
    """Binary consensus on 2n single-bit locations (two tracks of n bits).

    Track v is locations ``v*n .. v*n+n-1``; the *target* for v is track v
    all ones and the other track all zeros.  A process scans all 2n bits
    (double collect); decides v if the scan equals v's target; switches its
    preference if the other track holds more ones; otherwise writes the first
    bit that differs from its preference's target (clearing the rival track
    before filling its own).  One write per scan.

    ``variant`` is ``"write01"`` (write1/write0) or ``"tas-reset"``
    (test-and-set/reset).
    """

    name = "bit-race"

    def __init__(self, n: int, variant: str = "write01", scan_budget: int | None = None) -> None:
        if variant not in ("write01", "tas-reset"):
            raise ValueError(f"unknown variant {variant!r}")
        self.n = n
        self.m = 2
        self.variant = variant
        self.iset = READ_WRITE01 if variant == "write01" else READ_TAS_RESET
        self.set_instr = WRITE1 if variant == "write01" else TEST_AND_SET
        self.clear_instr = WRITE0 if variant == "write01" else RESET
        self.locations = 2 * n
        self.initial = 0
        self.collect = DoubleCollect(range(2 * n), READ, scan_budget)
        self.targets = tuple(
            tuple(1 if (i // n) == v else 0 for i in range(2 * n)) for v in (0, 1)
        )
        self.params = (("variant", variant),)

    # state: (pref, collect state, scans)
    def start(self, pid, value):
        c = self.collect.begin()
        return (value, c.state, 0), (c.location, c.instr)

    def step(self, state, response):
        pref, cs, scans = state
        if cs is None:
            c = self.collect.begin()
            return (pref, c.state, scans), (c.location, c.instr)
        r = self.collect.resume(cs, response)
        if isinstance(r, Call):
            return (pref, r.state, scans), (r.location, r.instr)
        scans += 1
        bits = r.result
        for v in (0, 1):
            if bits == self.targets[v]:
                return (v, None, scans), Decide(v)
        n = self.n
        mine = sum(bits[pref * n : pref * n + n])
        rival = sum(bits[(1 - pref) * n : (1 - pref) * n + n])
        if rival > mine:
            pref = 1 - pref
        target = self.targets[pref]
        order = list(range((1 - pref) * n, (1 - pref) * n + n)) + list(range(pref * n, pref * n + n))
        i = next(i for i in order if bits[i] != target[i])
        instr = self.set_instr if target[i] else self.clear_instr
        return (pref, None, scans), (i, instr)

    def scans(self, state):
        return state[2]


def increment_logn(n: int, scan_budget: int | None = None) -> BitByBit:
    """n-consensus on 4*ceil(log2 n) - 2 read/write/increment locations."""
    return BitByBit(lambda: racing_increment_pair(n, scan_budget), n, READ_WRITE_INCREMENT, name="increment-logn")


def tas_reset_nlogn(n: int, variant: str = "tas-reset", scan_budget: int | None = None) -> BitByBit:
    """n-consensus on (4n) * ceil(log2 n) - 2n single-bit locations."""
    base = BitRace(n, variant, scan_budget)
    p = BitByBit(lambda: base, n, base.iset, block=n, set_instr=base.set_instr, name="tas-reset")
    p.params = (("variant", variant),)
    return p
