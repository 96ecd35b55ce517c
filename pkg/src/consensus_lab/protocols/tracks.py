from __future__ import annotations

from ..memory import READ, READ_TAS, READ_WRITE1, TEST_AND_SET, WRITE1
from .base import Decide, Protocol


class TasTracks(Protocol):
    """n-consensus on n unbounded tracks of single-bit locations.

    Position k of track v is location ``k*n + v``.  The ones on a track always
    form a prefix, so a track's count is the index of its first 0.  A process
    sets the first 0 it knows of on its preferred track, then scans: it
    re-reads every track from the position where it last saw a 0 until the
    next 0, and repeats whole collects until two agree.  It decides its
    preference once that track is at least 2 ahead of every other track and
    switches to a strictly larger track (smallest index) otherwise.
    """

    name = "tas-tracks"
    locations = None
    initial = 0

    def __init__(self, n: int, variant: str = "write1") -> None:
        if variant not in ("write1", "test-and-set"):
            raise ValueError(f"unknown variant {variant!r}")
        self.n = n
        self.m = n
        self.variant = variant
        self.iset = READ_WRITE1 if variant == "write1" else READ_TAS
        self.set_instr = WRITE1 if variant == "write1" else TEST_AND_SET
        self.params = (("variant", variant),)

    def loc(self, track: int, position: int) -> int:
        return position * self.n + track

    # state: (pref, pos, phase, prev collect, track being read, scans)
    #   pos[v] is the first position of track v last read as 0
    def start(self, pid, value):
        pos = (0,) * self.n
        return (value, pos, "write", None, 0, 0), (self.loc(value, 0), self.set_instr)

    def step(self, state, response):
        pref, pos, phase, prev, t, scans = state
        n = self.n
        if phase == "write":
            # start a collect
            return (pref, pos, "collect", prev, 0, scans), (self.loc(0, pos[0]), READ)
        if response != 0:
            # keep walking this track
            pos = pos[:t] + (pos[t] + 1,) + pos[t + 1 :]
            return (pref, pos, "collect", prev, t, scans), (self.loc(t, pos[t]), READ)
        if t + 1 < n:
            return (pref, pos, "collect", prev, t + 1, scans), (self.loc(t + 1, pos[t + 1]), READ)
        if pos != prev:
            return (pref, pos, "collect", pos, 0, scans), (self.loc(0, pos[0]), READ)
        scans += 1
        counts = pos
        top = max(counts)
        if counts[pref] < top:
            pref = counts.index(top)
        if all(counts[pref] >= c + 2 for v, c in enumerate(counts) if v != pref):
            return (pref, pos, "done", None, 0, scans), Decide(pref)
        return (pref, pos, "write", None, 0, scans), (self.loc(pref, pos[pref]), self.set_instr)

    def scans(self, state):
        return state[5]
