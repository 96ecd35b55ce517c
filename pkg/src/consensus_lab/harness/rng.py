"""Seeded scheduler randomness.

Draws come from numpy's PCG64 bit generator (``random_raw``, 64-bit words).
Words are fetched in blocks (32 first, then 1024); the block size does not
change the stream.  A uniform index below k is obtained by rejection:
draw w until ``w < 2**64 - (2**64 % k)`` and return ``w % k``.  Both steps
depend only on the seed, so schedules reproduce across platforms.
"""

from __future__ import annotations

import numpy as np

_FIRST_BLOCK = 32
_BLOCK = 1024
_TWO64 = 1 << 64


class SchedulerRNG:
    __slots__ = ("seed", "_gen", "_buf", "_pos")

    def __init__(self, seed: int) -> None:
        self.seed = seed
        self._gen = np.random.PCG64(seed)
        self._buf: list[int] = self._gen.random_raw(_FIRST_BLOCK).tolist()
        self._pos = 0

    def refill(self) -> list[int]:
        """The next block of words (for callers that consume words inline)."""
        return self._gen.random_raw(_BLOCK).tolist()

    def word(self) -> int:
        if self._pos >= len(self._buf):
            self._buf = self.refill()
            self._pos = 0
        w = self._buf[self._pos]
        self._pos += 1
        return w

    def below(self, k: int) -> int:
        if k == 1:
            return 0
        limit = _TWO64 - (_TWO64 % k)
        while True:
            w = self.word()
            if w < limit:
                return w % k
