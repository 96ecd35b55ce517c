from __future__ import annotations

from dataclasses import dataclass
from typing import Any, NamedTuple

from ..memory import Instr, InstructionSet


class Decide(NamedTuple):
    value: int


# An action is either ``(location, Instr)`` (the process is poised) or Decide.
Action = Any


@dataclass(frozen=True)
class SoloBudget:
    """How long a solo run may take: ``steps`` always, ``scans`` when the
    protocol has an exact scan bound."""

    steps: int
    scans: int | None = None


class Protocol:
    """Per-process state machine over a uniform instruction set.

    Subclasses set the attributes below and implement :meth:`start` and
    :meth:`step`.  Both must be pure: equal arguments give equal results.
    Local states are tuples of ints, strings, ``None`` and nested tuples.
    """

    name: str = "protocol"
    iset: InstructionSet
    n: int
    m: int
    locations: int | None = None
    initial: Any = 0
    #: tuple of named parameters shown in reports and traces
    params: tuple = ()

    def start(self, pid: int, value: int) -> tuple[Any, Action]:
        raise NotImplementedError

    def step(self, state: Any, response: Any) -> tuple[Any, Action]:
        raise NotImplementedError

    def scans(self, state: Any) -> int:
        """Completed scans recorded in ``state`` (0 for scan-free protocols)."""
        return 0

    def scan_precedes(self, start: Any, completed: Any) -> bool:
        """Whether the scan in flight in local state ``start`` took effect
        before that state was reached; ``completed`` is the state right after
        the scan finished.  Such a scan does not count against a solo scan
        bound that starts at ``start``."""
        return False

    def solo_budget(self) -> SoloBudget:
        return SoloBudget(50 * self.n * self.m)

    def guard(self, before: Any, location: Any, instr: Instr) -> None:
        """Hook run before each instruction with the location's current value."""

    has_guard = False

    def describe(self) -> dict:
        return {"protocol": self.name, "n": self.n, "m": self.m, **dict(self.params)}

    def __repr__(self) -> str:
        extra = "".join(f", {k}={v}" for k, v in self.params)
        return f"{type(self).__name__}(n={self.n}{extra})"


def ceil_log2(n: int) -> int:
    return max(0, (n - 1).bit_length())
