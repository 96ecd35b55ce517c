"""Space usage: measured touched locations against the known upper bounds."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from ..protocols import Protocol, ceil_log2, make
from .engine import Schedule, run
from .rng import SchedulerRNG


def measure_space(protocol: Protocol, inputs: Sequence[int] | Iterable[Sequence[int]], schedules: Iterable[Schedule]) -> int:
    """Maximum touched-location count over every (input vector, schedule) pair.

    ``inputs`` is either one input vector or an iterable of them.
    """
    inputs = list(inputs)
    vectors = [tuple(inputs)] if inputs and isinstance(inputs[0], int) else [tuple(v) for v in inputs]
    schedules = list(schedules)
    best = 0
    for vec in vectors:
        for sched in schedules:
            verdict, _ = run(protocol, vec, sched)
            best = max(best, verdict.stats["touched"])
    return best


def formula(name: str, n: int, l: int | None = None) -> int | None:
    """Upper bound on locations for a registered protocol (None: unbounded)."""
    R = max(1, ceil_log2(n))
    if name in ("faa-tas", "dec-mul", "racing-multiply", "racing-add-bounded", "racing-setbit"):
        return 1
    if name == "maxreg":
        return 2
    if name == "increment-logn":
        return 4 * R - 2
    if name == "buffer":
        return -(-n // (l or 2))
    if name == "swap":
        return n - 1
    if name == "tas-reset":
        return 4 * n * R - 2 * n
    if name == "tas-tracks":
        return None
    raise KeyError(name)


FORMULA_TEXT = {
    "faa-tas": "1",
    "dec-mul": "1",
    "racing-multiply": "1",
    "racing-add-bounded": "1",
    "racing-setbit": "1",
    "maxreg": "2",
    "increment-logn": "4*ceil(log2 n)-2",
    "buffer": "ceil(n/l)",
    "swap": "n-1",
    "tas-reset": "4n*ceil(log2 n)-2n",
    "tas-tracks": "unbounded",
}

#: rows whose bound is attained exactly; the others are only upper bounds
EXACT = frozenset(FORMULA_TEXT) - {"tas-reset", "tas-tracks"}


def table_schedules(n: int, seeds: int, budget: int) -> list[Schedule]:
    return [Schedule.round_robin(budget)] + [Schedule.random(s, budget) for s in range(seeds)]


def table_inputs(protocol: Protocol, seed: int = 0, extra: int = 4) -> list[tuple[int, ...]]:
    """Distinct inputs ``0..n-1`` (mod m), all-equal, and a few random vectors."""
    n, m = protocol.n, protocol.m
    vecs = [tuple(p % m for p in range(n)), (0,) * n]
    rng = SchedulerRNG(seed)
    for _ in range(extra):
        vecs.append(tuple(rng.below(m) for _ in range(n)))
    return list(dict.fromkeys(vecs))


@dataclass
class SpaceRow:
    protocol: str
    n: int
    l: int | None
    measured: int
    formula: int | None
    formula_text: str
    relation: str
    match: bool

    def to_dict(self) -> dict:
        return asdict(self)


def space_row(name: str, n: int, l: int | None = None, seeds: int = 20, budget: int = 10_000) -> SpaceRow:
    protocol = make(name, n, l)
    measured = measure_space(protocol, table_inputs(protocol), table_schedules(n, seeds, budget))
    bound = formula(name, n, l)
    if bound is None:
        relation, match = "unbounded", True
    elif name in EXACT:
        relation, match = "=", measured == bound
    else:
        relation, match = "<=", measured <= bound
    return SpaceRow(name, n, l if name == "buffer" else None, measured, bound, FORMULA_TEXT[name], relation, match)
