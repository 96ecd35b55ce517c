"""Linearizability checking for simulated objects.

A concurrent history is a list of :class:`Op` records.  ``start`` and ``end``
are the global step indices of an operation's first and last memory step,
so ``a`` precedes ``b`` in real time exactly when ``a.end < b.start``.

The checker is the Wing-Gong search: repeatedly pick an operation that no
remaining operation precedes, apply it to the sequential specification and
compare results, backtracking on mismatch.  Visited (remaining-set, spec
state) pairs are memoized.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Iterator, Sequence

from ..errors import SearchTooLarge
from ..memory import ACK, Memory, buffer_set
from ..objects import Call, HistoryObject
from .rng import SchedulerRNG

MAX_OPS = 20


@dataclass(frozen=True)
class Op:
    pid: int
    kind: str
    arg: Any
    result: Any
    start: int
    end: int


@dataclass(frozen=True)
class SequentialSpec:
    """``apply(state, kind, arg) -> (state', result)`` from ``init``."""

    name: str
    init: Any
    apply: Callable[[Any, str, Any], tuple[Any, Any]]


def _history_apply(state: tuple, kind: str, arg: Any) -> tuple[tuple, Any]:
    if kind == "append":
        return state + (arg,), ACK
    if kind == "get":
        return state, state
    raise ValueError(f"history objects have no operation {kind!r}")


HISTORY_SPEC = SequentialSpec("history", (), _history_apply)


@dataclass
class LinResult:
    ok: bool
    order: list[Op] | None = None
    failing_prefix: list[Op] | None = None

    def __bool__(self) -> bool:
        return self.ok


def _search(ops: Sequence[Op], spec: SequentialSpec) -> list[Op] | None:
    k = len(ops)
    full = (1 << k) - 1
    # preceders[i]: ops that must be linearized before ops[i]
    preceders = [sum(1 << j for j in range(k) if ops[j].end < ops[i].start) for i in range(k)]
    dead: set = set()

    def go(done: int, state: Any, order: list[int]) -> bool:
        if done == full:
            return True
        key = (done, state)
        if key in dead:
            return False
        for i in range(k):
            bit = 1 << i
            if done & bit or preceders[i] & ~done:
                continue
            op = ops[i]
            new, result = spec.apply(state, op.kind, op.arg)
            if result != op.result:
                continue
            order.append(i)
            if go(done | bit, new, order):
                return True
            order.pop()
        dead.add(key)
        return False

    order: list[int] = []
    if go(0, spec.init, order):
        return [ops[i] for i in order]
    return None


def check_linearizable(ops: Sequence[Op], spec: SequentialSpec = HISTORY_SPEC, max_ops: int = MAX_OPS) -> LinResult:
    """Decide whether the complete history ``ops`` is linearizable w.r.t. ``spec``.

    On success ``order`` is one valid linearization.  On failure
    ``failing_prefix`` is the shortest prefix (by invocation) that is
    already not linearizable.
    """
    if len(ops) > max_ops:
        raise SearchTooLarge(f"{len(ops)} operations > limit {max_ops}")
    order = _search(ops, spec)
    if order is not None:
        return LinResult(True, order=order)
    by_start = sorted(ops, key=lambda o: (o.start, o.end))
    for k in range(1, len(by_start) + 1):
        if _search(by_start[:k], spec) is None:
            return LinResult(False, failing_prefix=by_start[:k])
    return LinResult(False, failing_prefix=by_start)  # pragma: no cover


# ---------------------------------------------------------------------------
# history-object workloads
# ---------------------------------------------------------------------------

# A program is a list of ("append", payload) or ("get", None) operations.
Program = Sequence[tuple[str, Any]]

_STEPS = {"append": 2, "get": 1}


def program_steps(program: Program) -> int:
    return sum(_STEPS[kind] for kind, _ in program)


def run_history_workload(capacity: int, programs: Sequence[Program], schedule: Iterable[int]) -> list[Op]:
    """Execute ``programs`` (one per process) on a fresh history object.

    ``schedule`` lists which process takes each step; every process with a
    non-empty program appends as itself, so at most ``capacity`` of them may
    append.  Returns the completed operations.
    """
    mem = Memory(buffer_set(capacity))
    appenders = [p for p, prog in enumerate(programs) if any(k == "append" for k, _ in prog)]
    obj = HistoryObject(0, capacity, appenders)
    nxt = [0] * len(programs)
    seq = [0] * len(programs)
    pending: list[tuple | None] = [None] * len(programs)  # (Call, kind, arg, start)
    ops: list[Op] = []
    for t, p in enumerate(schedule):
        if pending[p] is None:
            kind, arg = programs[p][nxt[p]]
            nxt[p] += 1
            if kind == "append":
                call = obj.append(p, seq[p], arg)
                arg = (p, seq[p], arg)
                seq[p] += 1
            else:
                call = obj.get_history()
            pending[p] = (call, kind, arg, t)
        call, kind, arg, start = pending[p]
        r = obj.resume(call.state, mem.apply(call.location, call.instr))
        if isinstance(r, Call):
            pending[p] = (r, kind, arg, start)
        else:
            pending[p] = None
            ops.append(Op(p, kind, arg, r.result, start, t))
    if any(x is not None for x in pending):
        raise ValueError("schedule ends with an operation in flight")
    return ops


def interleavings(counts: Sequence[int]) -> Iterator[tuple[int, ...]]:
    """Every sequence containing process p exactly ``counts[p]`` times."""
    total = sum(counts)
    left = list(counts)
    buf: list[int] = []

    def go() -> Iterator[tuple[int, ...]]:
        if len(buf) == total:
            yield tuple(buf)
            return
        for p, c in enumerate(left):
            if c:
                left[p] -= 1
                buf.append(p)
                yield from go()
                buf.pop()
                left[p] += 1

    return go()


def all_history_runs(capacity: int, programs: Sequence[Program]) -> Iterator[list[Op]]:
    counts = [program_steps(prog) for prog in programs]
    for sched in interleavings(counts):
        yield run_history_workload(capacity, programs, sched)


def random_programs(rng: SchedulerRNG, capacity: int, max_ops: int = 12) -> list[list[tuple[str, Any]]]:
    """A random workload: up to ``capacity`` appenders and up to two readers."""
    appenders = 1 + rng.below(capacity)
    readers = rng.below(3)
    programs: list[list[tuple[str, Any]]] = [[] for _ in range(appenders + readers)]
    budget = 2 + rng.below(max_ops - 1)
    label = itertools.count()
    for _ in range(budget):
        p = rng.below(len(programs))
        if p < appenders:
            programs[p].append(("append" if rng.below(4) else "get", next(label)))
        else:
            programs[p].append(("get", None))
    return [[(k, a if k == "append" else None) for k, a in prog] for prog in programs]


def random_schedule(rng: SchedulerRNG, programs: Sequence[Program]) -> list[int]:
    left = [program_steps(prog) for prog in programs]
    out = []
    while any(left):
        live = [p for p, c in enumerate(left) if c]
        p = live[rng.below(len(live))]
        left[p] -= 1
        out.append(p)
    return out
