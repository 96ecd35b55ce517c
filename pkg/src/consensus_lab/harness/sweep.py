"""Seeded random sweeps: many random schedules of one protocol."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

from ..protocols import Protocol, make
from .engine import BUDGET, DEFAULT_BUDGET, OK, FastRunner, Schedule, Trace, Verdict, run
from .rng import SchedulerRNG


def sweep_inputs(protocol: Protocol, seed: int, index: int, fixed: Sequence[int] | None = None) -> tuple[int, ...]:
    """Input vector of run ``index``: ``fixed`` if given, else a mixed random vector.

    Mixed means at least two distinct values whenever ``m >= 2``.
    """
    if fixed is not None:
        return tuple(fixed)
    n, m = protocol.n, protocol.m
    rng = SchedulerRNG((seed << 32) ^ index ^ 0x5EED)
    vec = [rng.below(m) for _ in range(n)]
    if m >= 2 and len(set(vec)) == 1:
        vec[index % n] = (vec[0] + 1) % m
    return tuple(vec)


def sweep(
    protocol: Protocol,
    runs: int,
    seed: int = 0,
    budget: int = DEFAULT_BUDGET,
    inputs: Sequence[int] | None = None,
    progress: Callable[[int, dict], None] | None = None,
    start: int = 0,
) -> Verdict:
    """Run schedules ``random(seed + i)`` for ``i`` in ``start..start+runs-1``.

    Stops at the first safety violation and returns it with a full witness
    trace.  Runs that exhaust the step budget are counted, not failed.
    """
    runner = FastRunner(protocol)
    counts: dict[str, int] = {}
    stats = {"runs": 0, "outcomes": counts, "max_steps": 0, "max_touched": 0, "seed": seed, "budget": budget}
    for i in range(start, start + runs):
        vec = sweep_inputs(protocol, seed, i, inputs)
        outcome, message, st = runner.run(vec, seed + i, budget)
        counts[outcome] = counts.get(outcome, 0) + 1
        stats["runs"] += 1
        stats["max_steps"] = max(stats["max_steps"], st["steps"])
        stats["max_touched"] = max(stats["max_touched"], st["touched"])
        if outcome not in (OK, BUDGET):
            verdict, trace = run(protocol, vec, Schedule.random(seed + i, budget))
            verdict.witness = trace
            verdict.stats = {**stats, "run": verdict.stats}
            return verdict
        if progress is not None and stats["runs"] % 1000 == 0:
            progress(stats["runs"], stats)
    undecided = counts.get(BUDGET, 0)
    msg = f"{stats['runs']} random schedules, no safety violation"
    if undecided:
        msg += f" ({undecided} hit the step budget)"
    return Verdict(OK, msg, None, stats)


def _chunk(args: tuple) -> dict:
    name, n, l, variant, runs, seed, budget, inputs, start = args
    v = sweep(make(name, n, l, variant), runs, seed, budget, inputs, start=start)
    return v.to_dict()


def parallel_sweep(
    name: str,
    n: int,
    runs: int,
    seed: int = 0,
    budget: int = DEFAULT_BUDGET,
    l: int | None = None,
    variant: str | None = None,
    inputs: Sequence[int] | None = None,
    workers: int = 2,
) -> Verdict:
    """:func:`sweep` split into ``workers`` disjoint seed ranges in separate processes.

    The merged result covers exactly the same schedules as the sequential
    sweep; on a violation the reported witness is the one with the lowest
    run index.
    """
    size = -(-runs // workers)
    jobs = [
        (name, n, l, variant, min(size, runs - s), seed, budget, inputs, s)
        for s in range(0, runs, size)
    ]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_chunk, jobs))
    counts: dict[str, int] = {}
    stats = {"runs": 0, "outcomes": counts, "max_steps": 0, "max_touched": 0, "seed": seed, "budget": budget}
    for part in parts:
        st = part["stats"]
        if part["outcome"] != OK:
            return Verdict(part["outcome"], part["message"], Trace.loads(part["witness"]), st)
        stats["runs"] += st["runs"]
        stats["max_steps"] = max(stats["max_steps"], st["max_steps"])
        stats["max_touched"] = max(stats["max_touched"], st["max_touched"])
        for k, c in st["outcomes"].items():
            counts[k] = counts.get(k, 0) + c
    msg = f"{stats['runs']} random schedules, no safety violation"
    if counts.get(BUDGET):
        msg += f" ({counts[BUDGET]} hit the step budget)"
    return Verdict(OK, msg, None, stats)
