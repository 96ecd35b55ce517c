"""Bounded-exhaustive exploration with solo-termination checks."""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

from ..errors import ConsensusLabError
from ..memory import Configuration
from ..protocols import Protocol, SoloBudget
from .engine import (
    AGREEMENT,
    INCONCLUSIVE,
    OK,
    PROTOCOL_ERROR,
    SOLO_EXCEEDED,
    Schedule,
    Verdict,
    advance,
    check_decisions,
    initial_configuration,
    run,
)


def _witness(protocol: Protocol, inputs, path) -> Verdict:
    verdict, trace = run(protocol, inputs, Schedule.replay(path))
    if verdict.witness is None:
        verdict.witness = trace
    return verdict


def solo_check(
    protocol: Protocol, config: Configuration, p: int, inputs: Sequence[int], budget: SoloBudget
) -> tuple[str, str, int] | None:
    """Run ``p`` alone from ``config``; return (outcome, message, steps) on failure."""
    return SoloChecker(protocol, inputs, budget).check(config, p)


class SoloChecker:
    """Solo runs with memoized outcomes.

    A solo run of ``p`` depends only on the memory and ``p``'s local state,
    so every configuration passed through is remembered as (memory, local)
    -> (decision, absolute scan count at the decision, local state right
    after the first scan completed, steps to decide).  A scan that took
    effect before the solo run began (see :meth:`Protocol.scan_precedes`)
    is not charged.
    """

    def __init__(self, protocol: Protocol, inputs: Sequence[int], budget: SoloBudget) -> None:
        self.protocol = protocol
        self.inputs = tuple(inputs)
        self.budget = budget
        self.memo: dict = {}

    def _solo(self, config: Configuration, p: int):
        """(decision, final scans, first completion, steps) or an error triple."""
        protocol = self.protocol
        memo = self.memo
        c = config.copy()
        path = []  # (memo key, local state) per visited state
        result = None
        for _ in range(self.budget.steps + 1):
            local = c.locals[p]
            key = (tuple(sorted(c.memory.cells.items())), local)
            hit = memo.get(key)
            if hit is not None:
                result = hit
                break
            path.append((key, local))
            if len(path) > self.budget.steps:
                return ("exceeded",)
            try:
                step = advance(protocol, c, p)
            except ConsensusLabError as exc:
                return ("error", f"{type(exc).__name__}: {exc}", len(path))
            if step.decided is not None:
                result = (step.decided, protocol.scans(c.locals[p]), None, 0)
                path.append((None, c.locals[p]))
                break
        else:  # pragma: no cover
            return ("exceeded",)
        if not path:
            return result
        decision, final, first, steps = result
        # back-fill: walk the path backwards tracking the first completed scan
        tail_first = first
        after = None
        for idx in range(len(path) - 1, -1, -1):
            key, local = path[idx]
            if after is not None and protocol.scans(after) > protocol.scans(local):
                tail_first = after
            steps_here = steps + (len(path) - 1 - idx)
            if key is not None:
                memo[key] = (decision, final, tail_first, steps_here)
            after = local
        return memo[path[0][0]]

    def check(self, config: Configuration, p: int) -> tuple[str, str, int] | None:
        out = self._solo(config, p)
        if out[0] == "exceeded":
            return SOLO_EXCEEDED, f"process {p} undecided after {self.budget.steps} solo steps", self.budget.steps
        if out[0] == "error":
            return PROTOCOL_ERROR, out[1], out[2]
        decision, final, first, steps = out
        if steps > self.budget.steps:
            return SOLO_EXCEEDED, f"process {p} undecided after {self.budget.steps} solo steps", self.budget.steps
        decided = list(config.decided)
        decided[p] = decision
        bad = check_decisions(decided, self.inputs)
        if bad:
            return bad[0], bad[1] + " (solo extension)", steps
        if self.budget.scans is not None:
            start = config.locals[p]
            used = final - self.protocol.scans(start)
            if first is not None and self.protocol.scan_precedes(start, first):
                used -= 1
            if used > self.budget.scans:
                return SOLO_EXCEEDED, f"process {p} used {used} scans solo > {self.budget.scans}", steps
        return None


def _path(parents: dict, key) -> tuple[int, ...]:
    out = []
    while True:
        parent, pid = parents[key]
        if parent is None:
            break
        out.append(pid)
        key = parent
    return tuple(reversed(out))


def explore(
    protocol: Protocol,
    inputs: Sequence[int],
    depth: int,
    solo_budget: SoloBudget | None = None,
    node_cap: int = 2_000_000,
    solo_checks: bool = True,
    collect_keys: bool = False,
    progress: Callable[[dict], None] | None = None,
    checker: SoloChecker | None = None,
) -> Verdict:
    """Breadth-first search over every schedule of at most ``depth`` steps.

    Each distinct configuration (by canonical key) is expanded once, at the
    smallest depth it is reachable, so a reported witness is as short as
    possible.  Every configuration reached also gets a solo run of each
    undecided process.
    """
    inputs = tuple(inputs)
    budget = solo_budget or protocol.solo_budget()
    if checker is None:
        checker = SoloChecker(protocol, inputs, budget)
    root = initial_configuration(protocol, inputs)
    parents: dict = {root.key(): (None, None)}
    frontier = [(root, root.key())]
    stats = {"configs": 0, "solo_checks": 0, "max_depth": 0, "max_touched": 0, "inputs": list(inputs)}

    def fail(path: tuple[int, ...], outcome: str | None = None, message: str | None = None) -> Verdict:
        v = _witness(protocol, inputs, path)
        if outcome is not None:
            v.outcome, v.message = outcome, message
        v.stats = stats
        return v

    level = 0
    while frontier:
        stats["max_depth"] = level
        nxt = []
        for config, key in frontier:
            stats["configs"] += 1
            stats["max_touched"] = max(stats["max_touched"], config.memory.touched)
            if stats["configs"] > node_cap:
                return Verdict(INCONCLUSIVE, f"node cap {node_cap} exceeded", None, stats)
            if progress is not None and stats["configs"] % 10_000 == 0:
                progress(stats)
            running = config.running()
            if solo_checks:
                for p in running:
                    stats["solo_checks"] += 1
                    bad = checker.check(config, p)
                    if bad:
                        outcome, message, k = bad
                        return fail(_path(parents, key) + (p,) * k, outcome, message)
            if level >= depth:
                continue
            for p in running:
                child = config.copy()
                try:
                    step = advance(protocol, child, p)
                except ConsensusLabError as exc:
                    return fail(_path(parents, key) + (p,), PROTOCOL_ERROR, f"{type(exc).__name__}: {exc}")
                if step.decided is not None:
                    if check_decisions(child.decided, inputs):
                        return fail(_path(parents, key) + (p,))
                ck = child.key()
                if ck not in parents:
                    parents[ck] = (key, p)
                    nxt.append((child, ck))
        frontier = nxt
        level += 1
    verdict = Verdict(OK, f"explored {stats['configs']} configurations to depth {depth}", None, stats)
    if collect_keys:
        verdict.stats["keys"] = set(parents)
    return verdict


def input_vectors(n: int, m: int) -> Iterable[tuple[int, ...]]:
    return itertools.product(range(m), repeat=n)


def explore_all(
    protocol: Protocol,
    depth: int,
    vectors: Iterable[Sequence[int]] | None = None,
    **kwargs,
) -> Verdict:
    """:func:`explore` over every input vector; stops at the first non-ok verdict."""
    total = {"configs": 0, "solo_checks": 0, "vectors": 0, "max_touched": 0}
    for inputs in vectors if vectors is not None else input_vectors(protocol.n, protocol.m):
        v = explore(protocol, inputs, depth, **kwargs)
        total["vectors"] += 1
        total["configs"] += v.stats["configs"]
        total["solo_checks"] += v.stats["solo_checks"]
        total["max_touched"] = max(total["max_touched"], v.stats["max_touched"])
        if not v.ok:
            v.stats = {**v.stats, **{k: total[k] for k in ("vectors",)}}
            return v
    return Verdict(OK, f"{total['vectors']} input vectors explored to depth {depth}", None, total)


def naive_keys(protocol: Protocol, inputs: Sequence[int], depth: int) -> set:
    """Every configuration key reachable within ``depth`` steps, without memoization."""
    keys = set()

    def go(config: Configuration, d: int) -> None:
        keys.add(config.key())
        if d == 0:
            return
        for p in config.running():
            child = config.copy()
            advance(protocol, child, p)
            go(child, d - 1)

    go(initial_configuration(protocol, inputs), depth)
    return keys


__all__ = ["explore", "explore_all", "input_vectors", "naive_keys", "solo_check", "AGREEMENT", "OK"]
