"""Objects simulated on top of memory instructions.

Each object operation is a small resumable machine.  ``begin``-style methods
return either :class:`Call` (the operation is poised on one instruction) or
:class:`Done` (the operation finished).  ``resume(state, response)`` feeds the
response of the last instruction back.  All machine states are plain tuples so
protocols can embed them in their hashable local state.

:func:`drive` runs a machine to completion directly against a :class:`Memory`,
which is how the objects are exercised outside the scheduler.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Any, Callable, NamedTuple, Sequence

from .errors import CounterBroken, DomainError, NotOwner, Timeout, TooManyAppenders
from .memory import ACK, BOTTOM, BUFFER_READ, INCREMENT, READ, Instr, Memory


class Call(NamedTuple):
    location: Any
    instr: Instr
    state: Any


class Done(NamedTuple):
    result: Any
    state: Any


def drive(memory: Memory, step: Call | Done, resume: Callable[[Any, Any], Call | Done]) -> Any:
    """Run a machine solo against ``memory``; return its result."""
    while isinstance(step, Call):
        step = resume(step.state, memory.apply(step.location, step.instr))
    return step.result


# ---------------------------------------------------------------------------
# double collect
# ---------------------------------------------------------------------------


class DoubleCollect:
    """Obstruction-free scan: collect until two consecutive collects agree.

    Valid when the scanned values never repeat (monotone contents or unique
    tags).  ``budget`` caps the number of collects; exceeding it raises
    :class:`Timeout`.
    """

    def __init__(self, locations: Sequence[int], instr: Instr = READ, budget: int | None = None) -> None:
        if not locations:
            raise ValueError("nothing to scan")
        self.locations = tuple(locations)
        self.instr = instr
        self.budget = budget

    # state: (previous collect or None, values of the current collect, collects started)
    def begin(self) -> Call:
        return Call(self.locations[0], self.instr, (None, (), 1))

    def resume(self, state: tuple, response: Any) -> Call | Done:
        prev, cur, collects = state
        cur = cur + (response,)
        locs = self.locations
        if len(cur) < len(locs):
            return Call(locs[len(cur)], self.instr, (prev, cur, collects))
        if cur == prev:
            return Done(cur, collects)
        if self.budget is not None and collects >= self.budget:
            raise Timeout(f"no two equal collects within {self.budget} collects")
        return Call(locs[0], self.instr, (cur, (), collects + 1))


def scan_double_collect(read_fn: Callable[[int], Any], locations: Sequence[int], step_budget: int) -> tuple:
    """Double-collect scan over ``read_fn``; ``step_budget`` counts collects.

    Returns the agreed values.  Solo, this performs exactly two collects.
    """
    dc = DoubleCollect(locations, READ, step_budget)
    step: Call | Done = dc.begin()
    while isinstance(step, Call):
        step = dc.resume(step.state, read_fn(step.location))
    return step.result


# ---------------------------------------------------------------------------
# history object on one l-buffer
# ---------------------------------------------------------------------------


def reconstruct_history(window: tuple) -> tuple:
    """Tagged history encoded by one buffer-read result.

    ``window`` holds ``(history, entry)`` pairs oldest first, left-padded with
    BOTTOM.  Ties for the longest embedded history go to the most recent slot.
    """
    if window[-1] is BOTTOM:
        return ()
    if window[0] is BOTTOM:
        return tuple(a[1] for a in window if a is not BOTTOM)
    entries = tuple(a[1] for a in window)
    longest = ()
    for h, _ in window:
        if len(h) >= len(longest):
            longest = h
    first = entries[0]
    for i, e in enumerate(longest):
        if e == first:
            return longest[:i] + entries
    return longest + entries


class HistoryObject:
    """History object (append / get-history) simulated on a single l-buffer.

    Appended entries are tagged ``(appender, seq, payload)`` so that no entry
    is ever appended twice.  At most ``capacity`` appender identities may
    register.
    """

    def __init__(self, location: int, capacity: int, appenders: Sequence[int] = ()) -> None:
        self.location = location
        self.capacity = capacity
        self.appenders: list[int] = []
        for a in appenders:
            self.register(a)

    def register(self, appender: int) -> None:
        if appender in self.appenders:
            return
        if len(self.appenders) >= self.capacity:
            raise TooManyAppenders(f"{self.capacity}-buffer already has appenders {self.appenders}")
        self.appenders.append(appender)

    def get_history(self) -> Call:
        return Call(self.location, BUFFER_READ, ("get",))

    def append(self, appender: int, seq: int, payload: Any) -> Call:
        if appender not in self.appenders:
            raise TooManyAppenders(f"process {appender} is not a registered appender")
        return Call(self.location, BUFFER_READ, ("append", (appender, seq, payload)))

    def resume(self, state: tuple, response: Any) -> Call | Done:
        kind = state[0]
        if kind == "get":
            return Done(reconstruct_history(response), None)
        if kind == "append":
            entry = state[1]
            h = reconstruct_history(response)
            return Call(self.location, Instr("buffer-write", (h, entry)), ("written",))
        return Done(ACK, None)


def payloads(history: tuple) -> tuple:
    return tuple(e[2] for e in history)


class SWRegisterArray:
    """``capacity`` single-writer registers living in one l-buffer.

    ``owners`` lists the owning process of each register slot; a write appends
    ``(slot, value)`` to the underlying history object.
    """

    def __init__(self, location: int, capacity: int, owners: Sequence[int], initial: Any = 0) -> None:
        if len(owners) > capacity:
            raise TooManyAppenders(f"{len(owners)} owners for a {capacity}-buffer")
        self.owners = tuple(owners)
        self.initial = initial
        self.history = HistoryObject(location, capacity, self.owners)

    def write(self, writer: int, slot: int, seq: int, value: Any) -> Call:
        if not 0 <= slot < len(self.owners) or self.owners[slot] != writer:
            raise NotOwner(f"process {writer} does not own register {slot}")
        return self.history.append(writer, seq, (slot, value))

    def read(self, slot: int) -> Call:
        return Call(self.history.location, BUFFER_READ, ("read", slot))

    def resume(self, state: tuple, response: Any) -> Call | Done:
        if state[0] == "read":
            return Done(self.value_in(reconstruct_history(response), state[1]), None)
        return self.history.resume(state, response)

    def value_in(self, history: tuple, slot: int) -> Any:
        for _, _, (s, v) in reversed(history):
            if s == slot:
                return v
        return self.initial


# ---------------------------------------------------------------------------
# m-component counters
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def nth_prime(k: int) -> int:
    """The (k+1)-st prime: nth_prime(0) == 2."""
    if k < 0:
        raise ValueError(k)
    if k == 0:
        return 2
    p = nth_prime(k - 1) + 1
    while any(p % d == 0 for d in range(2, int(p**0.5) + 1)):
        p += 1
    return p


class Counter:
    """Interface of an m-component counter used by the racing protocols.

    ``local`` is the per-process state the realization keeps between
    operations (``None`` when it keeps nothing).
    """

    name = "counter"
    bounded = False

    def __init__(self, n: int, m: int) -> None:
        self.n = n
        self.m = m

    locations: int = 1
    initial: Any = 0

    def initial_local(self, pid: int) -> Any:
        return None

    def increment(self, local: Any, pid: int, v: int) -> Call:
        raise NotImplementedError

    def decrement(self, local: Any, pid: int, v: int) -> Call:
        raise CounterBroken(f"{self.name} counter does not support decrement")

    def scan(self, local: Any, pid: int) -> Call:
        raise NotImplementedError

    def resume(self, state: tuple, response: Any) -> Call | Done:
        raise NotImplementedError

    def decode(self, value: Any) -> tuple:
        raise NotImplementedError


class PrimeCounter(Counter):
    """Component v is the exponent of the (v+1)-st prime in the stored value."""

    name = "prime-multiply"
    initial = 1

    def __init__(self, n: int, m: int) -> None:
        super().__init__(n, m)
        self.primes = tuple(nth_prime(v) for v in range(m))

    def increment(self, local, pid, v):
        return Call(0, Instr("multiply", self.primes[v]), ("inc", local))

    def scan(self, local, pid):
        return Call(0, READ, ("scan", local))

    def resume(self, state, response):
        if state[0] == "scan":
            return Done(self.decode(response), state[1])
        return Done(None, state[1])

    def decode(self, value: int) -> tuple:
        counts = []
        for p in self.primes:
            c = 0
            while value % p == 0:
                value //= p
                c += 1
            counts.append(c)
        return tuple(counts)


class BaseAddCounter(Counter):
    """Bounded counter: digit v (base 3n) of the stored value is component v."""

    name = "base-add"
    bounded = True
    initial = 0

    def __init__(self, n: int, m: int) -> None:
        super().__init__(n, m)
        self.base = 3 * n
        self.weights = tuple(self.base**v for v in range(m))

    def increment(self, local, pid, v):
        return Call(0, Instr("add", self.weights[v]), ("inc", local))

    def decrement(self, local, pid, v):
        return Call(0, Instr("add", -self.weights[v]), ("dec", local))

    def scan(self, local, pid):
        return Call(0, READ, ("scan", local))

    def resume(self, state, response):
        if state[0] == "scan":
            return Done(self.decode(response), state[1])
        return Done(None, state[1])

    def decode(self, value: int) -> tuple:
        digits = []
        for _ in range(self.m):
            value, d = divmod(value, self.base)
            digits.append(d)
        return tuple(digits)

    def check(self, before: int, instr: Instr) -> None:
        """Raise :class:`CounterBroken` if ``instr`` would push a digit out of range."""
        if instr.op != "add":
            return
        delta = instr.arg
        v = self.weights.index(abs(delta))
        digit = (before // self.weights[v]) % self.base
        if delta > 0 and digit == self.base - 1:
            raise CounterBroken(f"increment of component {v} at count {digit}")
        if delta < 0 and digit == 0:
            raise CounterBroken(f"decrement of component {v} at count 0")


class BitBlockCounter(Counter):
    """Counter in one set-bit location, split into blocks of n*n bits.

    Process i's b-th increment of component v sets bit ``b*n*n + v*n + i``;
    each process remembers how often it incremented each component.
    """

    name = "bit-blocks"
    initial = 0

    def __init__(self, n: int, m: int) -> None:
        if m > n:
            raise ValueError("bit-block counter needs m <= n")
        super().__init__(n, m)

    def initial_local(self, pid):
        return (0,) * self.m

    def bit(self, block: int, v: int, i: int) -> int:
        n = self.n
        return block * n * n + v * n + i

    def increment(self, local, pid, v):
        tally = list(local)
        b = tally[v]
        tally[v] += 1
        return Call(0, Instr("set-bit", self.bit(b, v, pid)), ("inc", tuple(tally)))

    def scan(self, local, pid):
        return Call(0, READ, ("scan", local))

    def resume(self, state, response):
        if state[0] == "scan":
            return Done(self.decode(response), state[1])
        return Done(None, state[1])

    def decode(self, value: int) -> tuple:
        n = self.n
        counts = [0] * self.m
        stride = n * n
        block = 0
        while value:
            chunk = value & ((1 << stride) - 1)
            for v in range(self.m):
                counts[v] += bin((chunk >> (v * n)) & ((1 << n) - 1)).count("1")
            value >>= stride
            block += 1
        return tuple(counts)


class IncrementPairCounter(Counter):
    """2-component counter on two read/increment locations, double-collect scan."""

    name = "increment-pair"
    initial = 0
    locations = 2

    def __init__(self, n: int, m: int = 2, budget: int | None = None) -> None:
        if m != 2:
            raise ValueError("increment-pair counter has exactly 2 components")
        super().__init__(n, m)
        self.collect = DoubleCollect((0, 1), READ, budget)

    def increment(self, local, pid, v):
        return Call(v, INCREMENT, ("inc", local))

    def scan(self, local, pid):
        c = self.collect.begin()
        return Call(c.location, c.instr, ("scan", local, c.state))

    def resume(self, state, response):
        if state[0] == "inc":
            return Done(None, state[1])
        r = self.collect.resume(state[2], response)
        if isinstance(r, Done):
            return Done(r.result, state[1])
        return Call(r.location, r.instr, ("scan", state[1], r.state))

    def decode(self, value):
        return tuple(value)


class SWRCounter(Counter):
    """n-component counter from n single-writer registers in ceil(n/l) l-buffers.

    Process p owns register slot ``p % l`` of buffer ``p // l`` and stores its
    own per-component increment tally there.  A scan double-collects all
    buffers and sums the latest tallies.
    """

    name = "swr"
    initial = BOTTOM

    def __init__(self, n: int, m: int, capacity: int, budget: int | None = None) -> None:
        super().__init__(n, m)
        self.capacity = capacity
        self.locations = -(-n // capacity)
        zero = (0,) * m
        self.arrays = tuple(
            SWRegisterArray(b, capacity, range(b * capacity, min(n, (b + 1) * capacity)), zero)
            for b in range(self.locations)
        )
        self.collect = DoubleCollect(range(self.locations), BUFFER_READ, budget)

    def initial_local(self, pid):
        # (tally, next sequence number)
        return ((0,) * self.m, 0)

    def increment(self, local, pid, v):
        tally, seq = local
        tally = tally[:v] + (tally[v] + 1,) + tally[v + 1 :]
        arr = self.arrays[pid // self.capacity]
        c = arr.write(pid, pid % self.capacity, seq, tally)
        return Call(c.location, c.instr, ("inc", (tally, seq + 1), pid, c.state))

    def scan(self, local, pid):
        c = self.collect.begin()
        return Call(c.location, c.instr, ("scan", local, c.state))

    def resume(self, state, response):
        if state[0] == "inc":
            _, local, pid, sub = state
            r = self.arrays[pid // self.capacity].resume(sub, response)
            if isinstance(r, Done):
                return Done(None, local)
            return Call(r.location, r.instr, ("inc", local, pid, r.state))
        r = self.collect.resume(state[2], response)
        if isinstance(r, Done):
            return Done(self.decode(r.result), state[1])
        return Call(r.location, r.instr, ("scan", state[1], r.state))

    def decode(self, windows: tuple) -> tuple:
        totals = [0] * self.m
        for arr, window in zip(self.arrays, windows):
            h = reconstruct_history(window)
            for slot in range(len(arr.owners)):
                for c, x in enumerate(arr.value_in(h, slot)):
                    totals[c] += x
        return tuple(totals)


COUNTERS = {
    "prime-multiply": PrimeCounter,
    "base-add": BaseAddCounter,
    "bit-blocks": BitBlockCounter,
    "increment-pair": IncrementPairCounter,
    "swr": SWRCounter,
}


# ---------------------------------------------------------------------------
# pair of max-registers over (round, value)
# ---------------------------------------------------------------------------


class MaxRegisterPair:
    """Encodes pairs (r, x), x < n, as ``(x+1) * y**r`` with y the least prime > n.

    The integer order then coincides with the lexicographic order on pairs.
    """

    def __init__(self, n: int, y: int | None = None) -> None:
        self.n = n
        if y is None:
            k = 0
            while nth_prime(k) <= n:
                k += 1
            y = nth_prime(k)
        if y <= n or any(y % d == 0 for d in range(2, int(y**0.5) + 1)):
            raise DomainError(f"y={y} must be a prime larger than n={n}")
        self.y = y

    def encode(self, r: int, x: int) -> int:
        if not 0 <= x < self.n or r < 0:
            raise DomainError(f"({r}, {x}) outside N x {{0..{self.n - 1}}}")
        return (x + 1) * self.y**r

    def decode(self, z: int) -> tuple[int, int]:
        if type(z) is not int or z < 1:
            raise DomainError(f"{z!r} is not an encoded pair")
        r = 0
        while z % self.y == 0:
            z //= self.y
            r += 1
        if z - 1 >= self.n:
            raise DomainError(f"{z - 1} is not a value below n={self.n}")
        return r, z - 1

