"""Atomic instruction semantics, uniform memories and system configurations.

Stored values are Python ints (unbounded), the :data:`BOTTOM` marker, or
tuples of values.  Every location of a :class:`Memory` supports the same
:class:`InstructionSet`; locations materialize lazily on first access.

Configuration images
--------------------
:func:`snapshot` produces a byte string of the form::

    CLAB-CONFIG 1 <sha256 hex of payload>\\n<payload>

where ``payload`` is canonical JSON (sorted keys, no whitespace) with keys
``iset``, ``capacity``, ``initial``, ``limit``, ``memory``, ``locals``,
``actions``, ``decided``, ``steps``.  Values are encoded as JSON integers,
lists (for tuples), strings, ``null``, ``{"bot":1}`` for :data:`BOTTOM` and
``{"ack":1}`` for :data:`ACK`.  ``memory`` is a list of ``[index, state]``
pairs sorted by index.  Decoding turns every list back into a tuple.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, NamedTuple

from .errors import IntegrityError, LocationOutOfRange, MalformedArgument, UnsupportedInstruction

IMAGE_MAGIC = b"CLAB-CONFIG"
IMAGE_VERSION = 1


class _Marker:
    __slots__ = ("name",)

    def __init__(self, name: str) -> None:
        self.name = name

    def __repr__(self) -> str:
        return self.name

    def __reduce__(self):
        return (_marker, (self.name,))


def _marker(name: str) -> _Marker:
    return BOTTOM if name == "BOTTOM" else ACK


BOTTOM = _Marker("BOTTOM")
ACK = _Marker("ACK")


class Instr(NamedTuple):
    op: str
    arg: Any = None

    def __str__(self) -> str:
        if self.arg is None:
            return f"{self.op}()"
        return f"{self.op}({encode_value(self.arg, compact=True)})"


READ = Instr("read")
WRITE1 = Instr("write1")
WRITE0 = Instr("write0")
INCREMENT = Instr("increment")
DECREMENT = Instr("decrement")
FETCH_AND_INCREMENT = Instr("fetch-and-increment")
TEST_AND_SET = Instr("test-and-set")
RESET = Instr("reset")
READ_MAX = Instr("read-max")
BUFFER_READ = Instr("buffer-read")

# op name -> whether it takes an argument
OPS = {
    "read": False,
    "write": True,
    "write1": False,
    "write0": False,
    "fetch-and-add": True,
    "fetch-and-increment": False,
    "increment": False,
    "add": True,
    "decrement": False,
    "multiply": True,
    "set-bit": True,
    "test-and-set": False,
    "reset": False,
    "swap": True,
    "read-max": False,
    "write-max": True,
    "buffer-read": False,
    "buffer-write": True,
    "multi-assign": True,
}


@dataclass(frozen=True)
class InstructionSet:
    name: str
    ops: frozenset
    capacity: int | None = None

    def __post_init__(self) -> None:
        unknown = set(self.ops) - set(OPS)
        if unknown:
            raise ValueError(f"unknown instructions {sorted(unknown)}")
        if self.is_buffer and (self.capacity is None or self.capacity < 1):
            raise ValueError("buffer instruction sets need a capacity >= 1")

    @property
    def is_buffer(self) -> bool:
        return "buffer-read" in self.ops or "buffer-write" in self.ops

    @property
    def is_max_register(self) -> bool:
        return "read-max" in self.ops or "write-max" in self.ops

    def __contains__(self, op: str) -> bool:
        return op in self.ops


def iset(name: str, *ops: str) -> InstructionSet:
    return InstructionSet(name, frozenset(ops))


def buffer_set(capacity: int, multi_assign: bool = False) -> InstructionSet:
    ops = {"buffer-read", "buffer-write"}
    name = f"B{capacity}"
    if multi_assign:
        ops.add("multi-assign")
        name += "+multi-assign"
    return InstructionSet(name, frozenset(ops), capacity)


FAA_TAS = iset("faa-tas", "fetch-and-add", "test-and-set")
DEC_MUL = iset("read-decrement-multiply", "read", "decrement", "multiply")
READ_MULTIPLY = iset("read-multiply", "read", "multiply")
READ_ADD = iset("read-add", "read", "add")
READ_SETBIT = iset("read-set-bit", "read", "set-bit")
MAX_REGISTER = iset("max-register", "read-max", "write-max")
READ_WRITE_INCREMENT = iset("read-write-increment", "read", "write", "increment")
READ_WRITE_FAI = iset("read-write-fetch-and-increment", "read", "write", "fetch-and-increment")
READ_SWAP = iset("read-swap", "read", "swap")
READ_WRITE = iset("read-write", "read", "write")
READ_WRITE1 = iset("read-write1", "read", "write1")
READ_TAS = iset("read-test-and-set", "read", "test-and-set")
READ_WRITE01 = iset("read-write1-write0", "read", "write1", "write0")
READ_TAS_RESET = iset("read-test-and-set-reset", "read", "test-and-set", "reset")


def _int(x: Any) -> int:
    if type(x) is not int:
        raise MalformedArgument(f"expected an integer, got {x!r}")
    return x


def _num(state: Any) -> int:
    if type(state) is not int:
        raise MalformedArgument(f"arithmetic on non-integer contents {state!r}")
    return state


def _window(history: tuple, capacity: int) -> tuple:
    tail = history[-capacity:]
    if len(tail) < capacity:
        return (BOTTOM,) * (capacity - len(tail)) + tail
    return tail


class Memory:
    """A lazily grown array of locations that all support one instruction set.

    ``cells`` maps a location index to its state: the stored value, the
    running maximum for max-registers, or the full tuple of written values
    for buffers.  ``limit`` (if given) bounds the addressable indices.
    """

    __slots__ = ("iset", "initial", "limit", "cells")

    def __init__(self, iset: InstructionSet, initial: Any = 0, limit: int | None = None) -> None:
        self.iset = iset
        self.initial = initial
        self.limit = limit
        self.cells: dict[int, Any] = {}

    def _fresh(self) -> Any:
        return () if self.iset.is_buffer else self.initial

    def state(self, location: int) -> Any:
        """Location state without touching it."""
        if location in self.cells:
            return self.cells[location]
        return self._fresh()

    def value(self, location: int) -> Any:
        """What a read would currently return, without touching the location."""
        st = self.state(location)
        if self.iset.is_buffer:
            return _window(st, self.iset.capacity)
        return st

    @property
    def touched(self) -> int:
        return len(self.cells)

    def copy(self) -> Memory:
        m = Memory.__new__(Memory)
        m.iset = self.iset
        m.initial = self.initial
        m.limit = self.limit
        m.cells = dict(self.cells)
        return m

    def _cell(self, location: Any) -> Any:
        if type(location) is not int or location < 0:
            raise MalformedArgument(f"bad location {location!r}")
        if self.limit is not None and location >= self.limit:
            raise LocationOutOfRange(f"location {location} >= declared {self.limit}")
        cells = self.cells
        if location not in cells:
            cells[location] = self._fresh()
        return cells[location]

    def apply(self, location: int | None, instr: Instr) -> Any:
        op = instr.op
        if op not in self.iset.ops:
            raise UnsupportedInstruction(f"{op} not in instruction set {self.iset.name}")
        if op == "multi-assign":
            return self._multi_assign(instr.arg)
        old = self._cell(location)
        new, response = _SEMANTICS[op](old, instr.arg, self.iset.capacity)
        self.cells[location] = new
        return response

    def _multi_assign(self, pairs: Any) -> Any:
        if not isinstance(pairs, tuple) or not pairs:
            raise MalformedArgument("multi-assign needs a non-empty tuple of (location, value) pairs")
        locs = [p[0] for p in pairs]
        if len(set(locs)) != len(locs):
            raise MalformedArgument("multi-assign location list contains duplicates")
        for loc in locs:
            self._cell(loc)
        for loc, x in pairs:
            self.cells[loc] = self.cells[loc] + (x,)
        return ACK


def _read(st, arg, cap):
    return st, st


def _write(st, arg, cap):
    return arg, ACK


def _write1(st, arg, cap):
    return 1, ACK


def _write0(st, arg, cap):
    return 0, ACK


def _faa(st, arg, cap):
    return _num(st) + _int(arg), st


def _fai(st, arg, cap):
    return _num(st) + 1, st


def _increment(st, arg, cap):
    return _num(st) + 1, ACK


def _add(st, arg, cap):
    return _num(st) + _int(arg), ACK


def _decrement(st, arg, cap):
    return _num(st) - 1, ACK


def _multiply(st, arg, cap):
    return _num(st) * _int(arg), ACK


def _set_bit(st, arg, cap):
    if _int(arg) < 0:
        raise MalformedArgument("set-bit index must be nonnegative")
    return _num(st) | (1 << arg), ACK


def _tas(st, arg, cap):
    return (1 if st == 0 else st), st


def _reset(st, arg, cap):
    return 0, ACK


def _swap(st, arg, cap):
    return arg, st


def _write_max(st, arg, cap):
    return (arg if st < arg else st), ACK


def _buffer_read(st, arg, cap):
    return st, _window(st, cap)


def _buffer_write(st, arg, cap):
    return st + (arg,), ACK


_SEMANTICS = {
    "read": _read,
    "write": _write,
    "write1": _write1,
    "write0": _write0,
    "fetch-and-add": _faa,
    "fetch-and-increment": _fai,
    "increment": _increment,
    "add": _add,
    "decrement": _decrement,
    "multiply": _multiply,
    "set-bit": _set_bit,
    "test-and-set": _tas,
    "reset": _reset,
    "swap": _swap,
    "read-max": _read,
    "write-max": _write_max,
    "buffer-read": _buffer_read,
    "buffer-write": _buffer_write,
}


def apply(memory: Memory, location: int | None, instr: Instr) -> Any:
    """Apply one atomic instruction and return its response."""
    return memory.apply(location, instr)


@dataclass
class Configuration:
    """Memory contents plus per-process local state, poised action and status.

    ``decided[p]`` is ``None`` while process ``p`` is running.
    """

    memory: Memory
    locals: list
    actions: list
    decided: list
    steps: int = 0

    def copy(self) -> Configuration:
        return Configuration(self.memory.copy(), list(self.locals), list(self.actions), list(self.decided), self.steps)

    def key(self) -> tuple:
        """Hashable canonical form (memoization key; ignores the step counter)."""
        return (
            tuple(sorted(self.memory.cells.items())),
            tuple(self.locals),
            tuple(self.actions),
            tuple(self.decided),
        )

    def running(self) -> list[int]:
        return [p for p, d in enumerate(self.decided) if d is None]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.key() == other.key() and self.steps == other.steps and self.memory.iset == other.memory.iset


# ---------------------------------------------------------------------------
# canonical value encoding
# ---------------------------------------------------------------------------


def encode_value(v: Any, compact: bool = False) -> Any:
    """JSON-ready form of a value; ``compact`` returns a JSON string instead."""
    enc = _enc(v)
    if compact:
        return json.dumps(enc, separators=(",", ":"), sort_keys=True)
    return enc


def _enc(v: Any) -> Any:
    if v is None or type(v) in (int, str, bool):
        return v
    if v is BOTTOM:
        return {"bot": 1}
    if v is ACK:
        return {"ack": 1}
    if isinstance(v, tuple):
        if isinstance(v, Instr):
            return {"op": v.op, "arg": _enc(v.arg)}
        return [_enc(x) for x in v]
    raise TypeError(f"cannot encode {v!r}")


def decode_value(obj: Any) -> Any:
    if isinstance(obj, list):
        return tuple(decode_value(x) for x in obj)
    if isinstance(obj, dict):
        if obj == {"bot": 1}:
            return BOTTOM
        if obj == {"ack": 1}:
            return ACK
        if set(obj) == {"op", "arg"}:
            return Instr(obj["op"], decode_value(obj["arg"]))
        raise IntegrityError(f"unknown tagged value {obj!r}")
    return obj


def _dumps(obj: Any) -> bytes:
    return json.dumps(obj, separators=(",", ":"), sort_keys=True).encode()


def snapshot(config: Configuration) -> bytes:
    """Serialize a configuration to the canonical, checksummed image."""
    mem = config.memory
    iset = mem.iset
    payload = _dumps(
        {
            "iset": [iset.name, sorted(iset.ops)],
            "capacity": iset.capacity,
            "initial": _enc(mem.initial),
            "limit": mem.limit,
            "memory": [[i, _enc(s)] for i, s in sorted(mem.cells.items())],
            "locals": [_enc(s) for s in config.locals],
            "actions": [_enc(a) for a in config.actions],
            "decided": [_enc(d) for d in config.decided],
            "steps": config.steps,
        }
    )
    digest = hashlib.sha256(payload).hexdigest().encode()
    return IMAGE_MAGIC + b" %d " % IMAGE_VERSION + digest + b"\n" + payload


def restore(image: bytes) -> Configuration:
    """Inverse of :func:`snapshot`; raises :class:`IntegrityError` on any damage."""
    try:
        header, payload = image.split(b"\n", 1)
        magic, version, digest = header.split(b" ")
    except ValueError as exc:
        raise IntegrityError("malformed image header") from exc
    if magic != IMAGE_MAGIC or version != b"%d" % IMAGE_VERSION:
        raise IntegrityError("unknown image format or version")
    if hashlib.sha256(payload).hexdigest().encode() != digest:
        raise IntegrityError("image checksum mismatch")
    try:
        doc = json.loads(payload)
        name, ops = doc["iset"]
        iset = InstructionSet(name, frozenset(ops), doc["capacity"])
        mem = Memory(iset, decode_value(doc["initial"]), doc["limit"])
        mem.cells = {int(i): decode_value(s) for i, s in doc["memory"]}
        return Configuration(
            mem,
            [decode_value(s) for s in doc["locals"]],
            [decode_value(a) for a in doc["actions"]],
            [decode_value(d) for d in doc["decided"]],
            doc["steps"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise IntegrityError(f"malformed image payload: {exc}") from exc
