import itertools

import pytest

from consensus_lab.errors import IntegrityError, LocationOutOfRange, MalformedArgument, UnsupportedInstruction
from consensus_lab.harness import Schedule, advance, initial_configuration, run
from consensus_lab.memory import (
    ACK,
    BOTTOM,
    BUFFER_READ,
    DEC_MUL,
    FAA_TAS,
    MAX_REGISTER,
    READ,
    READ_MAX,
    READ_SWAP,
    READ_TAS_RESET,
    READ_WRITE01,
    RESET,
    TEST_AND_SET,
    WRITE0,
    WRITE1,
    Instr,
    InstructionSet,
    Memory,
    apply,
    buffer_set,
    decode_value,
    encode_value,
    iset,
    restore,
    snapshot,
)
from consensus_lab.protocols import make


def test_test_and_set_on_zero_sets_one():
    mem = Memory(FAA_TAS, 0)
    assert apply(mem, 0, TEST_AND_SET) == 0
    assert mem.value(0) == 1


def test_test_and_set_leaves_other_values():
    mem = Memory(iset("t", "test-and-set", "add", "read"), 0)
    mem.apply(0, Instr("add", 5))
    assert mem.apply(0, TEST_AND_SET) == 5
    assert mem.value(0) == 5


def test_fetch_and_add_two():
    mem = Memory(FAA_TAS, 0)
    assert apply(mem, 0, Instr("fetch-and-add", 2)) == 0
    assert mem.value(0) == 2


def test_buffer_read_pads_with_bottom():
    mem = Memory(buffer_set(3))
    mem.apply(0, Instr("buffer-write", 7))
    assert mem.apply(0, BUFFER_READ) == (BOTTOM, BOTTOM, 7)


def test_write_max_keeps_larger_value():
    mem = Memory(MAX_REGISTER, 0)
    mem.apply(0, Instr("write-max", 5))
    assert mem.apply(0, Instr("write-max", 3)) is ACK
    assert mem.apply(0, READ_MAX) == 5


def test_multiply():
    mem = Memory(DEC_MUL, 12)
    assert mem.apply(0, Instr("multiply", 5)) is ACK
    assert mem.value(0) == 60


def test_decrement_and_negative_values():
    mem = Memory(DEC_MUL, 1)
    mem.apply(0, Instr("decrement"))
    mem.apply(0, Instr("decrement"))
    assert mem.apply(0, READ) == -1


def test_swap_returns_previous():
    mem = Memory(READ_SWAP, "init")
    assert mem.apply(0, Instr("swap", "a")) == "init"
    assert mem.apply(0, Instr("swap", "b")) == "a"


def test_write0_write1_reset():
    mem = Memory(READ_WRITE01, 0)
    mem.apply(2, WRITE1)
    assert mem.value(2) == 1
    mem.apply(2, WRITE0)
    assert mem.value(2) == 0
    mem = Memory(READ_TAS_RESET, 0)
    mem.apply(0, TEST_AND_SET)
    mem.apply(0, RESET)
    assert mem.value(0) == 0


def test_set_bit():
    mem = Memory(iset("sb", "read", "set-bit"), 0)
    mem.apply(0, Instr("set-bit", 3))
    mem.apply(0, Instr("set-bit", 0))
    assert mem.apply(0, READ) == 0b1001
    with pytest.raises(MalformedArgument):
        mem.apply(0, Instr("set-bit", -1))


def test_unsupported_instruction():
    mem = Memory(READ_SWAP, 0)
    with pytest.raises(UnsupportedInstruction):
        mem.apply(0, TEST_AND_SET)


def test_location_limit():
    mem = Memory(READ_SWAP, 0, limit=2)
    mem.apply(1, READ)
    with pytest.raises(LocationOutOfRange):
        mem.apply(2, READ)


def test_multi_assign_rejects_duplicates():
    mem = Memory(buffer_set(2, multi_assign=True))
    with pytest.raises(MalformedArgument):
        mem.apply(None, Instr("multi-assign", ((0, "a"), (0, "b"))))


def test_multi_assign_is_atomic():
    mem = Memory(buffer_set(2, multi_assign=True))
    before = (mem.value(0), mem.value(1))
    mem.apply(None, Instr("multi-assign", ((0, "a"), (1, "b"))))
    after = (mem.apply(0, BUFFER_READ), mem.apply(1, BUFFER_READ))
    assert before == ((BOTTOM, BOTTOM), (BOTTOM, BOTTOM))
    assert after == ((BOTTOM, "a"), (BOTTOM, "b"))
    assert mem.touched == 2


def test_buffer_instruction_set_needs_capacity():
    with pytest.raises(ValueError):
        InstructionSet("bad", frozenset({"buffer-read"}), None)


@pytest.mark.parametrize("capacity", [1, 2, 3, 4])
def test_buffer_semantics_against_slicing_oracle(capacity):
    for k in range(2 * capacity + 2):
        mem = Memory(buffer_set(capacity))
        writes = list(range(100, 100 + k))
        for w in writes:
            mem.apply(0, Instr("buffer-write", w))
        tail = writes[-capacity:] if writes else []
        expected = tuple([BOTTOM] * (capacity - len(tail)) + tail)
        assert mem.apply(0, BUFFER_READ) == expected


def test_max_register_reads_never_decrease():
    mem = Memory(MAX_REGISTER, 0)
    last = 0
    for x in [3, 1, 4, 1, 5, 9, 2, 6, 5, 3]:
        mem.apply(0, Instr("write-max", x))
        r = mem.apply(0, READ_MAX)
        assert r >= last
        last = r
    assert last == 9


def test_touched_count_is_distinct_locations_and_monotone():
    mem = Memory(READ_SWAP, 0)
    seen = set()
    last = 0
    for loc in [0, 3, 3, 1, 0, 7, 1]:
        mem.apply(loc, READ)
        seen.add(loc)
        assert mem.touched == len(seen) >= last
        last = mem.touched


def test_value_does_not_touch():
    mem = Memory(READ_SWAP, 0)
    assert mem.value(5) == 0
    assert mem.touched == 0


def test_value_encoding_round_trip():
    for v in [0, -3, 10**40, BOTTOM, ACK, (1, (BOTTOM, 2), ()), Instr("swap", (1, 2)), "x", None]:
        assert decode_value(encode_value(v)) == v


def _some_configs():
    for name, n in [("swap", 3), ("buffer", 3), ("maxreg", 2), ("tas-reset", 4), ("racing-multiply", 3)]:
        p = make(name, n)
        inputs = [i % p.m for i in range(n)]
        c = initial_configuration(p, inputs)
        yield p, c
        for k in range(12):
            if c.decided[k % n] is None:
                advance(p, c, k % n)
        yield p, c


def test_snapshot_restore_round_trip():
    for _, c in _some_configs():
        image = snapshot(c)
        back = restore(image)
        assert back == c
        assert snapshot(back) == image


def test_restore_then_same_steps_gives_same_trace():
    p = make("swap", 3)
    c = initial_configuration(p, (2, 0, 1))
    image = snapshot(c)
    order = [0, 1, 2, 2, 1]
    a = [advance(p, c, q) for q in order]
    c2 = restore(image)
    b = [advance(p, c2, q) for q in order]
    assert a == b
    assert c == c2


def test_restore_detects_corruption():
    _, c = next(_some_configs())
    image = snapshot(c)
    damaged = image[:-3] + bytes([image[-3] ^ 1]) + image[-2:]
    with pytest.raises(IntegrityError):
        restore(damaged)
    with pytest.raises(IntegrityError):
        restore(b"garbage")
    with pytest.raises(IntegrityError):
        restore(image.replace(b" 1 ", b" 9 ", 1))


def test_configuration_copy_is_independent():
    p = make("swap", 3)
    c = initial_configuration(p, (0, 1, 2))
    d = c.copy()
    advance(p, d, 0)
    assert c != d
    assert c.memory.touched == 0


def test_apply_is_deterministic():
    for ops in itertools.product([READ, Instr("swap", 1), Instr("swap", 2)], repeat=3):
        results = []
        for _ in range(2):
            mem = Memory(READ_SWAP, 0)
            results.append([mem.apply(0, op) for op in ops])
        assert results[0] == results[1]


def test_decided_process_gets_no_steps():
    p = make("faa-tas", 3)
    verdict, trace = run(p, (0, 1, 0), Schedule.round_robin())
    assert verdict.ok
    pids = trace.schedule
    assert sorted(pids) == [0, 1, 2]
