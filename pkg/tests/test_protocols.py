import itertools

import pytest

from consensus_lab.errors import ZeroRead
from consensus_lab.harness import OK, PROTOCOL_ERROR, Schedule, advance, explore, initial_configuration, run
from consensus_lab.memory import Instr
from consensus_lab.objects import MaxRegisterPair
from consensus_lab.protocols import (
    REGISTRY,
    BitByBit,
    BitRace,
    Decide,
    DecMul,
    FaaTas,
    ceil_log2,
    increment_logn,
    make,
    racing_increment_pair,
    tas_reset_nlogn,
)
from consensus_lab.protocols.base import SoloBudget

NAMES = [k for k in REGISTRY if k != "broken"]


def small(name):
    return make(name, 3, 2 if name == "buffer" else None)


# --------------------------------------------------------------------------- registry


def test_registry_names():
    assert set(NAMES) == {
        "faa-tas", "dec-mul", "racing-multiply", "racing-add-bounded", "racing-setbit",
        "maxreg", "increment-logn", "buffer", "swap", "tas-tracks", "tas-reset",
    }


def test_make_rejects_bad_parameters():
    with pytest.raises(KeyError):
        make("nope", 3)
    with pytest.raises(ValueError):
        make("swap", 1)
    with pytest.raises(ValueError):
        make("swap", 3, variant="x")
    with pytest.raises(ValueError):
        make("buffer", 3, 0)


@pytest.mark.parametrize("name", NAMES)
def test_solo_run_decides_own_input(name):
    p = small(name)
    for v in range(p.m):
        inputs = [(v + 1) % p.m] * p.n
        inputs[0] = v
        verdict, trace = run(p, inputs, Schedule.solo(0))
        assert verdict.ok, verdict.message
        assert verdict.stats["decided"][0] == v


@pytest.mark.parametrize("name", NAMES)
def test_all_equal_inputs_decide_that_value(name):
    p = small(name)
    for v in range(p.m):
        for seed in range(5):
            verdict, _ = run(p, [v] * p.n, Schedule.random(seed, 20_000))
            assert verdict.outcome == OK
            assert set(verdict.stats["decided"]) <= {v, None}


@pytest.mark.parametrize("name", NAMES)
def test_emitted_instructions_are_in_the_declared_set(name):
    p = small(name)
    for seed in range(5):
        inputs = [i % p.m for i in range(p.n)]
        _, trace = run(p, inputs, Schedule.random(seed, 5000))
        for s in trace.steps:
            assert s.instr.op in p.iset.ops
            if p.locations is not None:
                assert 0 <= s.location < p.locations


@pytest.mark.parametrize("name", NAMES)
def test_transitions_are_pure(name):
    p = small(name)
    inputs = [i % p.m for i in range(p.n)]
    a = run(p, inputs, Schedule.random(3, 3000))[1]
    b = run(p, inputs, Schedule.random(3, 3000))[1]
    assert a.dumps() == b.dumps()


# --------------------------------------------------------------------------- intro protocols


def test_faa_tas_rules():
    p = FaaTas(3)
    assert p.step((1,), 0) == ((1,), Decide(1))
    assert p.step((1,), 2) == ((1,), Decide(0))
    assert p.step((0,), 3) == ((0,), Decide(1))
    assert p.step((0,), 0) == ((0,), Decide(0))


def test_faa_tas_exhaustive_n3():
    p = make("faa-tas", 3)
    for vec in itertools.product(range(2), repeat=3):
        assert explore(p, vec, 6).ok


def test_dec_mul_all_ones_reaches_27():
    p = make("dec-mul", 3)
    c = initial_configuration(p, (1, 1, 1))
    for q in range(3):
        advance(p, c, q)
    assert c.memory.value(0) == 27


def test_dec_mul_all_zeros_reaches_minus_two():
    p = make("dec-mul", 3)
    c = initial_configuration(p, (0, 0, 0))
    for q in range(3):
        advance(p, c, q)
    assert c.memory.value(0) == -2


def test_dec_mul_zero_read_is_reachable_and_handled():
    # a decrement first and a lone read by the same process sees exactly 0
    strict = DecMul(3, strict=True)
    verdict, _ = run(strict, (0, 1, 1), Schedule.replay([0, 0]))
    assert verdict.outcome == PROTOCOL_ERROR
    assert "ZeroRead" in verdict.message
    with pytest.raises(ZeroRead):
        strict.step(("read",), 0)
    verdict, _ = run(DecMul(3), (0, 1, 1), Schedule.replay([0, 0]))
    assert verdict.ok and verdict.stats["decided"][0] == 0


def test_dec_mul_exhaustive_n3():
    p = make("dec-mul", 3)
    for vec in itertools.product(range(2), repeat=3):
        assert explore(p, vec, 6).ok


# --------------------------------------------------------------------------- racing


@pytest.mark.parametrize("name", ["racing-multiply", "racing-add-bounded", "racing-setbit"])
def test_racing_solo_uses_n_increments(name):
    for n in (2, 3, 4):
        p = make(name, n)
        inputs = [1] + [0] * (n - 1)
        verdict, trace = run(p, inputs, Schedule.solo(0))
        assert verdict.stats["decided"][0] == 1
        assert verdict.stats["scans"] == n


def test_racing_multiply_n2_exhaustive():
    p = make("racing-multiply", 2)
    for vec in itertools.product(range(2), repeat=2):
        assert explore(p, vec, 24).ok


def test_bounded_racing_never_breaks():
    p = make("racing-add-bounded", 3)
    for seed in range(300):
        inputs = (seed % 3, (seed + 1) % 3, (seed // 3) % 3)
        verdict, _ = run(p, inputs, Schedule.random(seed, 10_000))
        assert verdict.outcome in (OK, "budget-exhausted"), verdict.message


# --------------------------------------------------------------------------- max-register


def test_maxreg_solo_trace_matches_hand_simulation():
    p = make("maxreg", 4)
    pair = MaxRegisterPair(4)
    verdict, trace = run(p, (2, 0, 0, 0), Schedule.solo(0))
    writes = [(s.location, pair.decode(s.instr.arg)) for s in trace.steps if s.instr.op == "write-max"]
    # write (0,2) to m1; m2 lags -> copy; equal -> promote m1; then decide
    assert writes == [(0, (0, 2)), (1, (0, 2)), (0, (1, 2))]
    assert trace.steps[-1].decided == 2
    assert verdict.stats["touched"] == 2


def test_maxreg_n2_exhaustive_depth_30():
    p = make("maxreg", 2)
    for vec in itertools.product(range(2), repeat=2):
        assert explore(p, vec, 30).ok


# --------------------------------------------------------------------------- bit-by-bit


def test_bit_by_bit_location_counts():
    p = increment_logn(4)
    assert p.c == 2
    assert p.locations == 6 == (2 + 2) * ceil_log2(4) - 2
    assert increment_logn(2).locations == 2  # a single binary instance
    for n in (2, 4, 8):
        assert tas_reset_nlogn(n).locations == 4 * n * ceil_log2(n) - 2 * n


def test_bit_by_bit_n2_is_the_binary_instance():
    p = BitByBit(lambda: racing_increment_pair(2), 2, racing_increment_pair(2).iset)
    assert p.rounds == 1 and p.locations == p.c


def test_bit_by_bit_rejects_non_binary_base():
    with pytest.raises(ValueError):
        BitByBit(lambda: make("swap", 3), 4, make("swap", 3).iset)


def test_increment_logn_n4_sweep():
    p = make("increment-logn", 4)
    for seed in range(500):
        inputs = tuple((seed * 7 + k) % 4 for k in range(4))
        verdict, _ = run(p, inputs, Schedule.random(seed, 10_000))
        assert verdict.outcome in (OK, "budget-exhausted"), verdict.message


def test_increment_logn_n4_small_depth_exhaustive():
    p = make("increment-logn", 4)
    assert explore(p, (0, 1, 2, 3), 8).ok


def test_bit_race_solo_writes_one_track():
    for variant in ("write01", "tas-reset"):
        p = BitRace(3, variant)
        verdict, trace = run(p, (1, 0, 0), Schedule.solo(0))
        assert verdict.stats["decided"][0] == 1
        written = sorted(s.location for s in trace.steps if s.instr.op != "read")
        assert written == [3, 4, 5]


@pytest.mark.parametrize("variant", ["tas-reset", "write01"])
def test_tas_reset_n4_sweep(variant):
    p = make("tas-reset", 4, variant=variant)
    for seed in range(200):
        inputs = tuple((seed + k) % 4 for k in range(4))
        verdict, _ = run(p, inputs, Schedule.random(seed, 10_000))
        assert verdict.outcome in (OK, "budget-exhausted"), verdict.message
        assert verdict.stats["touched"] <= p.locations


# --------------------------------------------------------------------------- tracks


@pytest.mark.parametrize("variant", ["write1", "test-and-set"])
def test_tas_tracks_solo_sets_two_bits_on_own_track(variant):
    p = make("tas-tracks", 3, variant=variant)
    for v in range(3):
        verdict, trace = run(p, [v, (v + 1) % 3, (v + 2) % 3], Schedule.solo(0))
        sets = [s.location for s in trace.steps if s.instr.op != "read"]
        assert sets == [p.loc(v, 0), p.loc(v, 1)]
        assert verdict.stats["decided"][0] == v


def test_tas_tracks_sweep_n3():
    p = make("tas-tracks", 3)
    for seed in range(300):
        verdict, _ = run(p, (0, 1, 2), Schedule.random(seed, 10_000))
        assert verdict.outcome in (OK, "budget-exhausted"), verdict.message


# --------------------------------------------------------------------------- swap


@pytest.mark.parametrize("n", range(2, 9))
def test_swap_solo_scan_bound(n):
    p = make("swap", n)
    for x in range(n):
        inputs = [(x + 1) % n] * n
        inputs[0] = x
        verdict, _ = run(p, inputs, Schedule.solo(0))
        assert verdict.ok
        assert verdict.stats["decided"][0] == x
        assert verdict.stats["scans"] <= 3 * n - 2


def test_swap_n2_example():
    verdict, _ = run(make("swap", 2), (1, 0), Schedule.solo(0))
    assert verdict.stats["decided"] == [1, None]
    assert verdict.stats["scans"] <= 4


def test_swap_uses_n_minus_one_locations():
    p = make("swap", 4)
    assert p.locations == 3
    assert p.solo_budget() == SoloBudget(p.solo_budget().steps, 10)


def _strip_tag(action):
    if isinstance(action, Decide):
        return action
    loc, instr = action
    if instr.op == "swap":
        return loc, Instr("swap", instr.arg[2])
    return action


def test_swap_anonymity():
    p = make("swap", 3)
    for seed in range(30):
        _, trace = run(p, (1, 1, 0), Schedule.random(seed, 400))
        # feed process 0's responses to a twin with another id
        a_state, a_act = p.start(0, 1)
        b_state, b_act = p.start(1, 1)
        assert _strip_tag(a_act) == _strip_tag(b_act)
        for s in trace.steps:
            if s.pid != 0:
                continue
            a_state, a_act = p.step(a_state, s.response)
            b_state, b_act = p.step(b_state, s.response)
            assert _strip_tag(a_act) == _strip_tag(b_act)
            if isinstance(a_act, Decide):
                break


def test_swap_lap_monotonicity():
    p = make("swap", 3)
    for seed in range(100):
        c = initial_configuration(p, (seed % 3, (seed + 1) % 3, 2))
        last = [p.laps(s) for s in c.locals]
        _, trace = run(p, (seed % 3, (seed + 1) % 3, 2), Schedule.random(seed, 2000))
        for s in trace.steps:
            advance(p, c, s.pid)
            now = p.laps(c.locals[s.pid])
            assert all(x >= y for x, y in zip(now, last[s.pid]))
            last[s.pid] = now


def test_swap_n3_exhaustive_small_depth():
    p = make("swap", 3)
    assert explore(p, (0, 1, 2), 10).ok
