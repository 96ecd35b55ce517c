"""Schedulers, execution engine and property checkers."""

from .engine import (
    AGREEMENT,
    BUDGET,
    DEFAULT_BUDGET,
    INCONCLUSIVE,
    OK,
    PROTOCOL_ERROR,
    SOLO_EXCEEDED,
    VALIDITY,
    VIOLATIONS,
    Schedule,
    Step,
    Trace,
    Verdict,
    advance,
    initial_configuration,
    run,
)
from .explore import explore, explore_all, naive_keys
from .rng import SchedulerRNG
from .engine import FastRunner
from .linearizability import HISTORY_SPEC, LinResult, Op, SequentialSpec, check_linearizable
from .space import formula, measure_space, space_row
from .sweep import parallel_sweep, sweep
