"""Consensus protocols and the name -> factory registry used by the CLI."""

from __future__ import annotations

from typing import Callable

from ..memory import READ, READ_WRITE
from .base import Decide, Protocol, SoloBudget, ceil_log2
from .bitwise import BitByBit, BitRace, increment_logn, tas_reset_nlogn
from .intro import DecMul, FaaTas
from .maxreg import MaxRegisterConsensus
from .racing import (
    BoundedRacing,
    RacingCounters,
    buffer_consensus,
    racing_add_bounded,
    racing_increment_pair,
    racing_multiply,
    racing_setbit,
)
from .swap import SwapConsensus
from .tracks import TasTracks


class BrokenSample(Protocol):
    """Deliberately wrong: read location 0, then decide the own input."""

    name = "broken"
    iset = READ_WRITE
    locations = 1
    initial = 0

    def __init__(self, n: int) -> None:
        self.n = n
        self.m = n

    def start(self, pid, value):
        return (value,), (0, READ)

    def step(self, state, response):
        return state, Decide(state[0])


def intro_faa_tas(n: int) -> FaaTas:
    return FaaTas(n)


def intro_dec_mul(n: int, strict: bool = False) -> DecMul:
    return DecMul(n, strict)


def max_register_consensus(n: int) -> MaxRegisterConsensus:
    return MaxRegisterConsensus(n)


def swap_consensus(n: int) -> SwapConsensus:
    return SwapConsensus(n)


def tas_tracks(n: int, variant: str = "write1") -> TasTracks:
    return TasTracks(n, variant)


# name -> (factory(n, l, variant), needs l, variants)
REGISTRY: dict[str, tuple[Callable[..., Protocol], bool, tuple[str, ...]]] = {
    "faa-tas": (lambda n, l=None, variant=None: FaaTas(n), False, ()),
    "dec-mul": (lambda n, l=None, variant=None: DecMul(n), False, ()),
    "racing-multiply": (lambda n, l=None, variant=None: racing_multiply(n), False, ()),
    "racing-add-bounded": (lambda n, l=None, variant=None: racing_add_bounded(n), False, ()),
    "racing-setbit": (lambda n, l=None, variant=None: racing_setbit(n), False, ()),
    "maxreg": (lambda n, l=None, variant=None: MaxRegisterConsensus(n), False, ()),
    "increment-logn": (lambda n, l=None, variant=None: increment_logn(n), False, ()),
    "buffer": (lambda n, l=None, variant=None: buffer_consensus(n, l or 2), True, ()),
    "swap": (lambda n, l=None, variant=None: SwapConsensus(n), False, ()),
    "tas-tracks": (lambda n, l=None, variant=None: TasTracks(n, variant or "write1"), False, ("write1", "test-and-set")),
    "tas-reset": (lambda n, l=None, variant=None: tas_reset_nlogn(n, variant or "tas-reset"), False, ("tas-reset", "write01")),
    "broken": (lambda n, l=None, variant=None: BrokenSample(n), False, ()),
}


def make(name: str, n: int, l: int | None = None, variant: str | None = None) -> Protocol:
    """Build a registered protocol; raises KeyError for unknown names."""
    factory, _, variants = REGISTRY[name]
    if n < 2:
        raise ValueError("need n >= 2")
    if variant is not None and variant not in variants:
        raise ValueError(f"{name} has no variant {variant!r} (choose from {list(variants) or 'none'})")
    if l is not None and l < 1:
        raise ValueError("l must be >= 1")
    return factory(n, l, variant)


__all__ = [
    "REGISTRY",
    "BitByBit",
    "BitRace",
    "BoundedRacing",
    "BrokenSample",
    "Decide",
    "DecMul",
    "FaaTas",
    "MaxRegisterConsensus",
    "Protocol",
    "RacingCounters",
    "SoloBudget",
    "SwapConsensus",
    "TasTracks",
    "buffer_consensus",
    "ceil_log2",
    "increment_logn",
    "intro_dec_mul",
    "intro_faa_tas",
    "make",
    "max_register_consensus",
    "racing_add_bounded",
    "racing_increment_pair",
    "racing_multiply",
    "racing_setbit",
    "swap_consensus",
    "tas_reset_nlogn",
    "tas_tracks",
]
