"""Exception hierarchy shared by every layer of the simulator."""

from __future__ import annotations


class ConsensusLabError(Exception):
    """Base class for all simulator errors."""


class UnsupportedInstruction(ConsensusLabError):
    """An instruction outside the memory's instruction set was applied."""


class MalformedArgument(ConsensusLabError):
    """An instruction argument violates the instruction's domain."""


class LocationOutOfRange(ConsensusLabError):
    """A protocol addressed a location beyond its declared location count."""


class IntegrityError(ConsensusLabError):
    """A serialized configuration image failed its checksum or schema."""


class TooManyAppenders(ConsensusLabError):
    pass


class NotOwner(ConsensusLabError):
    pass


class CounterBroken(ConsensusLabError):
    """A bounded counter digit would leave its allowed range."""


class Timeout(ConsensusLabError):
    """A double-collect scan exhausted its collect budget."""


class DomainError(ConsensusLabError):
    pass


class ZeroRead(ConsensusLabError):
    pass


class MissingRecordedValue(ConsensusLabError):
    pass


class SearchTooLarge(ConsensusLabError):
    pass


class ReplayDivergence(ConsensusLabError):
    """A replayed schedule produced a response different from the recorded one."""
