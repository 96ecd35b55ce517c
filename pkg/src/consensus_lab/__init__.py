"""Deterministic shared-memory simulator for obstruction-free consensus.

Subpackages: :mod:`consensus_lab.memory` (instructions, memory,
configurations), :mod:`consensus_lab.objects` (simulated objects),
:mod:`consensus_lab.protocols` (consensus protocols and registry) and
:mod:`consensus_lab.harness` (schedulers, exploration, checkers).
"""

from .memory import Configuration, Instr, InstructionSet, Memory, apply, restore, snapshot
from .protocols import REGISTRY, make

__version__ = "0.1.0"

__all__ = ["Configuration", "Instr", "InstructionSet", "Memory", "REGISTRY", "apply", "make", "restore", "snapshot"]
