"""In-order scalar core executing one instruction per cycle.

The core fetches from its tile's local memory and issues data accesses
through a memory port supplied by the tile. A port may answer STALL, in
which case the instruction retires in a later cycle and nothing advances;
it may answer FAULT, which halts the core and records the fault.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import List, Optional

from .isa import (
    NUM_REGS,
    OP_ADD,
    OP_ADDI,
    OP_BEQ,
    OP_BNE,
    OP_HALT,
    OP_JMP,
    OP_LI,
    OP_LW,
    OP_NOP,
    OP_SUB,
    OP_SW,
    WORD_MASK,
    decode,
)


class AccessStatus(IntEnum):
    OK = 0
    STALL = 1
    FAULT = 2


class FaultKind(IntEnum):
    MEMORY_FAULT = 1
    ILLEGAL_INSTRUCTION = 2


class MemoryPort:
    """Data access interface the tile hands to its core."""

    def load(self, addr: int) -> tuple:
        raise NotImplementedError

    def store(self, addr: int, value: int) -> AccessStatus:
        raise NotImplementedError


class LocalMemoryPort(MemoryPort):
    """Plain word-addressed access to one backing memory, for tests."""

    def __init__(self, words: List[int]):
        self.words = words

    def load(self, addr: int) -> tuple:
        idx = addr >> 2
        if addr % 4 or idx >= len(self.words):
            return AccessStatus.FAULT, 0
        return AccessStatus.OK, self.words[idx]

    def store(self, addr: int, value: int) -> AccessStatus:
        idx = addr >> 2
        if addr % 4 or idx >= len(self.words):
            return AccessStatus.FAULT
        self.words[idx] = value & WORD_MASK
        return AccessStatus.OK


@dataclass
class Fault:
    kind: FaultKind
    pc: int
    addr: int = 0


class Core:
    def __init__(self, memory: List[int], port: MemoryPort, pc: int = 0):
        self.regs: List[int] = [0] * NUM_REGS
        self.pc = pc
        self.memory = memory  # instruction fetch source, word granular
        self.port = port
        self.halted = False
        self.fault: Optional[Fault] = None
        self.retired = 0

    def _write(self, rd: int, value: int) -> None:
        if rd != 0:
            self.regs[rd] = value & WORD_MASK

    def _fault(self, kind: FaultKind, addr: int = 0) -> None:
        self.fault = Fault(kind, self.pc, addr)
        self.halted = True

    def step(self) -> Optional[int]:
        """Execute one instruction; returns the retired pc, or None when the
        core is halted or stalled waiting on its memory port."""
        if self.halted:
            return None
        idx = self.pc >> 2
        if self.pc % 4 or idx >= len(self.memory):
            self._fault(FaultKind.MEMORY_FAULT, self.pc)
            return None
        op, rd, ra, rb, imm = decode(self.memory[idx])
        regs = self.regs
        next_pc = self.pc + 4

        if op == OP_NOP:
            pass
        elif op == OP_HALT:
            self.halted = True
        elif op == OP_LI:
            self._write(rd, imm)
        elif op == OP_ADD:
            self._write(rd, regs[ra] + regs[rb])
        elif op == OP_SUB:
            self._write(rd, regs[ra] - regs[rb])
        elif op == OP_ADDI:
            self._write(rd, regs[ra] + imm)
        elif op == OP_LW:
            addr = (regs[ra] + imm) & WORD_MASK
            status, value = self.port.load(addr)
            if status == AccessStatus.STALL:
                return None
            if status == AccessStatus.FAULT:
                self._fault(FaultKind.MEMORY_FAULT, addr)
                return None
            self._write(rd, value)
        elif op == OP_SW:
            addr = (regs[ra] + imm) & WORD_MASK
            status = self.port.store(addr, regs[rd])
            if status == AccessStatus.STALL:
                return None
            if status == AccessStatus.FAULT:
                self._fault(FaultKind.MEMORY_FAULT, addr)
                return None
        elif op == OP_BEQ:
            # branch comparands are the ra and rd fields (rb shares imm bits)
            if regs[ra] == regs[rd]:
                next_pc = self.pc + 4 + 4 * imm
        elif op == OP_BNE:
            if regs[ra] != regs[rd]:
                next_pc = self.pc + 4 + 4 * imm
        elif op == OP_JMP:
            next_pc = self.pc + 4 + 4 * imm
        else:
            self._fault(FaultKind.ILLEGAL_INSTRUCTION)
            return None

        retired_pc = self.pc
        self.pc = next_pc & WORD_MASK
        self.retired += 1
        return retired_pc
