"""Assembler and instruction encoding for the tile cores.

16 general registers (r0 reads as zero), 32-bit instructions, one word
each. Immediates are signed 16-bit; branch and jump targets are encoded
as word offsets relative to the next instruction. Images serialize
little-endian.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

NUM_REGS = 16
WORD_MASK = 0xFFFFFFFF

OP_NOP = 0x00
OP_HALT = 0x01
OP_LI = 0x02
OP_ADD = 0x03
OP_SUB = 0x04
OP_ADDI = 0x05
OP_LW = 0x06
OP_SW = 0x07
OP_BEQ = 0x08
OP_BNE = 0x09
OP_JMP = 0x0A

OPCODE_NAMES = {
    OP_NOP: "NOP", OP_HALT: "HALT", OP_LI: "LI", OP_ADD: "ADD",
    OP_SUB: "SUB", OP_ADDI: "ADDI", OP_LW: "LW", OP_SW: "SW",
    OP_BEQ: "BEQ", OP_BNE: "BNE", OP_JMP: "JMP",
}


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class UndefinedLabel(ParseError):
    def __init__(self, line: int, label: str):
        super().__init__(line, f"undefined label '{label}'")
        self.label = label


class RangeError(ParseError):
    """Immediate or branch offset outside the signed 16-bit range."""


@dataclass
class ProgramImage:
    base: int
    words: List[int]
    symbols: Dict[str, int] = field(default_factory=dict)

    def to_bytes(self) -> bytes:
        return struct.pack(f"<{len(self.words)}I", *self.words)

    @classmethod
    def from_bytes(cls, data: bytes, base: int = 0) -> "ProgramImage":
        if len(data) % 4:
            raise ValueError("image length must be a multiple of 4 bytes")
        words = list(struct.unpack(f"<{len(data) // 4}I", data))
        return cls(base=base, words=words)


def encode(op: int, rd: int = 0, ra: int = 0, rb: int = 0, imm: int = 0) -> int:
    """Pack one instruction word.

    rb shares bits [11:8] with the immediate field, so an instruction may
    use rb or a 16-bit immediate, never both. Branches put their second
    comparand in the rd slot for that reason.
    """
    if rb and imm:
        raise ValueError("rb and imm are mutually exclusive")
    return (op << 24) | (rd << 20) | (ra << 16) | (rb << 8) | (imm & 0xFFFF)


def decode(word: int) -> Tuple[int, int, int, int, int]:
    """Returns (op, rd, ra, rb, imm) with the immediate sign-extended."""
    op = (word >> 24) & 0xFF
    rd = (word >> 20) & 0xF
    ra = (word >> 16) & 0xF
    rb = (word >> 8) & 0xF
    imm = word & 0xFFFF
    if imm >= 0x8000:
        imm -= 0x10000
    return op, rd, ra, rb, imm


_LABEL_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_MEM_RE = re.compile(r"^(?P<off>[^()]*)\((?P<reg>[^()]+)\)$")


def _strip(line: str) -> str:
    for marker in (";", "#"):
        pos = line.find(marker)
        if pos >= 0:
            line = line[:pos]
    return line.strip()


def _parse_reg(tok: str, line_no: int) -> int:
    tok = tok.strip().lower()
    if not tok.startswith("r") or not tok[1:].isdigit():
        raise ParseError(line_no, f"expected register, got '{tok}'")
    n = int(tok[1:])
    if n >= NUM_REGS:
        raise ParseError(line_no, f"no such register r{n}")
    return n


def _parse_int(tok: str, line_no: int) -> int:
    tok = tok.strip()
    try:
        return int(tok, 0)
    except ValueError:
        raise ParseError(line_no, f"expected number, got '{tok}'") from None


def _check_imm(value: int, line_no: int, what: str = "immediate") -> int:
    if not -0x8000 <= value <= 0x7FFF:
        raise RangeError(line_no, f"{what} {value} outside signed 16-bit range")
    return value


@dataclass
class _Item:
    line_no: int
    mnemonic: str
    operands: List[str]
    word_index: int


def assemble(text: str, base: int = 0) -> ProgramImage:
    """Two-pass assembly of the source text into a word image.

    One instruction or label per line; labels may prefix an instruction.
    Comments start with ';' or '#'. The '.word' directive emits a literal
    32-bit word (a number or a label address).
    """
    if base % 4:
        raise ValueError("base address must be word aligned")
    symbols: Dict[str, int] = {}
    items: List[_Item] = []
    word_index = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        while line:
            head, colon, rest = line.partition(":")
            if colon and _LABEL_RE.match(head.strip()) and " " not in head.strip():
                label = head.strip()
                if label in symbols:
                    raise ParseError(line_no, f"duplicate label '{label}'")
                symbols[label] = base + 4 * word_index
                line = rest.strip()
                continue
            break
        if not line:
            continue
        parts = line.split(None, 1)
        mnemonic = parts[0].upper()
        operands = [t.strip() for t in parts[1].split(",")] if len(parts) > 1 else []
        items.append(_Item(line_no, mnemonic, operands, word_index))
        word_index += 1

    words: List[int] = []
    for item in items:
        words.append(_encode_item(item, symbols, base))
    return ProgramImage(base=base, words=words, symbols=symbols)


def _encode_item(item: _Item, symbols: Dict[str, int], base: int) -> int:
    ln, mnem, ops = item.line_no, item.mnemonic, item.operands

    def want(n: int) -> None:
        if len(ops) != n:
            raise ParseError(ln, f"{mnem} takes {n} operand(s), got {len(ops)}")

    def branch_offset(tok: str) -> int:
        if tok in symbols:
            target = symbols[tok]
        elif _LABEL_RE.match(tok):
            raise UndefinedLabel(ln, tok)
        else:
            target = _parse_int(tok, ln)
        if target % 4:
            raise ParseError(ln, f"branch target {target:#x} not word aligned")
        off = (target - base) // 4 - (item.word_index + 1)
        return _check_imm(off, ln, "branch offset")

    def mem_operand(tok: str) -> Tuple[int, int]:
        m = _MEM_RE.match(tok.replace(" ", ""))
        if not m:
            raise ParseError(ln, f"expected offset(reg), got '{tok}'")
        off_text = m.group("off") or "0"
        if off_text in symbols:
            off = symbols[off_text]
        else:
            off = _parse_int(off_text, ln)
        off = _check_imm(off, ln, "offset")
        return off, _parse_reg(m.group("reg"), ln)

    if mnem == "NOP":
        want(0)
        return encode(OP_NOP)
    if mnem == "HALT":
        want(0)
        return encode(OP_HALT)
    if mnem == "LI":
        want(2)
        imm = _check_imm(_parse_int(ops[1], ln), ln)
        return encode(OP_LI, rd=_parse_reg(ops[0], ln), imm=imm)
    if mnem in ("ADD", "SUB"):
        want(3)
        op = OP_ADD if mnem == "ADD" else OP_SUB
        return encode(op, rd=_parse_reg(ops[0], ln), ra=_parse_reg(ops[1], ln),
                      rb=_parse_reg(ops[2], ln))
    if mnem == "ADDI":
        want(3)
        imm = _check_imm(_parse_int(ops[2], ln), ln)
        return encode(OP_ADDI, rd=_parse_reg(ops[0], ln),
                      ra=_parse_reg(ops[1], ln), imm=imm)
    if mnem in ("LW", "SW"):
        want(2)
        off, reg = mem_operand(ops[1])
        op = OP_LW if mnem == "LW" else OP_SW
        return encode(op, rd=_parse_reg(ops[0], ln), ra=reg, imm=off)
    if mnem in ("BEQ", "BNE"):
        want(3)
        op = OP_BEQ if mnem == "BEQ" else OP_BNE
        # second comparand rides in the rd slot, freeing the immediate bits
        return encode(op, ra=_parse_reg(ops[0], ln), rd=_parse_reg(ops[1], ln),
                      imm=branch_offset(ops[2]))
    if mnem == "JMP":
        want(1)
        return encode(OP_JMP, imm=branch_offset(ops[0]))
    if mnem == ".WORD":
        want(1)
        tok = ops[0]
        if tok in symbols:
            return symbols[tok] & WORD_MASK
        if _LABEL_RE.match(tok):
            raise UndefinedLabel(ln, tok)
        return _parse_int(tok, ln) & WORD_MASK
    raise ParseError(ln, f"unknown mnemonic '{mnem}'")
