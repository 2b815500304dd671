"""Instruction normalization and function segmentation.

Each instruction is fused into one whitespace-free word (mnemonic plus
operands, commas and spacing dropped). Bare hex literals at or above the
address threshold become the placeholder ``memoryaddress``; literals inside
bracket displacements or behind a segment prefix are kept verbatim, and
jump/call targets are replaced regardless of magnitude. Word streams are
then split into function sentences at return/call boundaries.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import EmptyStream
from .ingest import RawSample, TimedInstruction

DEFAULT_ADDRESS_THRESHOLD = 0x10000
DEFAULT_BOUNDARIES: tuple[str, ...] = ("ret", "call")

ADDRESS_PLACEHOLDER = "memoryaddress"

_HEX_LITERAL = re.compile(r"(?<![0-9a-z])0x[0-9a-f]+")
_FOLDED_JUMPS = {"jmp": "jmpmem", "jnz": "jnzmem", "jz": "jzmem"}
_STRIP_RE = re.compile(r"[\s,]+")


@dataclass(frozen=True)
class NormalizationMode:
    """Switches for address replacement and the jump-folding variant."""

    jmpnz_folding: bool = False
    address_threshold: int = DEFAULT_ADDRESS_THRESHOLD

    def __post_init__(self) -> None:
        if self.address_threshold <= 0:
            raise ValueError("address_threshold must be > 0")


DEFAULT_MODE = NormalizationMode()


@dataclass(frozen=True)
class FunctionSentence:
    """An ordered run of instruction words ending at a boundary instruction."""

    words: tuple[str, ...]

    @property
    def word_count(self) -> int:
        return len(self.words)

    def key(self) -> str:
        """Canonical corpus key: words joined by single spaces."""
        return " ".join(self.words)

    @classmethod
    def from_key(cls, key: str) -> "FunctionSentence":
        return cls(tuple(key.split()))


def _is_bare_hex(text: str) -> bool:
    return _HEX_LITERAL.fullmatch(text) is not None


def _substitute_addresses(operands: str, threshold: int, always: bool) -> str:
    """Replace qualifying hex literals with the address placeholder."""
    whole_is_target = always and _is_bare_hex(operands.strip())
    out: list[str] = []
    last = 0
    for match in _HEX_LITERAL.finditer(operands):
        depth = operands.count("[", 0, match.start()) - operands.count("]", 0, match.start())
        segment = operands[: match.start()].rstrip().endswith(":")
        value = int(match.group(), 16)
        if depth == 0 and not segment and (whole_is_target or value >= threshold):
            out.append(operands[last: match.start()])
            out.append(ADDRESS_PLACEHOLDER)
            last = match.end()
    out.append(operands[last:])
    return "".join(out)


def normalize_instruction(instr: TimedInstruction, mode: NormalizationMode = DEFAULT_MODE) -> str:
    """Fuse one instruction into a single normalized word."""
    mnemonic = instr.mnemonic.lower()
    operands = instr.operands.lower().strip()
    if mode.jmpnz_folding and mnemonic in _FOLDED_JUMPS and _is_bare_hex(operands):
        return _FOLDED_JUMPS[mnemonic]
    always = mnemonic.startswith("j") or mnemonic.startswith("call")
    replaced = _substitute_addresses(operands, mode.address_threshold, always)
    return _STRIP_RE.sub("", mnemonic + replaced)


def is_boundary(word: str, boundaries: Sequence[str] = DEFAULT_BOUNDARIES) -> bool:
    return word.startswith(tuple(boundaries))


def segment_functions(
    words: Iterable[str],
    boundaries: Sequence[str] = DEFAULT_BOUNDARIES,
) -> list[FunctionSentence]:
    """Split a normalized word stream into function sentences.

    Every boundary word closes the current sentence inclusively; a trailing
    run without a boundary becomes a final remainder sentence.
    """
    prefixes = tuple(boundaries)
    if not prefixes:
        raise ValueError("boundary set must be non-empty")
    sentences: list[FunctionSentence] = []
    current: list[str] = []
    for word in words:
        current.append(word)
        if word.startswith(prefixes):
            sentences.append(FunctionSentence(tuple(current)))
            current = []
    if current:
        sentences.append(FunctionSentence(tuple(current)))
    if not sentences:
        raise EmptyStream("no words to segment")
    return sentences


def sentences_from_sample(
    sample: RawSample,
    mode: NormalizationMode = DEFAULT_MODE,
    boundaries: Sequence[str] = DEFAULT_BOUNDARIES,
) -> list[FunctionSentence]:
    """Normalize a sample's instructions and segment them into sentences."""
    words = [normalize_instruction(i, mode) for i in sample.instructions]
    return segment_functions(words, boundaries)
