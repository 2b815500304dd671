"""Trace ingestion: parse instruction logs, label samples, slice by minute.

Canonical trace format is UTF-8 text, one instruction per line, either

    <t_ms>|<thread_id>|<asm text>

or the bare form ``<asm text>``. Labels come from the filename convention
``<Type>-<Family>-<Id>.<ext>`` where Type ``Benign`` maps to the benign
label and every other type to malicious.
"""

from __future__ import annotations

import dataclasses
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .errors import EmptySlice, LabelError, MalformedLine, NoTimestamps, TraceIoError

MINUTE_MS = 60_000

BENIGN = "benign"
MALICIOUS = "malicious"


@dataclass(frozen=True)
class TimedInstruction:
    """One logged instruction: mnemonic, raw operand text, optional timing."""

    mnemonic: str
    operands: str = ""
    timestamp_ms: int | None = None
    thread_id: str | None = None

    @property
    def text(self) -> str:
        return f"{self.mnemonic} {self.operands}".strip()


@dataclass(frozen=True)
class RawSample:
    """A labeled instruction stream plus the metadata parsed from its name."""

    sample_id: str
    label: str
    instructions: tuple[TimedInstruction, ...]
    malware_type: str | None = None
    family: str | None = None
    skipped_lines: tuple[int, ...] = ()


@dataclass(frozen=True)
class SliceSpec:
    """Minute window request: index k covers [k*60s, (k+1)*60s) from start."""

    slice_index: int
    fallback: bool = False

    def __post_init__(self) -> None:
        if self.slice_index < 0:
            raise ValueError("slice_index must be >= 0")


def parse_trace_line(line: str) -> TimedInstruction:
    """Parse one canonical trace line into a TimedInstruction."""
    body = line.rstrip("\r\n")
    timestamp: int | None = None
    thread: str | None = None
    if "|" in body:
        parts = body.split("|", 2)
        if len(parts) != 3:
            raise MalformedLine(f"expected <t_ms>|<tid>|<asm>, got {body!r}")
        ts_text, tid_text, asm = parts
        try:
            timestamp = int(ts_text.strip())
        except ValueError:
            raise MalformedLine(f"non-integer timestamp in {body!r}") from None
        thread = tid_text.strip() or None
    else:
        asm = body
    asm = asm.strip()
    if not asm:
        raise MalformedLine(f"empty instruction text in {line!r}")
    fields = asm.split(None, 1)
    mnemonic = fields[0].lower()
    operands = fields[1].strip() if len(fields) > 1 else ""
    return TimedInstruction(mnemonic, operands, timestamp, thread)


def parse_label(filename: str) -> tuple[str, str | None, str | None, str]:
    """Derive (label, malware_type, family, sample_id) from a file name.

    The family part may itself contain dashes (e.g. N-W0rm), so the type is
    the first dash field and the id the last one.
    """
    stem = Path(filename).stem
    parts = stem.split("-")
    if len(parts) < 3 or not all(parts):
        raise LabelError(f"{filename!r} does not match <Type>-<Family>-<Id>")
    type_text = parts[0]
    if not type_text.isalpha():
        raise LabelError(f"{filename!r} has a non-alphabetic type field")
    sample_id = parts[-1]
    family = "-".join(parts[1:-1])
    if type_text.lower() == BENIGN:
        return BENIGN, None, family, sample_id
    return MALICIOUS, type_text.lower(), family, sample_id


def load_sample(path: str | Path, label: str | None = None) -> RawSample:
    """Load a trace file, skipping malformed lines and recording their numbers."""
    path = Path(path)
    if label is None:
        label_value, malware_type, family, sample_id = parse_label(path.name)
    else:
        if label not in (BENIGN, MALICIOUS):
            raise LabelError(f"label override must be benign or malicious, got {label!r}")
        try:
            label_value, malware_type, family, sample_id = parse_label(path.name)
        except LabelError:
            malware_type, family, sample_id = None, None, path.stem
        label_value = label
        if label_value == BENIGN:
            malware_type = None
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise TraceIoError(f"cannot read {path}: {exc}") from exc

    instructions: list[TimedInstruction] = []
    skipped: list[int] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            instructions.append(parse_trace_line(line))
        except MalformedLine:
            skipped.append(lineno)
    return RawSample(
        sample_id=sample_id,
        label=label_value,
        instructions=tuple(instructions),
        malware_type=malware_type,
        family=family,
        skipped_lines=tuple(skipped),
    )


def _timestamps(sample: RawSample) -> list[int]:
    return [i.timestamp_ms for i in sample.instructions if i.timestamp_ms is not None]


def slice_by_minute(sample: RawSample, spec: SliceSpec) -> RawSample:
    """Extract the instructions of one minute window, relative to trace start.

    When the requested window is empty and ``spec.fallback`` is set, the last
    window [T-60000, T) with T = last timestamp + 1 is returned instead.
    """
    stamps = _timestamps(sample)
    if not stamps:
        raise NoTimestamps(f"sample {sample.sample_id} has no timestamps")
    base = min(stamps)
    lo = base + spec.slice_index * MINUTE_MS
    hi = lo + MINUTE_MS
    picked = [
        i for i in sample.instructions
        if i.timestamp_ms is not None and lo <= i.timestamp_ms < hi
    ]
    if not picked:
        if not spec.fallback:
            raise EmptySlice(
                f"sample {sample.sample_id}: minute {spec.slice_index} holds no instructions"
            )
        hi = max(stamps) + 1
        lo = hi - MINUTE_MS
        picked = [
            i for i in sample.instructions
            if i.timestamp_ms is not None and lo <= i.timestamp_ms < hi
        ]
    return dataclasses.replace(sample, instructions=tuple(picked))


def instruction_density(sample: RawSample) -> list[tuple[int, int]]:
    """Per-minute instruction counts, zero-filled from minute 0 to the last."""
    stamps = _timestamps(sample)
    if not stamps:
        raise NoTimestamps(f"sample {sample.sample_id} has no timestamps")
    base = min(stamps)
    counts = Counter((t - base) // MINUTE_MS for t in stamps)
    last = max(counts)
    return [(minute, counts.get(minute, 0)) for minute in range(last + 1)]
