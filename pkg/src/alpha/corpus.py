"""Labeled function corpora: dedup, cross-filtering, stats and Zipf tables.

A corpus directory holds ``corpus.txt`` (one sentence per line, prefixed
``B\\t`` or ``M\\t``), a ``stats.csv`` sidecar and a small ``meta.json`` with
the normalization switches the corpus was built with.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyCorpus
from .ingest import BENIGN, MALICIOUS, RawSample
from .normalize import (
    DEFAULT_BOUNDARIES,
    DEFAULT_MODE,
    FunctionSentence,
    NormalizationMode,
    sentences_from_sample,
)

STATS_HEADER = ["Type", "Initial", "Deduplicated", "Filtered",
                "Avg Function Length", "%>256", "Unique Words"]


@dataclass(frozen=True)
class FunctionSet:
    """Deduplicated sentences of one label, with pre-dedup occurrence counts."""

    label: str
    functions: frozenset[str]
    source_counts: Mapping[str, int]

    @property
    def initial(self) -> int:
        return sum(self.source_counts.values())

    @property
    def deduplicated(self) -> int:
        return len(self.source_counts)


@dataclass(frozen=True)
class CorpusStats:
    initial: int
    deduplicated: int
    filtered: int
    avg_function_length: float
    over_256_tokens: int
    unique_words: int


@dataclass(frozen=True)
class TrainingCorpus:
    """Benign and (cross-filtered) malicious sets plus membership lookup."""

    benign: FunctionSet
    malicious: FunctionSet

    def __post_init__(self) -> None:
        overlap = self.benign.functions & self.malicious.functions
        if overlap:
            raise ValueError(f"corpus sets overlap on {len(overlap)} keys; cross-filter first")

    @classmethod
    def from_keys(cls, benign_keys: Iterable[str], malicious_keys: Iterable[str]) -> "TrainingCorpus":
        ben = frozenset(benign_keys)
        mal = frozenset(malicious_keys)
        return cls(
            benign=FunctionSet(BENIGN, ben, {k: 1 for k in sorted(ben)}),
            malicious=FunctionSet(MALICIOUS, mal, {k: 1 for k in sorted(mal)}),
        )

    def lookup(self, key: str) -> str | None:
        """Return the training label of a sentence key, or None if unseen."""
        if key in self.benign.functions:
            return BENIGN
        if key in self.malicious.functions:
            return MALICIOUS
        return None


def build_function_set(
    samples: Sequence[RawSample],
    label: str,
    mode: NormalizationMode = DEFAULT_MODE,
    boundaries: Sequence[str] = DEFAULT_BOUNDARIES,
) -> tuple[FunctionSet, CorpusStats]:
    """Extract, deduplicate and summarize the sentences of one label."""
    counts: Counter[str] = Counter()
    for sample in samples:
        if sample.instructions:
            counts.update(s.key() for s in sentences_from_sample(sample, mode, boundaries))
    if not counts:
        raise EmptyCorpus(f"no usable sentences for label {label!r}")
    fs = FunctionSet(label=label, functions=frozenset(counts), source_counts=dict(counts))
    return fs, corpus_stats(fs)


def cross_filter_malicious(mal: FunctionSet, ben: FunctionSet) -> FunctionSet:
    """Drop every malicious sentence that also appears in the benign set."""
    return replace(mal, functions=mal.functions - ben.functions)


def corpus_stats(fs: FunctionSet, token_limit: int = 256, tokenizer=None) -> CorpusStats:
    """Summarize the current (possibly filtered) membership of a set.

    Sentence length uses the word count unless a tokenizer (any object with
    an ``encode(words, max_len=None)`` returning ``.ids``) is supplied.
    """
    if not fs.functions:
        raise EmptyCorpus(f"function set {fs.label!r} is empty")
    lengths = []
    words: set[str] = set()
    over = 0
    for key in fs.functions:
        parts = key.split()
        lengths.append(len(parts))
        words.update(parts)
        if tokenizer is None:
            token_len = len(parts)
        else:
            token_len = len(tokenizer.encode(parts, max_len=None).ids)
        if token_len > token_limit:
            over += 1
    return CorpusStats(
        initial=fs.initial,
        deduplicated=fs.deduplicated,
        filtered=len(fs.functions),
        avg_function_length=sum(lengths) / len(lengths),
        over_256_tokens=over,
        unique_words=len(words),
    )


# --- Zipf rank/frequency ---

def word_frequencies(fs: FunctionSet) -> Counter:
    """Word occurrence counts weighted by pre-dedup sentence multiplicity."""
    counts: Counter[str] = Counter()
    for key, n in fs.source_counts.items():
        for word in key.split():
            counts[word] += n
    return counts


def word_frequencies_from_samples(
    samples: Iterable[RawSample],
    mode: NormalizationMode = DEFAULT_MODE,
) -> Counter:
    from .normalize import normalize_instruction

    counts: Counter[str] = Counter()
    for sample in samples:
        counts.update(normalize_instruction(i, mode) for i in sample.instructions)
    return counts


def zipf_table(counts: Mapping[str, int]) -> list[tuple[int, str, int]]:
    """Rank words by descending frequency; ties break lexicographically."""
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(rank, word, freq) for rank, (word, freq) in enumerate(ordered, 1)]


def zipf_slope(table: Sequence[tuple[int, str, int]], rank_min: int = 10, rank_max: int = 500) -> float:
    """Least-squares slope of log frequency against log rank."""
    rows = [(r, f) for r, _, f in table if rank_min <= r <= rank_max and f > 0]
    if len(rows) < 2:
        raise EmptyCorpus("not enough ranks in the fit window")
    ranks = np.array([r for r, _ in rows], dtype=float)
    freqs = np.array([f for _, f in rows], dtype=float)
    slope, _ = np.polyfit(np.log(ranks), np.log(freqs), 1)
    return float(slope)


def count_words_above(counts: Mapping[str, int], threshold: int = 10) -> int:
    """Optional stat: number of distinct words seen more than ``threshold`` times."""
    return sum(1 for f in counts.values() if f > threshold)


# --- serialization ---

def save_corpus(
    corpus: TrainingCorpus,
    out_dir: str | Path,
    stats: Mapping[str, CorpusStats] | None = None,
    mode: NormalizationMode | None = None,
    header: str = "",
) -> Path:
    """Write corpus.txt (+ stats.csv / meta.json) into a directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    if header:
        lines.append(header)
    for key in sorted(corpus.benign.functions):
        lines.append(f"B\t{key}")
    for key in sorted(corpus.malicious.functions):
        lines.append(f"M\t{key}")
    (out_dir / "corpus.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    if stats:
        rows = [",".join(STATS_HEADER)]
        for label, st in stats.items():
            rows.append(
                f"{label},{st.initial},{st.deduplicated},{st.filtered},"
                f"{st.avg_function_length:.2f},{st.over_256_tokens},{st.unique_words}"
            )
        if header:
            rows.insert(0, header)
        (out_dir / "stats.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")

    if mode is not None:
        meta = {
            "format": "alpha-corpus/1",
            "jmpnz_folding": mode.jmpnz_folding,
            "address_threshold": mode.address_threshold,
        }
        (out_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return out_dir / "corpus.txt"


def load_corpus(path: str | Path) -> TrainingCorpus:
    """Load a corpus directory or corpus.txt file written by save_corpus."""
    path = Path(path)
    if path.is_dir():
        path = path / "corpus.txt"
    benign: list[str] = []
    malicious: list[str] = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        prefix, _, key = line.partition("\t")
        if prefix == "B":
            benign.append(key)
        elif prefix == "M":
            malicious.append(key)
        else:
            raise EmptyCorpus(f"unrecognized corpus line prefix {prefix!r} in {path}")
    if not benign and not malicious:
        raise EmptyCorpus(f"{path} holds no sentences")
    return TrainingCorpus.from_keys(benign, malicious)


def load_corpus_mode(path: str | Path) -> NormalizationMode | None:
    """Read the normalization switches recorded next to a corpus, if any."""
    path = Path(path)
    meta = path / "meta.json" if path.is_dir() else path.parent / "meta.json"
    if not meta.exists():
        return None
    data = json.loads(meta.read_text(encoding="utf-8"))
    return NormalizationMode(
        jmpnz_folding=bool(data.get("jmpnz_folding", False)),
        address_threshold=int(data.get("address_threshold", 0x10000)),
    )


def corpus_sentences(corpus: TrainingCorpus) -> list[tuple[FunctionSentence, str]]:
    """Labeled sentences of the corpus, deterministic order, for training."""
    out: list[tuple[FunctionSentence, str]] = []
    for key in sorted(corpus.benign.functions):
        out.append((FunctionSentence.from_key(key), BENIGN))
    for key in sorted(corpus.malicious.functions):
        out.append((FunctionSentence.from_key(key), MALICIOUS))
    return out
