"""WordPiece subword tokenizer trained from scratch over sentence corpora.

Training uses the standard likelihood score freq(ab) / (freq(a) * freq(b)),
merging the best-scoring adjacent piece pair until the target vocabulary
size is reached or no pair clears the frequency floor. Ties break on the
lexicographically smallest pair, which makes training fully deterministic.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DecodeError, EmptyCorpus, VocabTooSmall
from .normalize import FunctionSentence

SPECIALS = ("[UNK]", "[CLS]", "[SEP]", "[PAD]", "[MASK]")
UNK_ID, CLS_ID, SEP_ID, PAD_ID, MASK_ID = range(5)
CONTINUATION = "##"
UNK_WORD = "<unk>"

DEFAULT_MAX_LEN = 256


@dataclass(frozen=True)
class Vocabulary:
    """Ordered subword inventory; specials occupy the first five indexes."""

    tokens: tuple[str, ...]
    token_to_id: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.tokens[: len(SPECIALS)] != SPECIALS:
            raise ValueError("specials must occupy indexes 0-4")
        mapping = {tok: i for i, tok in enumerate(self.tokens)}
        if len(mapping) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        object.__setattr__(self, "token_to_id", mapping)

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple[int, ...]
    truncated: bool = False
    max_len: int | None = DEFAULT_MAX_LEN


def _as_words(sentence) -> list[str]:
    if isinstance(sentence, FunctionSentence):
        return list(sentence.words)
    if isinstance(sentence, str):
        return sentence.split()
    return list(sentence)


def train_wordpiece(
    corpus: Iterable,
    target_size: int,
    min_frequency: int = 2,
) -> Vocabulary:
    """Train a vocabulary of at most ``target_size`` tokens over a corpus."""
    word_counts: Counter[str] = Counter()
    for sentence in corpus:
        word_counts.update(_as_words(sentence))
    if not word_counts:
        raise EmptyCorpus("tokenizer training corpus holds no words")

    splits: dict[str, list[str]] = {}
    alphabet: set[str] = set()
    for word in word_counts:
        pieces = [word[0]] + [CONTINUATION + ch for ch in word[1:]]
        splits[word] = pieces
        alphabet.update(pieces)

    tokens: list[str] = list(SPECIALS) + sorted(alphabet)
    if target_size <= len(tokens):
        raise VocabTooSmall(
            f"target {target_size} cannot hold {len(SPECIALS)} specials "
            f"plus {len(alphabet)} characters"
        )
    seen = set(tokens)

    while len(tokens) < target_size:
        pair_freq: Counter[tuple[str, str]] = Counter()
        piece_freq: Counter[str] = Counter()
        for word, count in word_counts.items():
            pieces = splits[word]
            for piece in pieces:
                piece_freq[piece] += count
            for pair in zip(pieces, pieces[1:]):
                pair_freq[pair] += count
        candidates = [p for p, f in pair_freq.items() if f >= min_frequency]
        if not candidates:
            break
        best_score = max(
            pair_freq[p] / (piece_freq[p[0]] * piece_freq[p[1]]) for p in candidates
        )
        best = min(
            p for p in candidates
            if pair_freq[p] / (piece_freq[p[0]] * piece_freq[p[1]]) == best_score
        )
        left, right = best
        merged = left + (right[len(CONTINUATION):] if right.startswith(CONTINUATION) else right)
        for word, pieces in splits.items():
            if len(pieces) < 2:
                continue
            out: list[str] = []
            i = 0
            while i < len(pieces):
                if i + 1 < len(pieces) and pieces[i] == left and pieces[i + 1] == right:
                    out.append(merged)
                    i += 2
                else:
                    out.append(pieces[i])
                    i += 1
            splits[word] = out
        if merged not in seen:
            tokens.append(merged)
            seen.add(merged)
    return Vocabulary(tuple(tokens))


def encode(sentence, vocab: Vocabulary, max_len: int | None = DEFAULT_MAX_LEN) -> TokenSequence:
    """Greedy longest-match-first encoding with whole-word UNK fallback."""
    ids: list[int] = []
    for word in _as_words(sentence):
        pieces: list[int] = []
        start = 0
        while start < len(word):
            end = len(word)
            found = None
            while start < end:
                sub = word[start:end]
                if start > 0:
                    sub = CONTINUATION + sub
                if sub in vocab:
                    found = sub
                    break
                end -= 1
            if found is None:
                pieces = [UNK_ID]
                break
            pieces.append(vocab.token_to_id[found])
            start = end
        ids.extend(pieces)
    truncated = max_len is not None and len(ids) > max_len
    if truncated:
        ids = ids[:max_len]
    return TokenSequence(tuple(ids), truncated=truncated, max_len=max_len)


def decode(seq: TokenSequence | Sequence[int], vocab: Vocabulary) -> list[str]:
    """Re-fuse continuation pieces into words; UNK becomes the sentinel word."""
    ids = seq.ids if isinstance(seq, TokenSequence) else tuple(seq)
    words: list[str] = []
    current: str | None = None
    for i in ids:
        if not 0 <= i < vocab.size:
            raise DecodeError(f"token id {i} outside vocabulary of {vocab.size}")
        if i == UNK_ID:
            if current is not None:
                words.append(current)
                current = None
            words.append(UNK_WORD)
            continue
        if i in (CLS_ID, SEP_ID, PAD_ID, MASK_ID):
            continue
        token = vocab.tokens[i]
        if token.startswith(CONTINUATION) and current is not None:
            current += token[len(CONTINUATION):]
        else:
            if current is not None:
                words.append(current)
            current = token[len(CONTINUATION):] if token.startswith(CONTINUATION) else token
    if current is not None:
        words.append(current)
    return words


def save_vocab(vocab: Vocabulary, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(vocab.tokens) + "\n", encoding="utf-8")


def load_vocab(path: str | Path) -> Vocabulary:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    tokens = tuple(line for line in lines if line)
    return Vocabulary(tokens)
