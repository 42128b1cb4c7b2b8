"""Subword vocabulary training and tokenization with exact character offsets.

The vocabulary is built by byte-pair encoding over whitespace-delimited
substrings.  Within a substring, merges stay inside runs of word characters
(letters/marks/digits); every other character is a unit of its own, so no
merged piece ever spans a letter/punctuation boundary.  Tie-breaking is
deterministic: on equal frequency the lexicographically smallest pair merges.

Tokenization is greedy longest-match within each whitespace-delimited
substring.  A character with no matching piece becomes ``<unk>`` covering
exactly that character.  Offsets, not pieces, are authoritative: splicing
``text[start:end]`` over all pieces and re-inserting the original whitespace
reconstructs the input exactly.
"""

from __future__ import annotations

import heapq
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field

BOS, EOS, PAD, UNK = "<s>", "</s>", "<pad>", "<unk>"
SPECIALS = (BOS, EOS, PAD, UNK)
BOS_ID, EOS_ID, PAD_ID, UNK_ID = 0, 1, 2, 3

_NONSPACE = re.compile(r"\S+")


class VocabError(ValueError):
    pass


@dataclass
class SubwordVocab:
    pieces: list[str]
    piece_to_id: dict[str, int] = field(init=False, repr=False)
    _max_piece_len: int = field(init=False, repr=False)

    def __post_init__(self):
        if tuple(self.pieces[:4]) != SPECIALS:
            raise VocabError(f"first four pieces must be {SPECIALS}")
        self.piece_to_id = {p: i for i, p in enumerate(self.pieces)}
        if len(self.piece_to_id) != len(self.pieces):
            raise VocabError("duplicate pieces in vocabulary")
        self._max_piece_len = max((len(p) for p in self.pieces[4:]), default=1)

    def __len__(self) -> int:
        return len(self.pieces)

    def __contains__(self, piece: str) -> bool:
        return piece in self.piece_to_id

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for piece in self.pieces:
                f.write(piece + "\n")

    @classmethod
    def load(cls, path) -> "SubwordVocab":
        with open(path, encoding="utf-8") as f:
            pieces = [line.rstrip("\n") for line in f]
        while pieces and pieces[-1] == "":
            pieces.pop()
        return cls(pieces)


def _is_word_char(ch: str) -> bool:
    return unicodedata.category(ch)[0] in ("L", "M", "N")


def _split_runs(word: str) -> list[str]:
    """Maximal runs of word characters; every other character stands alone."""
    runs: list[str] = []
    buf: list[str] = []
    for ch in word:
        if _is_word_char(ch):
            buf.append(ch)
        else:
            if buf:
                runs.append("".join(buf))
                buf = []
            runs.append(ch)
    if buf:
        runs.append("".join(buf))
    return runs


def _pair_counts(units: list[str]) -> Counter:
    c: Counter = Counter()
    for a, b in zip(units, units[1:]):
        c[(a, b)] += 1
    return c


def _merge_units(units: list[str], pair: tuple[str, str]) -> list[str]:
    merged = pair[0] + pair[1]
    out: list[str] = []
    i = 0
    while i < len(units):
        if i + 1 < len(units) and units[i] == pair[0] and units[i + 1] == pair[1]:
            out.append(merged)
            i += 2
        else:
            out.append(units[i])
            i += 1
    return out


def train_vocab(corpus: str, target_size: int, seed: int = 0) -> SubwordVocab:
    """Learn a byte-pair vocabulary of at most ``target_size`` pieces.

    Deterministic for a fixed (corpus, target_size); ``seed`` is accepted for
    interface stability but the procedure has no random choices.
    """
    del seed
    if not corpus.strip():
        raise VocabError("training corpus is empty")
    alphabet = sorted({ch for ch in corpus if not ch.isspace()})
    if target_size < len(SPECIALS) + len(alphabet):
        raise VocabError(
            f"target_size {target_size} cannot cover the {len(alphabet)}-character "
            f"alphabet plus {len(SPECIALS)} specials")

    run_freq: Counter = Counter()
    for word in corpus.split():
        for run in _split_runs(word):
            run_freq[run] += 1
    # Deterministic run order; merges never cross run boundaries.
    runs = sorted(run_freq)
    units: dict[str, list[str]] = {r: list(r) for r in runs}
    freq = dict(run_freq)

    pair_count: Counter = Counter()
    pair_runs: dict[tuple[str, str], set[str]] = {}
    for r in runs:
        for pair, k in _pair_counts(units[r]).items():
            pair_count[pair] += k * freq[r]
            pair_runs.setdefault(pair, set()).add(r)

    heap: list[tuple[int, tuple[str, str]]] = [
        (-c, p) for p, c in pair_count.items()]
    heapq.heapify(heap)

    merged_pieces: list[str] = []
    budget = target_size - len(SPECIALS) - len(alphabet)
    while budget > 0 and heap:
        negc, pair = heapq.heappop(heap)
        if pair_count.get(pair, 0) != -negc or -negc <= 0:
            continue  # stale heap entry
        merged_pieces.append(pair[0] + pair[1])
        budget -= 1
        touched = sorted(pair_runs.get(pair, ()))
        for r in touched:
            old = units[r]
            new = _merge_units(old, pair)
            units[r] = new
            delta = _pair_counts(new)
            delta.subtract(_pair_counts(old))
            for p, d in delta.items():
                if d == 0:
                    continue
                pair_count[p] = pair_count.get(p, 0) + d * freq[r]
                if d > 0:
                    pair_runs.setdefault(p, set()).add(r)
                if pair_count[p] > 0:
                    heapq.heappush(heap, (-pair_count[p], p))
        pair_count.pop(pair, None)

    return SubwordVocab(list(SPECIALS) + alphabet + merged_pieces)


@dataclass
class WordpieceSeq:
    """A tokenized text: piece ids with per-piece character offsets."""

    piece_ids: list[int]
    offsets: list[tuple[int, int]]
    space_split_index: list[int]

    def __len__(self) -> int:
        return len(self.piece_ids)

    def is_continuation(self, i: int) -> bool:
        """True when piece ``i`` does not begin its whitespace substring."""
        return i > 0 and self.space_split_index[i] == self.space_split_index[i - 1]

    def continuation_flags(self) -> list[int]:
        """The "##" markers as 0/1 flags, one per piece.  These are part of
        a piece's stored identity; offsets remain authoritative for text."""
        return [1 if self.is_continuation(i) else 0
                for i in range(len(self.piece_ids))]


def tokenize(vocab: SubwordVocab, text: str) -> WordpieceSeq:
    """Greedy longest-match segmentation; unknown characters become <unk>."""
    ids: list[int] = []
    offsets: list[tuple[int, int]] = []
    split_idx: list[int] = []
    lookup = vocab.piece_to_id
    max_len = vocab._max_piece_len
    for w, match in enumerate(_NONSPACE.finditer(text)):
        sub = match.group()
        base = match.start()
        pos = 0
        while pos < len(sub):
            end = min(len(sub), pos + max_len)
            piece_id = None
            while end > pos:
                pid = lookup.get(sub[pos:end])
                if pid is not None and pid >= 4:
                    piece_id = pid
                    break
                end -= 1
            if piece_id is None:
                piece_id = UNK_ID
                end = pos + 1
            ids.append(piece_id)
            offsets.append((base + pos, base + end))
            split_idx.append(w)
            pos = end
    return WordpieceSeq(ids, offsets, split_idx)


def marked_pieces(vocab: SubwordVocab, seq: WordpieceSeq) -> list[str]:
    """Display form of the pieces, "##"-marking substring continuations."""
    out = []
    for i, pid in enumerate(seq.piece_ids):
        piece = vocab.pieces[pid]
        out.append("##" + piece if seq.is_continuation(i) else piece)
    return out


def chunk(seq, max_len: int) -> list[tuple[int, int]]:
    """Split piece indices into consecutive half-open ranges.

    Each range holds at most ``max_len - 2`` pieces, leaving room for the
    <s>/</s> sentinels the encoder adds per chunk.  Ranges cover 0..K with
    no gaps and no overlap.
    """
    if max_len < 2:
        raise ValueError("max_len must be at least 2")
    n = seq if isinstance(seq, int) else len(seq)
    if n == 0:
        return []
    body = max_len - 2
    if body == 0:
        raise ValueError("max_len 2 leaves no room for content pieces")
    return [(s, min(s + body, n)) for s in range(0, n, body)]
