"""Joint token and sentence segmentation from raw text.

Each wordpiece of a document is classified as INSIDE a token, the END of a
single-word token, the END of a multi-word token, or the END of a sentence;
the label sequence is then aggregated into token spans, multi-word flags,
and sentence boundaries.  A sentence end always closes the current token,
and anything still open at the end of text is force-closed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from polypipe.conllu import ReconstructedDocument
from polypipe.encoder import AdapterSet, EncodedText, EncoderConfig, encode
from polypipe.neural import Adam, ParamStore
from polypipe.neural.layers import ffn, init_ffn
from polypipe.neural.tensor import cross_entropy
from polypipe.subword import SubwordVocab, WordpieceSeq, chunk, tokenize


class BoundaryLabel(enum.IntEnum):
    INSIDE = 0
    END_TOKEN = 1
    END_MWT = 2
    END_SENTENCE = 3


PFX = "splitter"


@dataclass
class TokenPrediction:
    start: int
    end: int
    text: str
    is_mwt: bool = False


@dataclass
class Segmentation:
    """Sentences of token spans; spans index into the original text."""

    sentences: list[list[TokenPrediction]]

    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)


def init_splitter_head(store: ParamStore, enc_cfg: EncoderConfig, rng,
                       hidden: int = 32) -> None:
    init_ffn(store, PFX, 2 * enc_cfg.d_model, hidden, len(BoundaryLabel), rng)


def boundary_logits(store: ParamStore, enc: EncodedText):
    """4-way logits per wordpiece.  The classifier reads the piece's vector
    together with its right neighbor's (zeros past the end): whether the
    next piece opens a new substring is the load-bearing boundary signal."""
    reps = enc.reps
    k, d = reps.shape
    if k == 1:
        nxt = Tensor(np.zeros((1, d)))
    else:
        nxt = concat([narrow(reps, 0, 1, k), Tensor(np.zeros((1, d)))], axis=0)
    return ffn(store, PFX, concat([reps, nxt], axis=1))


def predict_boundaries(store: ParamStore, enc: EncodedText) -> list[BoundaryLabel]:
    """Argmax of the 4-way softmax per wordpiece.  np.argmax takes the first
    maximum, which realizes the tie-break order INSIDE < END_TOKEN <
    END_MWT < END_SENTENCE."""
    logits = boundary_logits(store, enc)
    return [BoundaryLabel(int(i)) for i in np.argmax(logits.data, axis=1)]


def aggregate(labels: list[BoundaryLabel], seq: WordpieceSeq,
              text: str) -> Segmentation:
    """Turn per-piece boundary labels into token spans and sentences."""
    if len(labels) != len(seq):
        raise ValueError("one label per wordpiece required")
    sentences: list[list[TokenPrediction]] = []
    tokens: list[TokenPrediction] = []
    tok_start: int | None = None
    for i, label in enumerate(labels):
        start, end = seq.offsets[i]
        if tok_start is None:
            tok_start = start
        if label == BoundaryLabel.INSIDE and i + 1 < len(labels):
            continue
        closes = label if label != BoundaryLabel.INSIDE else BoundaryLabel.END_TOKEN
        tokens.append(TokenPrediction(
            tok_start, end, text[tok_start:end],
            is_mwt=closes == BoundaryLabel.END_MWT))
        tok_start = None
        if closes == BoundaryLabel.END_SENTENCE or i + 1 == len(labels):
            sentences.append(tokens)
            tokens = []
    if tokens:
        sentences.append(tokens)
    return Segmentation(sentences)


def segment(store: ParamStore, base: ParamStore, enc_cfg: EncoderConfig,
            adapter: AdapterSet | None, vocab: SubwordVocab, text: str,
            max_len: int | None = None) -> tuple[Segmentation, WordpieceSeq]:
    seq = tokenize(vocab, text)
    if not len(seq):
        return Segmentation([]), seq
    enc = encode(base, enc_cfg, seq.piece_ids, adapter, max_len,
                 continuations=seq.continuation_flags())
    labels = predict_boundaries(store, enc)
    return aggregate(labels, seq, text), seq


# ---------------------------------------------------------------------------
# gold label projection and training


def project_gold_labels(seq: WordpieceSeq,
                        doc: ReconstructedDocument) -> tuple[list[int], int]:
    """Label each wordpiece from gold token/sentence boundaries.

    A piece receives the strongest boundary whose character offset it ends
    at (sentence > multi-word token > token > inside).  A gold boundary
    falling strictly inside a piece is assigned to the enclosing piece and
    counted as a mismatch.
    """
    strength = {BoundaryLabel.END_TOKEN: 1, BoundaryLabel.END_MWT: 2,
                BoundaryLabel.END_SENTENCE: 3}
    boundary_at: dict[int, BoundaryLabel] = {}
    for sent in doc.sentences:
        for t, tok in enumerate(sent):
            if t + 1 == len(sent):
                label = BoundaryLabel.END_SENTENCE
            elif tok.is_mwt:
                label = BoundaryLabel.END_MWT
            else:
                label = BoundaryLabel.END_TOKEN
            old = boundary_at.get(tok.end)
            if old is None or strength[label] > strength[old]:
                boundary_at[tok.end] = label
    labels = [int(BoundaryLabel.INSIDE)] * len(seq)
    mismatches = 0
    remaining = dict(boundary_at)
    for i, (start, end) in enumerate(seq.offsets):
        exact = remaining.pop(end, None)
        if exact is not None:
            labels[i] = int(exact)
        inner = [off for off in remaining if start < off < end]
        if inner:
            mismatches += len(inner)
            strongest = max((remaining.pop(off) for off in inner),
                            key=lambda lb: strength[lb])
            if strength[strongest] > strength.get(BoundaryLabel(labels[i]), 0):
                labels[i] = int(strongest)
    return labels, mismatches


@dataclass
class SplitterData:
    seq: WordpieceSeq
    labels: list[int]
    mismatches: int
    text: str


def prepare_splitter_data(vocab: SubwordVocab,
                          doc: ReconstructedDocument) -> SplitterData:
    seq = tokenize(vocab, doc.text)
    labels, mismatches = project_gold_labels(seq, doc)
    return SplitterData(seq, labels, mismatches, doc.text)


def train_splitter(bundle: ParamStore, base: ParamStore,
                   enc_cfg: EncoderConfig, adapter: AdapterSet | None,
                   data: SplitterData, epochs: int, lr: float, rng,
                   max_len: int | None = None) -> list[float]:
    """Cross-entropy over projected gold labels, one chunk per step.

    Chunk starts are shifted by a random offset each epoch so boundary
    decisions cannot latch onto chunk-relative positions; inference chunks
    from offset zero.
    """
    limit = max_len or enc_cfg.max_len
    body = limit - 2
    n = len(data.seq)
    gold = np.asarray(data.labels, dtype=np.intp)
    conts = np.asarray(data.seq.continuation_flags(), dtype=np.intp)
    n_chunks = max(1, len(chunk(n, limit)))
    opt = Adam(bundle, lr=lr, warmup_steps=max(1, epochs * n_chunks // 10))
    losses = []
    for epoch in range(epochs):
        shift = int(rng.integers(0, body)) if (n > body and epoch > 0) else 0
        bounds = [0] + list(range(shift if shift else body, n, body)) + [n]
        ranges = [(a, b) for a, b in zip(bounds, bounds[1:]) if a < b]
        order = rng.permutation(len(ranges))
        epoch_loss = 0.0
        for start, stop in (ranges[int(i)] for i in order):
            bundle.zero_grad()
            enc = encode(base, enc_cfg, data.seq.piece_ids[start:stop],
                         adapter, limit, continuations=conts[start:stop])
            logits = boundary_logits(bundle, enc)
            loss = cross_entropy(logits, gold[start:stop])
            loss.backward()
            opt.step()
            epoch_loss += loss.item()
        losses.append(epoch_loss / max(1, len(ranges)))
    return losses
