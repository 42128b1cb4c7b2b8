"""Named entity recognition: BIOES sequence labeling with a linear-chain CRF.

Token emissions come from a feed-forward head over encoder representations
(tokens, not expanded words).  Transition scores are learned, but
structurally illegal BIOES transitions (O to I-X, B-X to B-Y, ...) carry an
additive -inf mask, so decoded sequences are legal by construction.  The
log-partition uses the forward algorithm in log space; decoding is Viterbi
with ties broken toward the smallest label id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from polypipe.encoder import AdapterSet, EncoderConfig, encode
from polypipe.neural import Adam, ParamStore, Tensor, gather_rc, logsumexp, narrow
from polypipe.neural.layers import ffn, init_ffn
from polypipe.neural.tensor import DTYPE
from polypipe.subword import SubwordVocab, tokenize

NEG_INF = -np.inf
PFX = "ner"


class BioesLabels:
    """The {O} ∪ {B-,I-,E-,S-}×types label set with START/STOP indices."""

    def __init__(self, types: list[str]):
        if not types:
            raise ValueError("at least one entity type required")
        self.types = sorted(set(types))
        self.labels = ["O"]
        for t in self.types:
            self.labels += [f"B-{t}", f"I-{t}", f"E-{t}", f"S-{t}"]
        self.index = {lb: i for i, lb in enumerate(self.labels)}
        self.n = len(self.labels)
        self.start = self.n
        self.stop = self.n + 1

    def id_of(self, label: str) -> int:
        if label not in self.index:
            raise KeyError(f"unknown BIOES label {label!r}")
        return self.index[label]

    def _may_follow(self, prev: str, cur: str) -> bool:
        if prev in ("O",) or prev.startswith(("E-", "S-")) or prev == "<start>":
            return cur == "O" or cur.startswith(("B-", "S-"))
        # prev is B-t or I-t: must continue or close the same entity
        t = prev.split("-", 1)[1]
        return cur in (f"I-{t}", f"E-{t}")

    def _may_end(self, label: str) -> bool:
        return label == "O" or label.startswith(("E-", "S-"))

    def transition_mask(self) -> np.ndarray:
        """[n+2, n+2] additive mask: 0 where legal, -inf where illegal."""
        m = np.full((self.n + 2, self.n + 2), NEG_INF, dtype=DTYPE)
        for i, a in enumerate(self.labels):
            for j, b in enumerate(self.labels):
                if self._may_follow(a, b):
                    m[i, j] = 0.0
            if self._may_end(a):
                m[i, self.stop] = 0.0
        for j, b in enumerate(self.labels):
            if self._may_follow("<start>", b):
                m[self.start, j] = 0.0
        m[self.start, self.stop] = 0.0  # empty sequence
        return m


def crf_log_partition(emissions: Tensor, trans: Tensor, labels: BioesLabels,
                      mask: np.ndarray | None = None) -> Tensor:
    """log Z via the forward algorithm; emissions [T, L], trans [L+2, L+2]."""
    if mask is None:
        mask = labels.transition_mask()
    total = trans + Tensor(mask)
    n = labels.n
    t_len = emissions.shape[0]
    start_row = narrow(total, 0, labels.start, labels.start + 1).reshape(-1)
    start_to_label = narrow(start_row, 0, 0, n)
    inner = narrow(narrow(total, 0, 0, n), 1, 0, n)
    stop_col = narrow(narrow(total, 1, labels.stop, labels.stop + 1), 0, 0, n)
    alpha = narrow(emissions, 0, 0, 1).reshape(-1) + start_to_label
    for t in range(1, t_len):
        emis = narrow(emissions, 0, t, t + 1).reshape(-1)
        alpha = logsumexp(alpha.reshape(n, 1) + inner, axis=0) + emis
    return logsumexp(alpha + stop_col.reshape(-1), axis=0)


def crf_gold_score(emissions: Tensor, trans: Tensor, labels: BioesLabels,
                   tags: list[int]) -> Tensor:
    t_len = len(tags)
    rows = np.arange(t_len)
    score = gather_rc(emissions, rows, np.asarray(tags, dtype=np.intp)).sum()
    prev = [labels.start] + list(tags[:-1])
    score = score + gather_rc(trans, np.asarray(prev, dtype=np.intp),
                              np.asarray(tags, dtype=np.intp)).sum()
    score = score + gather_rc(trans, [tags[-1]], [labels.stop]).sum()
    return score


def crf_nll(emissions: Tensor, trans: Tensor, labels: BioesLabels,
            tags: list[int]) -> Tensor:
    """Negative log-likelihood: log Z minus the gold path score."""
    return crf_log_partition(emissions, trans, labels) - \
        crf_gold_score(emissions, trans, labels, tags)


def crf_viterbi(emissions: np.ndarray, trans: np.ndarray,
                labels: BioesLabels) -> tuple[list[int], float]:
    """Best legal path and its score.  Backtracking keeps the first (i.e.
    smallest) label id on ties."""
    total = trans + labels.transition_mask()
    n = labels.n
    t_len = emissions.shape[0]
    delta = emissions[0] + total[labels.start, :n]
    back = np.zeros((t_len, n), dtype=np.intp)
    for t in range(1, t_len):
        cand = delta[:, None] + total[:n, :n]
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(n)] + emissions[t]
    final = delta + total[:n, labels.stop]
    last = int(np.argmax(final))
    path = [last]
    for t in range(t_len - 1, 0, -1):
        last = int(back[t, last])
        path.append(last)
    path.reverse()
    return path, float(np.max(final))


@dataclass
class EntitySpan:
    type: str
    start: int  # inclusive token index
    end: int    # inclusive token index

    def key(self) -> tuple[str, int, int]:
        return (self.type, self.start, self.end)


def decode_bioes(tags: list[str]) -> tuple[list[EntitySpan], int]:
    """Spans from a BIOES tag sequence.

    Illegal runs (only reachable when tags do not come from Viterbi) are
    dropped, each counted once in the returned repair counter.
    """
    spans: list[EntitySpan] = []
    repairs = 0
    open_type: str | None = None
    open_start = 0
    for i, tag in enumerate(tags):
        if tag == "O":
            if open_type is not None:
                repairs += 1
                open_type = None
            continue
        kind, _, etype = tag.partition("-")
        if kind == "S":
            if open_type is not None:
                repairs += 1
                open_type = None
            spans.append(EntitySpan(etype, i, i))
        elif kind == "B":
            if open_type is not None:
                repairs += 1
            open_type, open_start = etype, i
        elif kind == "I":
            if open_type != etype:
                repairs += 1
                open_type = None
        elif kind == "E":
            if open_type == etype:
                spans.append(EntitySpan(etype, open_start, i))
                open_type = None
            else:
                repairs += 1
                open_type = None
        else:
            repairs += 1
    if open_type is not None:
        repairs += 1
    return spans, repairs


def bioes_to_spans(tags: list[str]) -> list[EntitySpan]:
    return decode_bioes(tags)[0]


def spans_to_bioes(spans: list[EntitySpan], length: int) -> list[str]:
    tags = ["O"] * length
    for span in spans:
        if span.start == span.end:
            tags[span.start] = f"S-{span.type}"
        else:
            tags[span.start] = f"B-{span.type}"
            for i in range(span.start + 1, span.end):
                tags[i] = f"I-{span.type}"
            tags[span.end] = f"E-{span.type}"
    return tags


def bio_to_bioes(tags: list[str]) -> list[str]:
    """Deterministic, invertible upgrade of BIO tags to BIOES."""
    out = []
    for i, tag in enumerate(tags):
        if tag == "O":
            out.append(tag)
            continue
        kind, _, etype = tag.partition("-")
        nxt = tags[i + 1] if i + 1 < len(tags) else "O"
        continues = nxt == f"I-{etype}"
        if kind == "B":
            out.append(f"B-{etype}" if continues else f"S-{etype}")
        elif kind == "I":
            out.append(f"I-{etype}" if continues else f"E-{etype}")
        else:
            raise ValueError(f"not a BIO tag: {tag!r}")
    return out


def bioes_to_bio(tags: list[str]) -> list[str]:
    out = []
    for tag in tags:
        if tag == "O":
            out.append(tag)
            continue
        kind, _, etype = tag.partition("-")
        out.append(f"B-{etype}" if kind in ("B", "S") else f"I-{etype}")
    return out


# ---------------------------------------------------------------------------
# corpus format: token TAB tag, blank line between sentences


def parse_ner_corpus(text: str) -> list[tuple[list[str], list[str]]]:
    sentences = []
    tokens: list[str] = []
    tags: list[str] = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line:
            if tokens:
                sentences.append((tokens, tags))
                tokens, tags = [], []
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(
                f"line {lineno}: expected 'token<TAB>tag', got {line!r}")
        tokens.append(parts[0])
        tags.append(parts[1])
    if tokens:
        sentences.append((tokens, tags))
    return sentences


def serialize_ner_corpus(sentences: list[tuple[list[str], list[str]]]) -> str:
    blocks = []
    for tokens, tags in sentences:
        blocks.append("\n".join(f"{tok}\t{tag}"
                                for tok, tag in zip(tokens, tags)))
    return "\n\n".join(blocks) + "\n" if blocks else ""


def _looks_like_bio(tag_sets: set[str]) -> bool:
    kinds = {t.split("-", 1)[0] for t in tag_sets if t != "O"}
    return kinds <= {"B", "I"} and bool(kinds)


@dataclass
class NerHead:
    store: ParamStore
    labels: BioesLabels

    def meta(self) -> dict:
        return {"types": self.labels.types}

    @classmethod
    def from_meta(cls, store: ParamStore, meta: dict) -> "NerHead":
        return cls(store, BioesLabels(meta["types"]))


def init_ner_head(store: ParamStore, enc_cfg: EncoderConfig,
                  labels: BioesLabels, rng, hidden: int = 32) -> NerHead:
    init_ffn(store, f"{PFX}.emit", enc_cfg.d_model, hidden, labels.n, rng)
    store.add(f"{PFX}.trans", np.zeros((labels.n + 2, labels.n + 2)))
    return NerHead(store, labels)


def _token_reps(base: ParamStore, enc_cfg: EncoderConfig,
                adapter: AdapterSet | None, vocab: SubwordVocab,
                tokens: list[str], max_len: int | None):
    pieces: list[int] = []
    conts: list[int] = []
    t2p: list[list[int]] = []
    for tok in tokens:
        seq = tokenize(vocab, tok)
        idx = list(range(len(pieces), len(pieces) + len(seq)))
        pieces.extend(seq.piece_ids)
        conts.extend(seq.continuation_flags())
        t2p.append(idx)
    enc = encode(base, enc_cfg, pieces, adapter, max_len, continuations=conts)
    pool = np.zeros((len(tokens), len(enc)))
    for t, idx in enumerate(t2p):
        if idx:
            pool[t, idx] = 1.0 / len(idx)
    return Tensor(pool) @ enc.reps


def ner_emissions(head: NerHead, base: ParamStore, enc_cfg: EncoderConfig,
                  adapter: AdapterSet | None, vocab: SubwordVocab,
                  tokens: list[str], max_len: int | None = None) -> Tensor:
    reps = _token_reps(base, enc_cfg, adapter, vocab, tokens, max_len)
    return ffn(head.store, f"{PFX}.emit", reps)


def predict_ner(head: NerHead, base: ParamStore, enc_cfg: EncoderConfig,
                adapter: AdapterSet | None, vocab: SubwordVocab,
                tokens: list[str], max_len: int | None = None) -> list[str]:
    if not tokens:
        return []
    emissions = ner_emissions(head, base, enc_cfg, adapter, vocab, tokens,
                              max_len)
    path, _ = crf_viterbi(emissions.data, head.store[f"{PFX}.trans"].data,
                          head.labels)
    return [head.labels.labels[i] for i in path]


def train_ner(bundle: ParamStore, base: ParamStore, enc_cfg: EncoderConfig,
              adapter: AdapterSet | None, vocab: SubwordVocab,
              corpus: list[tuple[list[str], list[str]]], head: NerHead,
              epochs: int, lr: float, rng,
              max_len: int | None = None) -> list[float]:
    """CRF negative log-likelihood over gold BIOES tags.  BIO-style corpora
    are converted on ingestion."""
    prepared = []
    for tokens, tags in corpus:
        if _looks_like_bio(set(tags)):
            tags = bio_to_bioes(tags)
        prepared.append((tokens, [head.labels.id_of(t) for t in tags]))
    total_steps = epochs * max(1, len(prepared))
    opt = Adam(bundle, lr=lr, warmup_steps=max(1, total_steps // 10))
    trans = head.store[f"{PFX}.trans"]
    losses = []
    order = np.arange(len(prepared))
    for _ in range(epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        for i in order:
            tokens, tag_ids = prepared[int(i)]
            bundle.zero_grad()
            emissions = ner_emissions(head, base, enc_cfg, adapter, vocab,
                                      tokens, max_len)
            loss = crf_nll(emissions, trans, head.labels, tag_ids)
            loss.backward()
            opt.step()
            epoch_loss += loss.item()
        losses.append(epoch_loss / max(1, len(prepared)))
    return losses


def collect_types(corpus: list[tuple[list[str], list[str]]]) -> list[str]:
    types = set()
    for _, tags in corpus:
        for tag in tags:
            if tag != "O":
                types.add(tag.split("-", 1)[1])
    return sorted(types)
