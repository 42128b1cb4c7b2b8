"""Joint POS, morphology, and dependency head over one sentence.

Word vectors are the mean of their wordpiece representations.  Four
feed-forward projections produce tag logits (UPOS, XPOS, morphological
feature strings as composite classes) and the dependency representation;
arc and label scores come from two biaffine forms over role-projected
vectors, with the sentence's first <s> vector standing in for the root.
Trees are decoded with the single-root maximum-arborescence decoder.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from polypipe import conllu
from polypipe.cle import cle_decode
from polypipe.encoder import AdapterSet, EncodedText, EncoderConfig, encode
from polypipe.neural import Adam, ParamStore, Tensor, concat, pair_bilinear
from polypipe.neural.layers import dense, init_dense, init_ffn, ffn, xavier_uniform
from polypipe.neural.tensor import (
    cross_entropy, gather_rc, gather_rows, log_softmax, narrow,
)
from polypipe.subword import SubwordVocab, tokenize

EMPTY = conllu.EMPTY


class TagVocab:
    """String-class inventory; id 0 is the most frequent training tag."""

    def __init__(self, tags: list[str]):
        if not tags:
            raise ValueError("empty tag vocabulary")
        self.tags = list(tags)
        self.index = {t: i for i, t in enumerate(self.tags)}

    @classmethod
    def from_counts(cls, counts: Counter) -> "TagVocab":
        ordered = sorted(counts, key=lambda t: (-counts[t], t))
        return cls(ordered)

    def __len__(self) -> int:
        return len(self.tags)

    def id_of(self, tag: str) -> int:
        return self.index.get(tag, 0)

    def tag_of(self, i: int) -> str:
        return self.tags[i]


@dataclass
class HeadConfig:
    tag_hidden: int = 32
    dep_hidden: int = 32
    arc_dim: int = 24
    label_dim: int = 12


@dataclass
class TagParseHead:
    store: ParamStore
    cfg: HeadConfig
    upos: TagVocab
    xpos: TagVocab | None      # None when the treebank carries no XPOS
    ufeats: TagVocab
    deprel: TagVocab

    def meta(self) -> dict:
        return {
            "cfg": vars(self.cfg),
            "upos": self.upos.tags,
            "xpos": None if self.xpos is None else self.xpos.tags,
            "ufeats": self.ufeats.tags,
            "deprel": self.deprel.tags,
        }

    @classmethod
    def from_meta(cls, store: ParamStore, meta: dict) -> "TagParseHead":
        return cls(store, HeadConfig(**meta["cfg"]), TagVocab(meta["upos"]),
                   None if meta["xpos"] is None else TagVocab(meta["xpos"]),
                   TagVocab(meta["ufeats"]), TagVocab(meta["deprel"]))


PFX = "tagparse"


def init_tagparse_head(store: ParamStore, enc_cfg: EncoderConfig,
                       head_cfg: HeadConfig, upos: TagVocab,
                       xpos: TagVocab | None, ufeats: TagVocab,
                       deprel: TagVocab, rng) -> TagParseHead:
    d = enc_cfg.d_model
    h = head_cfg.tag_hidden
    init_ffn(store, f"{PFX}.upos", d, h, len(upos), rng)
    if xpos is not None:
        init_ffn(store, f"{PFX}.xpos", d, h, len(xpos), rng)
    init_ffn(store, f"{PFX}.ufeats", d, h, len(ufeats), rng)
    init_ffn(store, f"{PFX}.dep", d, head_cfg.dep_hidden, d, rng)
    a, ldim = head_cfg.arc_dim, head_cfg.label_dim
    init_dense(store, f"{PFX}.arc.head", d, a, rng)
    init_dense(store, f"{PFX}.arc.dep", d, a, rng)
    store.add(f"{PFX}.arc.u", xavier_uniform(rng, a, a))
    store.add(f"{PFX}.arc.wh", np.zeros(a))
    store.add(f"{PFX}.arc.wd", np.zeros(a))
    store.add(f"{PFX}.arc.bias", np.zeros(1))
    init_dense(store, f"{PFX}.label.head", d, ldim, rng)
    init_dense(store, f"{PFX}.label.dep", d, ldim, rng)
    n_rel = len(deprel)
    store.add(f"{PFX}.label.u",
              np.stack([xavier_uniform(rng, ldim, ldim) for _ in range(n_rel)]))
    store.add(f"{PFX}.label.wh", np.zeros((n_rel, ldim)))
    store.add(f"{PFX}.label.wd", np.zeros((n_rel, ldim)))
    store.add(f"{PFX}.label.bias", np.zeros(n_rel))
    return TagParseHead(store, head_cfg, upos, xpos, ufeats, deprel)


def word_vectors(enc: EncodedText, word_to_pieces: list[list[int]],
                 d_model: int) -> tuple[Tensor, Tensor]:
    """Mean-pool wordpiece representations into word vectors.

    Returns ([N, d] word matrix, [d] root vector).  The root vector is the
    <s> representation of the sentence's first chunk.
    """
    if not word_to_pieces:
        raise ValueError("empty word alignment")
    k = len(enc)
    pool = np.zeros((len(word_to_pieces), k))
    for w, pieces in enumerate(word_to_pieces):
        if not pieces:
            raise ValueError(f"word {w} covers no wordpieces")
        pool[w, pieces] = 1.0 / len(pieces)
    words = Tensor(pool) @ enc.reps
    cls = enc.cls.reshape(enc.cls.shape[0], d_model)
    root = gather_rows(cls, [0]).reshape(d_model)
    return words, root


def tag_logits(head: TagParseHead, words: Tensor):
    """Per-word logits for the three tag tasks; XPOS may be absent."""
    up = ffn(head.store, f"{PFX}.upos", words)
    xp = None if head.xpos is None else ffn(head.store, f"{PFX}.xpos", words)
    uf = ffn(head.store, f"{PFX}.ufeats", words)
    return up, xp, uf


def _dep_space(head: TagParseHead, words: Tensor, root: Tensor) -> Tensor:
    dep_repr = ffn(head.store, f"{PFX}.dep", words)
    return concat([root.reshape(1, -1), dep_repr], axis=0)


def biaffine_scores(head: TagParseHead, words: Tensor, root: Tensor) -> Tensor:
    """Arc score matrix [N, N+1]: entry (j, i) scores head i for word j+1."""
    store = head.store
    r = _dep_space(head, words, root)            # [N+1, d]
    h = dense(store, f"{PFX}.arc.head", r).relu()    # [N+1, a]
    d = dense(store, f"{PFX}.arc.dep", r).relu()     # [N+1, a]
    d = narrow(d, 0, 1, d.shape[0])                  # dependents are 1..N
    bilinear = (d @ store[f"{PFX}.arc.u"]) @ h.T     # [N, N+1]
    head_term = (h @ store[f"{PFX}.arc.wh"]).reshape(1, -1)
    dep_term = (d @ store[f"{PFX}.arc.wd"]).reshape(-1, 1)
    return bilinear + head_term + dep_term + store[f"{PFX}.arc.bias"]


def label_logits(head: TagParseHead, words: Tensor, root: Tensor,
                 heads: list[int]) -> Tensor:
    """Per-word relation logits [N, L] scored on the given head arcs."""
    store = head.store
    r = _dep_space(head, words, root)
    hh = dense(store, f"{PFX}.label.head", r).relu()
    dd = dense(store, f"{PFX}.label.dep", r).relu()
    sel_h = gather_rows(hh, np.asarray(heads, dtype=np.intp))
    sel_d = narrow(dd, 0, 1, dd.shape[0])
    out = pair_bilinear(sel_h, sel_d, store[f"{PFX}.label.u"])
    out = out + sel_h @ store[f"{PFX}.label.wh"].T
    out = out + sel_d @ store[f"{PFX}.label.wd"].T
    return out + store[f"{PFX}.label.bias"]


@dataclass
class ParseResult:
    upos: list[str]
    xpos: list[str]
    ufeats: list[str]
    heads: list[int]
    deprels: list[str]
    arc_scores: np.ndarray = field(repr=False, default=None)


def _to_square(arc: np.ndarray) -> np.ndarray:
    """Pad the [N, N+1] arc matrix with a root row to get [(N+1), (N+1)]."""
    n = arc.shape[0]
    s = np.full((n + 1, n + 1), 0.0)
    s[1:, :] = arc
    return s


def parse_sentence(head: TagParseHead, enc: EncodedText,
                   word_to_pieces: list[list[int]],
                   d_model: int) -> ParseResult:
    words, root = word_vectors(enc, word_to_pieces, d_model)
    up, xp, uf = tag_logits(head, words)
    arc = biaffine_scores(head, words, root)
    square = _to_square(arc.data)
    heads = cle_decode(square)
    lab = label_logits(head, words, root, heads)
    deprels = [head.deprel.tag_of(int(i)) for i in np.argmax(lab.data, axis=1)]
    upos = [head.upos.tag_of(int(i)) for i in np.argmax(up.data, axis=1)]
    if xp is None:
        xpos = [EMPTY] * len(heads)
    else:
        xpos = [head.xpos.tag_of(int(i)) for i in np.argmax(xp.data, axis=1)]
    ufeats = [head.ufeats.tag_of(int(i)) for i in np.argmax(uf.data, axis=1)]
    return ParseResult(upos, xpos, ufeats, heads, deprels, square)


def sentence_loss(head: TagParseHead, enc: EncodedText,
                  word_to_pieces: list[list[int]], d_model: int,
                  gold_upos, gold_xpos, gold_ufeats, gold_heads,
                  gold_deprels) -> Tensor:
    """Sum of the five cross-entropies: three tag tasks, head selection
    (per-dependent softmax over candidate heads), and relation labels on
    the gold arcs."""
    words, root = word_vectors(enc, word_to_pieces, d_model)
    up, xp, uf = tag_logits(head, words)
    loss = cross_entropy(up, gold_upos)
    if xp is not None:
        loss = loss + cross_entropy(xp, gold_xpos)
    loss = loss + cross_entropy(uf, gold_ufeats)
    arc = biaffine_scores(head, words, root)
    arc_logp = log_softmax(arc, axis=1)
    n = len(gold_heads)
    picked = gather_rc(arc_logp, np.arange(n), np.asarray(gold_heads, dtype=np.intp))
    loss = loss + -picked.sum() * (1.0 / n)
    lab = label_logits(head, words, root, gold_heads)
    loss = loss + cross_entropy(lab, gold_deprels)
    return loss


# ---------------------------------------------------------------------------
# training over a treebank


@dataclass
class TagParseExample:
    piece_ids: list[int]
    continuations: list[int]
    word_to_pieces: list[list[int]]
    upos: list[int]
    xpos: list[int]
    ufeats: list[int]
    heads: list[int]
    deprels: list[int]


def build_tag_vocabs(sentences: list[conllu.Sentence]):
    upos_c, xpos_c, ufeats_c, rel_c = Counter(), Counter(), Counter(), Counter()
    for sent in sentences:
        for row in sent.rows:
            upos_c[row.upos] += 1
            xpos_c[row.xpos] += 1
            ufeats_c[row.feats] += 1
            rel_c[row.deprel] += 1
    xpos = None if set(xpos_c) == {EMPTY} else TagVocab.from_counts(xpos_c)
    return (TagVocab.from_counts(upos_c), xpos,
            TagVocab.from_counts(ufeats_c), TagVocab.from_counts(rel_c))


def make_examples(sentences: list[conllu.Sentence], vocab: SubwordVocab,
                  head: TagParseHead) -> list[TagParseExample]:
    examples = []
    for sent in sentences:
        pieces: list[int] = []
        conts: list[int] = []
        w2p: list[list[int]] = []
        for row in sent.rows:
            seq = tokenize(vocab, row.form)
            idx = list(range(len(pieces), len(pieces) + len(seq)))
            pieces.extend(seq.piece_ids)
            conts.extend(seq.continuation_flags())
            w2p.append(idx)
        examples.append(TagParseExample(
            pieces, conts, w2p,
            [head.upos.id_of(r.upos) for r in sent.rows],
            [0 if head.xpos is None else head.xpos.id_of(r.xpos)
             for r in sent.rows],
            [head.ufeats.id_of(r.feats) for r in sent.rows],
            [r.head for r in sent.rows],
            [head.deprel.id_of(r.deprel) for r in sent.rows]))
    return examples


def train_tagparse(bundle: ParamStore, base: ParamStore, enc_cfg: EncoderConfig,
                   adapter: AdapterSet | None,
                   examples: list[TagParseExample], head: TagParseHead,
                   epochs: int, lr: float, rng,
                   max_len: int | None = None) -> list[float]:
    """Joint training; only the bundle store (adapters + head) is updated."""
    total_steps = epochs * max(1, len(examples))
    opt = Adam(bundle, lr=lr, warmup_steps=max(1, total_steps // 10))
    losses = []
    order = np.arange(len(examples))
    for _ in range(epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        for i in order:
            ex = examples[int(i)]
            bundle.zero_grad()
            enc = encode(base, enc_cfg, ex.piece_ids, adapter, max_len,
                         continuations=ex.continuations)
            loss = sentence_loss(head, enc, ex.word_to_pieces, enc_cfg.d_model,
                                 ex.upos, ex.xpos, ex.ufeats, ex.heads,
                                 ex.deprels)
            loss.backward()
            opt.step()
            epoch_loss += loss.item()
        losses.append(epoch_loss / max(1, len(examples)))
    return losses


def predict_tagparse(head: TagParseHead, base: ParamStore,
                     enc_cfg: EncoderConfig, adapter: AdapterSet | None,
                     vocab: SubwordVocab, word_forms: list[str],
                     max_len: int | None = None) -> ParseResult:
    pieces: list[int] = []
    conts: list[int] = []
    w2p: list[list[int]] = []
    for form in word_forms:
        seq = tokenize(vocab, form)
        idx = list(range(len(pieces), len(pieces) + len(seq)))
        pieces.extend(seq.piece_ids)
        conts.extend(seq.continuation_flags())
        w2p.append(idx)
    enc = encode(base, enc_cfg, pieces, adapter, max_len, continuations=conts)
    return parse_sentence(head, enc, w2p, enc_cfg.d_model)
