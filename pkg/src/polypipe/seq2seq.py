"""Character-level transduction: multi-word token expansion and lemmatization.

Both tasks share one engine: a frequency dictionary over exact training
inputs consulted first, with a recurrent encoder-decoder (attention over
encoder states, greedy decoding) as the fallback for unseen forms, and
identity as the fallback of last resort.  The lemmatizer conditions on the
word's predicted UPOS tag; the expander conditions on the token surface
only.  Multi-word expansions are space-joined word sequences.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from polypipe.neural import Adam, ParamStore, Tensor, concat, stack
from polypipe.neural.layers import (
    bilinear_attention, dense, gru_step, init_bilinear_attention, init_dense,
    init_embedding, init_gru,
)
from polypipe.neural.tensor import cross_entropy, gather_rows

SEPARATOR = " "

# Character inventory specials.  End-of-sequence deliberately has id 0 so an
# untrained (zero-logit) decoder stops immediately and the identity fallback
# takes over.
CHR_EOS, CHR_BOS, CHR_UNK = "\x00", "\x01", "\x02"
EOS_ID, BOS_ID, UNK_ID = 0, 1, 2
NO_TAG = "<none>"


@dataclass
class TransducerConfig:
    char_dim: int = 10
    hidden: int = 20
    epochs: int = 60
    lr: float = 5e-3


@dataclass
class Transduction:
    input: str
    output: str
    source: str  # "dictionary" | "model" | "identity"


@dataclass
class TransducerModel:
    mode: str                       # "mwt" | "lemma"
    chars: list[str]
    tags: list[str]
    cfg: TransducerConfig
    store: ParamStore
    prefix: str
    dictionary: dict[tuple[str, str], str] = field(default_factory=dict)
    lower_dictionary: dict[tuple[str, str], str] = field(default_factory=dict)

    def __post_init__(self):
        self._char_index = {c: i for i, c in enumerate(self.chars)}
        self._tag_index = {t: i for i, t in enumerate(self.tags)}

    def char_id(self, ch: str) -> int:
        return self._char_index.get(ch, UNK_ID)

    def tag_id(self, tag: str) -> int:
        return self._tag_index.get(tag, 0)

    def meta(self) -> dict:
        return {
            "mode": self.mode,
            "chars": self.chars,
            "tags": self.tags,
            "cfg": vars(self.cfg),
            "dictionary": [[k[0], k[1], v] for k, v in sorted(self.dictionary.items())],
            "lower_dictionary": [[k[0], k[1], v]
                                 for k, v in sorted(self.lower_dictionary.items())],
        }

    @classmethod
    def from_meta(cls, store: ParamStore, prefix: str, meta: dict) -> "TransducerModel":
        return cls(meta["mode"], meta["chars"], meta["tags"],
                   TransducerConfig(**meta["cfg"]), store, prefix,
                   {(a, b): c for a, b, c in meta["dictionary"]},
                   {(a, b): c for a, b, c in meta["lower_dictionary"]})


def _init_params(store: ParamStore, prefix: str, n_chars: int, n_tags: int,
                 cfg: TransducerConfig, rng) -> None:
    init_embedding(store, f"{prefix}.chars", n_chars, cfg.char_dim, rng)
    init_embedding(store, f"{prefix}.tags", n_tags, cfg.char_dim, rng)
    init_gru(store, f"{prefix}.enc", cfg.char_dim, cfg.hidden, rng)
    init_gru(store, f"{prefix}.dec", cfg.char_dim, cfg.hidden, rng)
    init_bilinear_attention(store, f"{prefix}.att", cfg.hidden, cfg.hidden, rng)
    init_dense(store, f"{prefix}.out", 2 * cfg.hidden, n_chars, rng, zero=True)


def _encode_chars(model: TransducerModel, text: str, tag: str) -> Tensor:
    store, p, cfg = model.store, model.prefix, model.cfg
    inputs = [gather_rows(store[f"{p}.tags"],
                          [model.tag_id(tag)]).reshape(cfg.char_dim)]
    for ch in text:
        inputs.append(gather_rows(store[f"{p}.chars"],
                                  [model.char_id(ch)]).reshape(cfg.char_dim))
    h = Tensor(np.zeros(cfg.hidden))
    states = []
    for x in inputs:
        h = gru_step(store, f"{p}.enc", x, h)
        states.append(h)
    return stack(states, axis=0)


def _decoder_logits(model: TransducerModel, states: Tensor, prev_id: int,
                    h: Tensor) -> tuple[Tensor, Tensor]:
    store, p, cfg = model.store, model.prefix, model.cfg
    x = gather_rows(store[f"{p}.chars"], [prev_id]).reshape(cfg.char_dim)
    h = gru_step(store, f"{p}.dec", x, h)
    ctx = bilinear_attention(store, f"{p}.att", h, states)
    logits = dense(store, f"{p}.out", concat([h, ctx], axis=0).reshape(1, -1))
    return logits.reshape(-1), h


def teacher_forced_loss(model: TransducerModel, text: str, tag: str,
                        target: str) -> Tensor:
    states = _encode_chars(model, text, tag)
    h = gather_rows(states, [states.shape[0] - 1]).reshape(model.cfg.hidden)
    target_ids = [model.char_id(c) for c in target] + [EOS_ID]
    prev = BOS_ID
    steps = []
    for tid in target_ids:
        logits, h = _decoder_logits(model, states, prev, h)
        steps.append(logits)
        prev = tid
    return cross_entropy(stack(steps, axis=0), target_ids)


def decode_greedy(model: TransducerModel, text: str, tag: str = NO_TAG) -> str:
    """Greedy decoding capped at 2x the input length plus 5 steps."""
    states = _encode_chars(model, text, tag)
    h = gather_rows(states, [states.shape[0] - 1]).reshape(model.cfg.hidden)
    prev = BOS_ID
    out: list[str] = []
    for _ in range(2 * len(text) + 5):
        logits, h = _decoder_logits(model, states, prev, h)
        prev = int(np.argmax(logits.data))
        if prev == EOS_ID:
            break
        out.append(model.chars[prev] if prev > UNK_ID else "")
    return "".join(out)


def train_transducer(pairs: list[tuple[str, str | None, str]],
                     mode: str, rng,
                     cfg: TransducerConfig | None = None,
                     store: ParamStore | None = None,
                     prefix: str | None = None) -> TransducerModel:
    """Train on (input, context_tag, output) triples.

    The dictionary maps each exact (input, tag) to its most frequent
    training output, ties going to the lexicographically smallest.  The
    neural fallback is trained with teacher forcing.
    """
    if not pairs:
        raise ValueError("empty training set")
    cfg = cfg or TransducerConfig()
    prefix = prefix or mode
    store = store if store is not None else ParamStore()
    norm_pairs = [(i, t if t is not None else NO_TAG, o) for i, t, o in pairs]

    votes: dict[tuple[str, str], Counter] = {}
    lower_votes: dict[tuple[str, str], Counter] = {}
    for inp, tag, out in norm_pairs:
        votes.setdefault((inp, tag), Counter())[out] += 1
        lower_votes.setdefault((inp.lower(), tag), Counter())[out] += 1

    def winner(counter: Counter) -> str:
        return sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]

    dictionary = {k: winner(c) for k, c in votes.items()}
    lower_dictionary = {k: winner(c) for k, c in lower_votes.items()}

    chars = [CHR_EOS, CHR_BOS, CHR_UNK] + sorted(
        {c for inp, _, out in norm_pairs for c in inp + out})
    tags = sorted({t for _, t, _ in norm_pairs})
    _init_params(store, prefix, len(chars), len(tags), cfg, rng)
    model = TransducerModel(mode, chars, tags, cfg, store, prefix,
                            dictionary, lower_dictionary)

    unique = sorted(set(norm_pairs))
    opt = Adam(store, lr=cfg.lr,
               warmup_steps=max(1, cfg.epochs * len(unique) // 10))
    order = np.arange(len(unique))
    for _ in range(cfg.epochs):
        rng.shuffle(order)
        for i in order:
            inp, tag, out = unique[int(i)]
            store.zero_grad()
            loss = teacher_forced_loss(model, inp, tag, out)
            loss.backward()
            opt.step()
    return model


def transduce(model: TransducerModel, text: str,
              tag: str | None = None) -> Transduction:
    """Dictionary first, then the neural model, then identity.

    Never fails and never returns an empty output.
    """
    tag = tag if tag is not None else NO_TAG
    hit = model.dictionary.get((text, tag))
    if hit is not None:
        return Transduction(text, hit, "dictionary")
    if model.mode == "lemma":
        hit = model.lower_dictionary.get((text.lower(), tag))
        if hit is not None:
            return Transduction(text, hit, "dictionary")
        if len(text) > 1 and text.isupper():
            return Transduction(text, text, "identity")
    out = decode_greedy(model, text, tag)
    if out.strip():
        return Transduction(text, out, "model")
    return Transduction(text, text, "identity")


def expand_mwt(model: TransducerModel, surface: str) -> list[str]:
    """Expand a multi-word token surface into its syntactic words."""
    result = transduce(model, surface)
    words = [w for w in result.output.split(SEPARATOR) if w]
    return words or [surface]
