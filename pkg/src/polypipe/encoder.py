"""Shared transformer encoder with plug-in bottleneck adapters.

One encoder (embeddings + transformer layers) is trained once on a masked
denoising objective, then frozen.  Every (language, component) pair owns an
AdapterSet: per-layer Down/Up projections with a private layer norm and a
residual connection.  Exactly one set is active at a time; switching is O(1)
and never touches the base weights.  Long inputs are processed in
consecutive chunks of at most ``max_len`` positions (two of which are the
<s>/</s> sentinels), and the per-chunk outputs are concatenated so every
wordpiece gets exactly one representation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from polypipe.neural import ParamStore, Tensor, Adam, concat, gather_rows, narrow, stack
from polypipe.neural.layers import (
    attention_layer, dense, init_attention_layer, init_dense, init_embedding,
    init_layer_norm, layer_norm_p,
)
from polypipe.neural.tensor import cross_entropy
from polypipe.subword import BOS_ID, EOS_ID, UNK_ID, chunk

logger = logging.getLogger(__name__)

COMPONENTS = ("splitter", "tagparse", "ner")


class ActivationError(KeyError):
    pass


@dataclass
class EncoderConfig:
    vocab_size: int
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 128
    max_len: int = 512
    adapter_bottleneck: int = 16
    # Positions 0..trained_window-1 saw masked-denoising pretraining; working
    # chunks default to this window even though max_len positions exist.
    trained_window: int | None = None

    def to_dict(self) -> dict:
        return dict(vocab_size=self.vocab_size, d_model=self.d_model,
                    n_layers=self.n_layers, n_heads=self.n_heads,
                    d_ff=self.d_ff, max_len=self.max_len,
                    adapter_bottleneck=self.adapter_bottleneck,
                    trained_window=self.trained_window)

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**d)


ENC_PREFIX = "enc."


def init_encoder(store: ParamStore, cfg: EncoderConfig, rng) -> None:
    init_embedding(store, "enc.embed", cfg.vocab_size, cfg.d_model, rng)
    init_embedding(store, "enc.pos", cfg.max_len, cfg.d_model, rng)
    # Additive input feature for "##"-marked continuation pieces: the marker
    # is part of a wordpiece's stored identity.
    init_embedding(store, "enc.cont", 2, cfg.d_model, rng)
    for i in range(cfg.n_layers):
        init_attention_layer(store, f"enc.l{i}", cfg.d_model, cfg.d_ff, rng)


@dataclass
class AdapterSet:
    """Per-layer Down/Up projections for one (language, component) pair."""

    language: str
    component: str
    bottleneck: int
    store: ParamStore
    prefix: str

    def layer_prefix(self, layer: int) -> str:
        return f"{self.prefix}.l{layer}"


def init_adapter_set(store: ParamStore, cfg: EncoderConfig, language: str,
                     component: str, rng,
                     bottleneck: int | None = None) -> AdapterSet:
    """Create adapter weights.  Up starts at zero so the whole stack is the
    identity function until training moves it."""
    b = bottleneck or cfg.adapter_bottleneck
    if b >= cfg.d_model:
        raise ValueError("adapter bottleneck must be smaller than model dim")
    prefix = f"ad.{component}"
    for i in range(cfg.n_layers):
        lp = f"{prefix}.l{i}"
        init_layer_norm(store, f"{lp}.ln", cfg.d_model)
        store.add(f"{lp}.down.w", rng.normal(0.0, 0.02, size=(cfg.d_model, b)))
        store.add(f"{lp}.down.b", np.zeros(b))
        init_dense(store, f"{lp}.up", b, cfg.d_model, rng, zero=True)
    return AdapterSet(language, component, b, store, prefix)


def adapter_forward(store: ParamStore, layer_prefix: str, r: Tensor) -> Tensor:
    """Bottleneck transform with residual: Up(ReLU(Down(norm(r)))) + r."""
    c = layer_norm_p(store, f"{layer_prefix}.ln", r)
    u = dense(store, f"{layer_prefix}.up",
              dense(store, f"{layer_prefix}.down", c).relu())
    return u + r


@dataclass
class EncodedText:
    """Per-wordpiece representations plus each chunk's <s> vector."""

    reps: Tensor            # [K, d]
    cls: Tensor             # [n_chunks, d]
    chunk_ranges: list[tuple[int, int]]

    def __len__(self) -> int:
        return self.reps.shape[0]


def encode(base: ParamStore, cfg: EncoderConfig, piece_ids,
           adapter: AdapterSet | None = None,
           max_len: int | None = None,
           continuations=None) -> EncodedText:
    """Run the encoder over a wordpiece id sequence, chunking as needed.

    ``continuations`` carries the per-piece "##" flags; sentinels count as
    substring-initial.
    """
    ids = np.asarray(piece_ids, dtype=np.intp)
    if ids.size and (ids.min() < 0 or ids.max() >= cfg.vocab_size):
        raise ValueError("piece id out of vocabulary range")
    if continuations is None:
        continuations = np.zeros(ids.size, dtype=np.intp)
    else:
        continuations = np.asarray(continuations, dtype=np.intp)
    limit = max_len or cfg.max_len
    if limit > cfg.max_len:
        raise ValueError("max_len exceeds the encoder's trained positions")
    ranges = chunk(int(ids.size), limit)
    rep_chunks = []
    cls_rows = []
    for start, stop in ranges:
        chunk_ids = np.concatenate(([BOS_ID], ids[start:stop], [EOS_ID]))
        chunk_cont = np.concatenate(([0], continuations[start:stop], [0]))
        t_len = chunk_ids.size
        x = gather_rows(base["enc.embed"], chunk_ids) + \
            gather_rows(base["enc.pos"], np.arange(t_len)) + \
            gather_rows(base["enc.cont"], chunk_cont)
        for i in range(cfg.n_layers):
            hook = None
            if adapter is not None:
                lp = adapter.layer_prefix(i)
                ast = adapter.store
                hook = (lambda r, lp=lp, ast=ast: adapter_forward(ast, lp, r))
            x = attention_layer(base, f"enc.l{i}", x, cfg.n_heads, adapter=hook)
        rep_chunks.append(narrow(x, 0, 1, t_len - 1))
        cls_rows.append(narrow(x, 0, 0, 1).reshape(cfg.d_model))
    if not rep_chunks:
        return EncodedText(Tensor(np.zeros((0, cfg.d_model))),
                           Tensor(np.zeros((0, cfg.d_model))), [])
    reps = rep_chunks[0] if len(rep_chunks) == 1 else concat(rep_chunks, axis=0)
    if not np.isfinite(reps.data).all():
        raise FloatingPointError("non-finite encoder activations")
    return EncodedText(reps, stack(cls_rows, axis=0), ranges)


class AdapterRegistry:
    """Holds registered AdapterSets; at most one is active at a time."""

    def __init__(self):
        self._sets: dict[tuple[str, str], AdapterSet] = {}
        self._active: tuple[str, str] | None = None

    def register(self, aset: AdapterSet) -> None:
        key = (aset.language, aset.component)
        if key in self._sets:
            raise ActivationError(f"adapter set already registered for {key}")
        self._sets[key] = aset

    def registered(self) -> list[tuple[str, str]]:
        return sorted(self._sets)

    def activate(self, language: str, component: str) -> AdapterSet:
        key = (language, component)
        if key not in self._sets:
            raise ActivationError(
                f"no adapter set registered for language={language!r} "
                f"component={component!r}")
        self._active = key
        return self._sets[key]

    def deactivate(self) -> None:
        self._active = None

    @property
    def active(self) -> AdapterSet | None:
        return None if self._active is None else self._sets[self._active]


@dataclass
class PretrainReport:
    steps: int
    losses: list[float] = field(default_factory=list)


def pretrain_encoder(store: ParamStore, cfg: EncoderConfig, corpus_ids,
                     steps: int, rng, seq_len: int = 64, batch: int = 4,
                     lr: float = 1e-3, mask_rate: float = 0.15,
                     corpus_continuations=None) -> PretrainReport:
    """Masked-denoising pretraining: corrupt random pieces to <unk> and
    recover their ids with an output softmax tied to the input embedding.
    Continuation flags are kept on masked positions (they are input
    identity, not a prediction target).  The caller freezes the encoder
    afterwards."""
    ids = np.asarray(corpus_ids, dtype=np.intp)
    if ids.size < seq_len + 1:
        raise ValueError("pretraining corpus too small for the window size")
    if corpus_continuations is None:
        conts = np.zeros(ids.size, dtype=np.intp)
    else:
        conts = np.asarray(corpus_continuations, dtype=np.intp)
    opt = Adam(store, lr=lr, warmup_steps=max(1, steps // 10))
    report = PretrainReport(steps)
    embed = store["enc.embed"]
    for _ in range(steps):
        store.zero_grad()
        total = None
        for _ in range(batch):
            start = int(rng.integers(0, ids.size - seq_len))
            window = ids[start:start + seq_len].copy()
            window_cont = conts[start:start + seq_len]
            n_mask = max(1, int(round(mask_rate * seq_len)))
            positions = rng.choice(seq_len, size=n_mask, replace=False)
            targets = window[positions].copy()
            window[positions] = UNK_ID
            enc = encode(store, cfg, window, adapter=None,
                         max_len=cfg.max_len, continuations=window_cont)
            masked = gather_rows(enc.reps, positions)
            logits = masked @ embed.T
            loss = cross_entropy(logits, targets)
            total = loss if total is None else total + loss
        total = total * (1.0 / batch)
        total.backward()
        opt.step()
        report.losses.append(total.item())
    return report
