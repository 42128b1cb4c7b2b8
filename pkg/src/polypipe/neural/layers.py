"""Layer constructors and forward functions over a ParamStore.

A "module" here is a name prefix in the store plus a forward function;
``init_*`` registers parameters, the matching forward reads them.  This
keeps every weight visible to freezing, checksumming, and serialization.
"""

from __future__ import annotations

import math

import numpy as np

from polypipe.neural.params import ParamStore
from polypipe.neural.tensor import Tensor, layer_norm, softmax, concat


def xavier_uniform(rng, d_in: int, d_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-limit, limit, size=(d_in, d_out))


def init_dense(store: ParamStore, name: str, d_in: int, d_out: int, rng,
               zero: bool = False) -> None:
    w = np.zeros((d_in, d_out)) if zero else xavier_uniform(rng, d_in, d_out)
    store.add(name + ".w", w)
    store.add(name + ".b", np.zeros(d_out))


def dense(store: ParamStore, name: str, x: Tensor) -> Tensor:
    return x @ store[name + ".w"] + store[name + ".b"]


def init_ffn(store: ParamStore, name: str, d_in: int, d_hidden: int,
             d_out: int, rng) -> None:
    init_dense(store, name + ".fc1", d_in, d_hidden, rng)
    init_dense(store, name + ".fc2", d_hidden, d_out, rng)


def ffn(store: ParamStore, name: str, x: Tensor) -> Tensor:
    return dense(store, name + ".fc2", dense(store, name + ".fc1", x).relu())


def init_layer_norm(store: ParamStore, name: str, d: int) -> None:
    store.add(name + ".gamma", np.ones(d))
    store.add(name + ".beta", np.zeros(d))


def layer_norm_p(store: ParamStore, name: str, x: Tensor) -> Tensor:
    return layer_norm(x, store[name + ".gamma"], store[name + ".beta"])


def init_attention_layer(store: ParamStore, prefix: str, d: int, d_ff: int,
                         rng) -> None:
    for part in ("wq", "wk", "wv", "wo"):
        init_dense(store, f"{prefix}.{part}", d, d, rng)
    init_layer_norm(store, f"{prefix}.ln1", d)
    init_ffn(store, f"{prefix}.ffn", d, d_ff, d, rng)
    init_layer_norm(store, f"{prefix}.ln2", d)


def attention_layer(store: ParamStore, prefix: str, x: Tensor, n_heads: int,
                    adapter=None) -> Tensor:
    """Post-norm transformer layer over a [T, d] sequence.

    Self-attention, residual, layer norm, feed-forward, residual, layer
    norm; ``adapter``, when given, is applied to the second norm's output
    (the per-layer hook where plug-in bottleneck modules sit).
    """
    t_len, d = x.shape
    if d % n_heads != 0:
        raise ValueError(f"model dim {d} not divisible by {n_heads} heads")
    dh = d // n_heads
    q = dense(store, f"{prefix}.wq", x)
    k = dense(store, f"{prefix}.wk", x)
    v = dense(store, f"{prefix}.wv", x)
    # [T, d] -> [H, T, dh]
    q3 = q.reshape(t_len, n_heads, dh).transpose(1, 0, 2)
    k3 = k.reshape(t_len, n_heads, dh).transpose(1, 0, 2)
    v3 = v.reshape(t_len, n_heads, dh).transpose(1, 0, 2)
    scores = (q3 @ k3.transpose(0, 2, 1)) * (1.0 / math.sqrt(dh))
    probs = softmax(scores, axis=-1)
    mixed = (probs @ v3).transpose(1, 0, 2).reshape(t_len, d)
    attended = dense(store, f"{prefix}.wo", mixed)
    h = layer_norm_p(store, f"{prefix}.ln1", x + attended)
    r = layer_norm_p(store, f"{prefix}.ln2", h + ffn(store, f"{prefix}.ffn", h))
    if adapter is not None:
        r = adapter(r)
    return r


def attention_probs(store: ParamStore, prefix: str, x: Tensor,
                    n_heads: int) -> np.ndarray:
    """The [H, T, T] attention distribution, for inspection."""
    t_len, d = x.shape
    dh = d // n_heads
    q = dense(store, f"{prefix}.wq", x).reshape(t_len, n_heads, dh).transpose(1, 0, 2)
    k = dense(store, f"{prefix}.wk", x).reshape(t_len, n_heads, dh).transpose(1, 0, 2)
    return softmax((q @ k.transpose(0, 2, 1)) * (1.0 / math.sqrt(dh)), axis=-1).data


def init_gru(store: ParamStore, prefix: str, d_in: int, d_h: int, rng) -> None:
    for gate in ("z", "r", "n"):
        store.add(f"{prefix}.w{gate}", xavier_uniform(rng, d_in, d_h))
        store.add(f"{prefix}.u{gate}", xavier_uniform(rng, d_h, d_h))
        store.add(f"{prefix}.b{gate}", np.zeros(d_h))


def gru_step(store: ParamStore, prefix: str, x: Tensor, h: Tensor) -> Tensor:
    """One gated-recurrent-unit update; ``x`` [d_in], ``h`` [d_h]."""
    z = (x @ store[f"{prefix}.wz"] + h @ store[f"{prefix}.uz"]
         + store[f"{prefix}.bz"]).sigmoid()
    r = (x @ store[f"{prefix}.wr"] + h @ store[f"{prefix}.ur"]
         + store[f"{prefix}.br"]).sigmoid()
    n = (x @ store[f"{prefix}.wn"] + (r * h) @ store[f"{prefix}.un"]
         + store[f"{prefix}.bn"]).tanh()
    return (1.0 - z) * n + z * h


def init_bilinear_attention(store: ParamStore, prefix: str, d_q: int,
                            d_k: int, rng) -> None:
    store.add(f"{prefix}.w", xavier_uniform(rng, d_q, d_k))


def bilinear_attention(store: ParamStore, prefix: str, query: Tensor,
                       keys: Tensor) -> Tensor:
    """Soft lookup of [T, d_k] ``keys`` by a [d_q] ``query`` vector."""
    scores = keys @ (query @ store[f"{prefix}.w"])
    return softmax(scores, axis=-1) @ keys


def init_embedding(store: ParamStore, name: str, n: int, d: int, rng,
                   scale: float = 0.02) -> None:
    store.add(name, rng.normal(0.0, scale, size=(n, d)))
