"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from polypipe.neural.params import ParamStore


def grad_check(loss_fn, store: ParamStore, eps: float = 1e-5,
               sample: int = 60, rng=None) -> float:
    """Compare analytic gradients against central differences.

    ``loss_fn`` must be a deterministic scalar function of the store's
    current parameter values.  ``sample`` coordinates are drawn uniformly
    across all trainable parameters; each is perturbed by ±eps.  Returns the
    maximum relative error over the sampled coordinates.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-7, 1e-3]")
    rng = rng or np.random.default_rng(0)

    store.zero_grad()
    loss = loss_fn()
    if not np.isfinite(loss.data).all():
        raise FloatingPointError("loss is not finite")
    loss.backward()
    analytic = {}
    for name, p in store.trainable_items():
        analytic[name] = (np.zeros_like(p.data) if p.grad is None
                          else p.grad.copy())

    names = [n for n, _ in store.trainable_items()]
    if not names:
        raise ValueError("no trainable parameters to check")
    sizes = np.array([store[n].data.size for n in names])
    total = int(sizes.sum())
    picks = rng.choice(total, size=min(sample, total), replace=False)

    max_rel = 0.0
    bounds = np.cumsum(sizes)
    for flat in sorted(picks.tolist()):
        which = int(np.searchsorted(bounds, flat, side="right"))
        offset = flat - (0 if which == 0 else int(bounds[which - 1]))
        p = store[names[which]]
        flatview = p.data.reshape(-1)
        orig = flatview[offset]
        flatview[offset] = orig + eps
        f_plus = float(loss_fn().data)
        flatview[offset] = orig - eps
        f_minus = float(loss_fn().data)
        flatview[offset] = orig
        numeric = (f_plus - f_minus) / (2.0 * eps)
        a = analytic[names[which]].reshape(-1)[offset]
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-3)
        max_rel = max(max_rel, rel)
    store.zero_grad()
    return max_rel
