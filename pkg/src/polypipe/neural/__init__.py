"""Minimal differentiable substrate: reverse-mode tensors over numpy,
parameter storage with freeze flags, Adam, standard layers, and a
finite-difference gradient checker."""

from polypipe.neural.tensor import (  # noqa: F401
    Tensor, concat, stack, gather_rows, gather_rc, narrow, softmax,
    log_softmax, logsumexp, layer_norm, cross_entropy, pair_bilinear,
    as_tensor,
)
from polypipe.neural.params import ParamStore  # noqa: F401
from polypipe.neural.optim import Adam  # noqa: F401
from polypipe.neural.gradcheck import grad_check  # noqa: F401
from polypipe.neural import layers  # noqa: F401
