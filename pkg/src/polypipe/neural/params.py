"""Named parameter storage with per-parameter freeze flags."""

from __future__ import annotations

import hashlib

import numpy as np

from polypipe.neural.tensor import DTYPE, Tensor


class ParamStore:
    """Named tensors, each trainable unless frozen.

    Frozen parameters never receive optimizer updates and do not enter the
    autodiff tape, so their bytes are guaranteed identical before and after
    any training step.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, array, frozen: bool = False) -> Tensor:
        if name in self._params:
            raise KeyError(f"parameter {name!r} already exists")
        t = Tensor(np.array(array, dtype=DTYPE), requires_grad=not frozen)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return sorted(self._params)

    def items(self):
        return ((n, self._params[n]) for n in self.names())

    def trainable_items(self):
        return ((n, t) for n, t in self.items() if t.requires_grad)

    def freeze(self, prefix: str = "") -> None:
        for name, t in self._params.items():
            if name.startswith(prefix):
                t.requires_grad = False

    def is_frozen(self, name: str) -> bool:
        return not self._params[name].requires_grad

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def n_params(self, prefix: str = "") -> int:
        return sum(t.data.size for n, t in self._params.items()
                   if n.startswith(prefix))

    def nbytes(self, prefix: str = "") -> int:
        return sum(t.data.nbytes for n, t in self._params.items()
                   if n.startswith(prefix))

    def checksum(self, prefix: str = "") -> str:
        """sha256 over names, shapes, and raw little-endian bytes."""
        h = hashlib.sha256()
        for name in self.names():
            if not name.startswith(prefix):
                continue
            t = self._params[name]
            h.update(name.encode("utf-8"))
            h.update(str(t.data.shape).encode("ascii"))
            h.update(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
        return h.hexdigest()

    def state_arrays(self, prefix: str = "") -> dict[str, np.ndarray]:
        return {n: t.data.copy() for n, t in self.items() if n.startswith(prefix)}

    def load_arrays(self, arrays: dict[str, np.ndarray], frozen: bool = False) -> None:
        for name in sorted(arrays):
            if name in self._params:
                t = self._params[name]
                if t.data.shape != arrays[name].shape:
                    raise ValueError(f"shape mismatch loading {name!r}")
                t.data = np.array(arrays[name], dtype=DTYPE)
            else:
                self.add(name, arrays[name], frozen=frozen)
