"""Adam with bias-corrected moment estimates."""

from __future__ import annotations

import numpy as np

from ..errors import NonFiniteGradient, NonFiniteValue
from .params import ParameterStore


class Adam:
    """Per-parameter moments live in the store's dtype.

    update = lr * m_hat / (sqrt(v_hat) + eps), subtracted in place.
    """

    def __init__(self, store: ParameterStore, lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {n: np.zeros_like(a) for n, a in store.items()}
        self._v = {n: np.zeros_like(a) for n, a in store.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        for name, g in grads.items():
            if not np.isfinite(g).all():
                raise NonFiniteGradient(f"gradient for {name!r} is non-finite")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            g = g.astype(self.store.dtype, copy=False)
            m = self._m[name]
            v = self._v[name]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            update = self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            new = self.store.get(name) - update
            if not np.isfinite(new).all():
                raise NonFiniteValue(f"parameter {name!r} became non-finite after update")
            self.store.set(name, new)
