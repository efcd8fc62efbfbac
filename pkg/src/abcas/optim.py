"""Adam with bias correction, plus an optional variance-rectified update.

Defaults follow the training recipe used here: beta1 = 0 (first moment
collapses to the raw gradient) and beta2 = 0.999. The rectified variant
falls back to a plain momentum step while the second-moment estimate is
still too noisy; it is off by default.
"""

from __future__ import annotations

import math

import numpy as np

from .nn import ParamStore

__all__ = ["Adam"]


class Adam:
    def __init__(self, store: ParamStore, lr: float, beta1: float = 0.0,
                 beta2: float = 0.999, eps: float = 1e-8, rectify: bool = False):
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.rectify = rectify
        self.t = 0
        self.m = [{k: np.zeros_like(v) for k, v in lp.items()} for lp in store.params]
        self.v = [{k: np.zeros_like(v) for k, v in lp.items()} for lp in store.params]

    def step(self) -> None:
        """Apply one update from the gradients currently in the store."""
        self.t += 1
        t = self.t
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** t
        bc2 = 1.0 - b2 ** t
        if self.rectify:
            rho_inf = 2.0 / (1.0 - b2) - 1.0
            rho_t = rho_inf - 2.0 * t * b2 ** t / bc2
            if rho_t > 4.0:
                rect = math.sqrt(
                    ((rho_t - 4.0) * (rho_t - 2.0) * rho_inf)
                    / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t)
                )
            else:
                rect = None
        for i, layer_params in enumerate(self.store.params):
            for name, p in layer_params.items():
                g = self.store.grads[i][name]
                m = self.m[i][name]
                v = self.v[i][name]
                m *= b1
                m += (1.0 - b1) * g
                v *= b2
                v += (1.0 - b2) * g * g
                m_hat = m / bc1
                if self.rectify:
                    if rect is None:
                        p -= self.lr * m_hat
                    else:
                        p -= self.lr * rect * m_hat / (np.sqrt(v / bc2) + self.eps)
                else:
                    p -= self.lr * m_hat / (np.sqrt(v / bc2) + self.eps)
