"""Adam with global-norm gradient clipping over named tensors."""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr < 0:
            raise ValueError("learning rate must be nonnegative")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        """Update `params` in place."""
        self.t += 1
        for name, grad in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(grad)
                self.v[name] = np.zeros_like(grad)
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * grad
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * grad**2
            m_hat = self.m[name] / (1 - self.beta1**self.t)
            v_hat = self.v[name] / (1 - self.beta2**self.t)
            params[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_tensors(self) -> dict[str, np.ndarray]:
        named = {f"adam.m.{name}": value for name, value in self.m.items()}
        named.update({f"adam.v.{name}": value for name, value in self.v.items()})
        return named

    def load_state(self, t: int, tensors: dict[str, np.ndarray]):
        self.t = int(t)
        for key, value in tensors.items():
            kind, _, name = key[len("adam.") :].partition(".")
            (self.m if kind == "m" else self.v)[name] = value.copy()


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(grad**2)) for grad in grads.values())))


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> tuple[dict[str, np.ndarray], float]:
    """Scale all gradients together so their joint norm is at most `max_norm`."""
    norm = global_norm(grads)
    if max_norm and max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        return {name: grad * scale for name, grad in grads.items()}, norm
    return grads, norm
