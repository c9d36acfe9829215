from __future__ import annotations

from typing import Dict, List, Tuple

import numpy as np

from autodiff.nn import Parameter


class Adam:
    """Adam over named parameters; moments are kept by name so they can be checkpointed."""

    def __init__(self, named_params: List[Tuple[str, Parameter]], lr: float = 2e-3, beta1: float = 0.0,
                 beta2: float = 0.99, eps: float = 1e-8):
        self.named_params = list(named_params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: Dict[str, np.ndarray] = {name: np.zeros_like(p.data) for name, p in self.named_params}
        self.v: Dict[str, np.ndarray] = {name: np.zeros_like(p.data) for name, p in self.named_params}
        self.t = 0

    def step(self) -> None:
        self.t += 1
        bias1 = 1.0 - self.beta1 ** self.t
        bias2 = 1.0 - self.beta2 ** self.t
        for name, p in self.named_params:
            if p.grad is None:
                continue
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * p.grad
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * (p.grad * p.grad)
            m_hat = self.m[name] / bias1
            v_hat = self.v[name] / bias2
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for _, p in self.named_params:
            p.grad = None

    def grad_norm(self) -> float:
        total = sum(float(np.sum(p.grad * p.grad)) for _, p in self.named_params if p.grad is not None)
        return float(np.sqrt(total))

    def state_dict(self, prefix: str) -> Dict[str, np.ndarray]:
        state = {f"{prefix}.m.{name}": m for name, m in self.m.items()}
        state.update({f"{prefix}.v.{name}": v for name, v in self.v.items()})
        state[f"{prefix}.t"] = np.array([float(self.t)])
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray], prefix: str) -> None:
        for name, p in self.named_params:
            for slot, store in (("m", self.m), ("v", self.v)):
                key = f"{prefix}.{slot}.{name}"
                if key not in state:
                    raise KeyError(f"missing optimizer state '{key}'")
                store[name] = np.array(state[key], dtype=np.float64).reshape(p.shape)
        self.t = int(state[f"{prefix}.t"][0])
