"""Adam with bias correction; complex parameters are updated as (re, im) pairs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import DipParams


def _real_view(a: np.ndarray) -> np.ndarray:
    return a.view(np.float64) if np.iscomplexobj(a) else a


@dataclass
class AdamState:
    lr: float = 4e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")


def adam_update(params: DipParams, grads: DipParams, state: AdamState) -> tuple[DipParams, AdamState]:
    """One Adam step. Returns new parameters and a new state; inputs are left untouched."""
    if state.lr <= 0:
        raise ValueError(f"learning rate must be positive, got {state.lr}")
    p_list = [np.ascontiguousarray(a, dtype=np.complex128 if np.iscomplexobj(a) else np.float64) for a in params.arrays()]
    g_list = grads.arrays()
    m_old = state.m or [np.zeros(_real_view(p).shape) for p in p_list]
    v_old = state.v or [np.zeros(_real_view(p).shape) for p in p_list]
    t = state.step + 1
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(p_list, g_list, m_old, v_old):
        g = _real_view(np.ascontiguousarray(g, dtype=p.dtype))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        step = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        q = _real_view(p) - step
        new_p.append(q.view(np.complex128) if np.iscomplexobj(p) else q)
        new_m.append(m)
        new_v.append(v)
    new_state = AdamState(state.lr, state.beta1, state.beta2, state.eps, t, new_m, new_v)
    return DipParams.from_arrays(new_p), new_state
