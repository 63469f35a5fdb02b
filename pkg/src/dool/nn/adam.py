"""Adam with bias correction, written functionally over parameter containers."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import NumericalFailure


@dataclass
class AdamState:
    first_moment: list
    second_moment: list
    step_count: int = 0
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, lr=5e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        arrays = params.arrays()
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], 0, lr, beta1, beta2, eps)


def adam_step(params, grads, state: AdamState):
    """One Adam update. Returns ``(new_params, new_state)``; inputs are not mutated."""
    p_arrays, g_arrays = params.arrays(), grads.arrays()
    if len(p_arrays) != len(g_arrays) or len(p_arrays) != len(state.first_moment):
        raise ValueError("parameter, gradient and optimizer state shapes disagree")
    for i, g in enumerate(g_arrays):
        if not np.all(np.isfinite(g)):
            names = params.names() if hasattr(params, "names") else None
            where = names[i] if names else f"array {i}"
            raise NumericalFailure(f"non-finite gradient in {where}")

    t = state.step_count + 1
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(p_arrays, g_arrays, state.first_moment, state.second_moment):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        new_p.append(p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return params.with_arrays(new_p), replace(state, first_moment=new_m, second_moment=new_v, step_count=t)
