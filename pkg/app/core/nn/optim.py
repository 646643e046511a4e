from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from app.core.errors import NumericalError

Params = dict[str, np.ndarray]


@dataclass
class AdamaxState:
    """Adamax moments per parameter name (Adam with the infinity norm)."""

    lr: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Params = field(default_factory=dict)
    u: Params = field(default_factory=dict)

    @classmethod
    def fresh(cls, params: Params, *, lr: float = 2e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamaxState":
        return cls(
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            step=0,
            m={name: np.zeros_like(value) for name, value in params.items()},
            u={name: np.zeros_like(value) for name, value in params.items()},
        )


def adamax_step(params: Params, grads: Params, state: AdamaxState) -> tuple[Params, AdamaxState]:
    """
    m <- b1 m + (1 - b1) g;  u <- max(b2 u, |g|);  theta <- theta - lr / (1 - b1^t) * m / (u + eps)
    """
    if params.keys() != grads.keys():
        raise ValueError("Gradient names do not match parameter names.")
    for name, grad in grads.items():
        if grad.shape != params[name].shape:
            raise ValueError(f"Gradient for {name} has shape {grad.shape}, expected {params[name].shape}.")
        if not np.all(np.isfinite(grad)):
            raise NumericalError(
                code="NON_FINITE",
                message=f"Gradient for {name} contains NaN or Inf.",
                operator="adamax_step",
            )

    step = state.step + 1
    step_size = state.lr / (1.0 - state.beta1**step)
    new_params: Params = {}
    new_m: Params = {}
    new_u: Params = {}
    for name, value in params.items():
        grad = grads[name]
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * grad
        u = np.maximum(state.beta2 * state.u[name], np.abs(grad))
        new_params[name] = value - step_size * m / (u + state.eps)
        new_m[name] = m
        new_u[name] = u
    new_state = AdamaxState(
        lr=state.lr,
        beta1=state.beta1,
        beta2=state.beta2,
        eps=state.eps,
        step=step,
        m=new_m,
        u=new_u,
    )
    return new_params, new_state
