"""Deterministic flows and Euler-Maruyama steps."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DimensionError, NonFiniteStateError
from .specs import ConstantField, HybridState, affine_apply


def _check_finite(y, what="state"):
    if not np.all(np.isfinite(y)):
        raise NonFiniteStateError(f"non-finite {what} encountered: {np.asarray(y).tolist()}")


def rk4_step(field, y, h):
    k1 = field(y)
    k2 = field(y + 0.5 * h * k1)
    k3 = field(y + 0.5 * h * k2)
    k4 = field(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_field(field, y0, t: float, dt: float = 1e-3) -> np.ndarray:
    """Solve y' = field(y) from ``y0`` over a duration ``t``.

    Fixed-step RK4 with the last partial step shortened. ``y0`` may carry
    leading batch axes. Constant fields are integrated exactly.
    """
    if t < 0:
        raise ValueError("duration must be non-negative")
    if not dt > 0:
        raise ValueError("dt must be positive")
    y = np.array(y0, dtype=float)
    if y.ndim == 0 or y.shape[-1] != field.dim:
        raise DimensionError(f"initial point has shape {y.shape}, field dimension is {field.dim}")
    _check_finite(y, "initial point")
    if t == 0:
        return y
    if isinstance(field, ConstantField):
        y = y + field.c * t
        _check_finite(y)
        return y
    n_full = int(math.floor(t / dt))
    rest = t - n_full * dt
    # guard against t/dt landing a hair below an integer
    if rest > dt * (1 - 1e-12):
        n_full += 1
        rest = 0.0
    for _ in range(n_full):
        y = rk4_step(field, y, dt)
    if rest > 1e-15 * max(1.0, t):
        y = rk4_step(field, y, rest)
    _check_finite(y)
    return y


def flow(spec, mode, y0, t: float, dt: float = 1e-3) -> np.ndarray:
    """Position reached after following mode ``mode``'s field for time ``t``."""
    return integrate_field(spec.modes[mode].field, y0, t, dt)


def sde_step(spec, state: HybridState, dt: float, noise) -> HybridState:
    """One Euler-Maruyama step in the current mode; the mode is unchanged."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    ms = spec.modes[state.mode]
    y = state.position
    if y.shape[0] != ms.dim:
        raise DimensionError(f"position has length {y.shape[0]}, mode expects {ms.dim}")
    noise = np.asarray(noise, dtype=float).reshape(-1)
    sigma = ms.diffusion(y) if ms.diffusion is not None else np.zeros((ms.dim, 1))
    if noise.shape[0] != sigma.shape[1]:
        raise DimensionError(f"noise has length {noise.shape[0]}, diffusion expects {sigma.shape[1]}")
    y1 = y + ms.field(y) * dt + affine_apply(sigma, None, noise) * math.sqrt(dt)
    _check_finite(y1)
    return HybridState(state.mode, y1)
