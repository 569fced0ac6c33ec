"""Smooth truncated hinge-like loss and its difference-of-convex split.

The loss s(u) rises smoothly from 0 to 2 across [-delta, delta] and is flat
outside, so it approximates 2 * indicator(u > 0) while staying differentiable.
It decomposes as s = s1 - s2 with both parts convex and nondecreasing:

    s1(u) = 0                 u <= -delta
            (1 + u/delta)^2   -delta < u <= 0
            1 + 2u/delta      u > 0

    s2(u) = 0                 u <= 0
            (u/delta)^2       0 < u <= delta
            2u/delta - 1      u > delta

Both pieces are C^1 with Lipschitz gradient (constant 2/delta^2), which is
what the solver's step-size control relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SurrogateParams:
    """Half-width delta of the smoothing window."""

    delta: float = 1.0

    def __post_init__(self):
        if not (self.delta > 0.0 and np.isfinite(self.delta)):
            raise ValueError(f"delta must be a positive finite number, got {self.delta!r}")

    @property
    def grad_lipschitz(self) -> float:
        return 2.0 / (self.delta * self.delta)


def _as_array(u):
    return np.asarray(u, dtype=float)


def s_value(u, params: SurrogateParams = SurrogateParams()):
    """Loss value; scalar in, scalar out."""
    arr = _as_array(u)
    d = params.delta
    t = arr / d
    out = np.where(
        arr <= 0.0,
        np.square(np.clip(1.0 + t, 0.0, None)),
        2.0 - np.square(np.clip(1.0 - t, 0.0, None)),
    )
    return float(out) if np.isscalar(u) else out


def s1_value(u, params: SurrogateParams = SurrogateParams()):
    """Convex majorant part of the split."""
    arr = _as_array(u)
    t = arr / params.delta
    out = np.where(arr <= 0.0, np.square(np.clip(1.0 + t, 0.0, None)), 1.0 + 2.0 * t)
    return float(out) if np.isscalar(u) else out


def s2_value(u, params: SurrogateParams = SurrogateParams()):
    """Convex part subtracted from s1."""
    arr = _as_array(u)
    t = arr / params.delta
    out = np.where(arr <= params.delta, np.square(np.clip(t, 0.0, None)), 2.0 * t - 1.0)
    return float(out) if np.isscalar(u) else out


def s1_prime(u, params: SurrogateParams = SurrogateParams()):
    arr = _as_array(u)
    d = params.delta
    out = np.where(arr <= 0.0, 2.0 * np.clip(1.0 + arr / d, 0.0, None) / d, 2.0 / d)
    return float(out) if np.isscalar(u) else out


def s2_prime(u, params: SurrogateParams = SurrogateParams()):
    arr = _as_array(u)
    d = params.delta
    out = 2.0 * np.clip(arr, 0.0, d) / (d * d)
    return float(out) if np.isscalar(u) else out
