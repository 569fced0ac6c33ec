"""Difference-of-convex solver for tail-criterion decision rules.

Maximizing the surrogate tail criterion is recast as minimizing

    G_tilde(f) = min_j G_j(f) + penalty(f),
    G_j(f) = (1/n) sum_i s(a_i f(x_i)) * c_ij,

with one candidate objective per knot j (a knot is an observed outcome, the
candidate location of the tail threshold). Each G_j splits into a difference
of convex functions, and the whole pointwise minimum shares a single convex
majorant F, so G_tilde = F + penalty - max_j h_j with every h_j convex. One
solver iteration picks a knot whose objective is within epsilon of the
minimum (uniformly at random, which is what makes the iteration escape
first-order-but-not-optimal knots), linearizes h_j there, and solves the
resulting convex subproblem warm-started at the current iterate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .data import RandomSource, TrialDataset
from .models import DecisionFunction, gaussian_gram, median_heuristic, penalty_value
from .surrogate import SurrogateParams, s1_prime, s1_value, s2_prime, s2_value, s_value

CRITERIA = ("m0", "m1")

_PENALTY_KIND = {"l2": _kernels.PENALTY_L2, "l1": _kernels.PENALTY_L1, "rkhs": _kernels.PENALTY_QUAD}


def knot_coefficients(outcome, propensity, gamma: float, criterion: str = "m0") -> np.ndarray:
    """Coefficient grid c[i, j] weighting record i's loss at knot j.

    For the pure tail criterion, c[i, j] = (-R_j + (R_j - R_i)_+ / gamma) / pi_i.
    The mixed criterion averages in the plain-value coefficient -R_i / pi_i.
    The diagonal equals -R_i / pi_i in both cases.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    if not (0.0 < gamma <= 1.0):
        raise ValueError(f"gamma must lie in (0, 1], got {gamma!r}")
    R = np.asarray(outcome, dtype=float)
    pi = np.asarray(propensity, dtype=float)
    gap = np.clip(R[None, :] - R[:, None], 0.0, None)
    if criterion == "m0":
        num = -R[None, :] + gap / gamma
    else:
        num = -0.5 * R[:, None] - 0.5 * R[None, :] + 0.5 * gap / gamma
    return num / pi[:, None]


@dataclass
class DcaConfig:
    """Solver configuration.

    epsilon None means the knot-selection slack is set adaptively to
    1e-6 * (1 + |G_tilde(f0)|). kappa is the stop threshold on successive
    objective values. bandwidth None with the kernel form falls back to the
    median pairwise-distance heuristic.
    """

    gamma: float = 0.5
    lam: float = 1.0
    penalty: str = "l2"
    form: str = "linear"
    bandwidth: Optional[float] = None
    criterion: str = "m0"
    delta: float = 1.0
    epsilon: Optional[float] = None
    kappa: float = 1e-6
    max_iter: int = 200
    inner_tol: float = 1e-8
    inner_max_iter: int = 2000
    init: Optional[tuple] = None  # (weights, intercept) warm start

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if self.form == "kernel" and self.penalty == "l1":
            raise ValueError("kernel form supports l2/rkhs penalties only")
        if self.form == "linear" and self.penalty == "rkhs":
            raise ValueError("rkhs penalty requires the kernel form")
        if self.kappa <= 0.0 or (self.epsilon is not None and self.epsilon < 0.0):
            raise ValueError("kappa must be positive and epsilon nonnegative")
        if self.max_iter < 0 or self.inner_max_iter <= 0:
            raise ValueError("iteration limits must be positive")


@dataclass
class DcaState:
    """Everything observable about one solver run."""

    model: DecisionFunction
    objective_trace: list = field(default_factory=list)
    knot_trace: list = field(default_factory=list)
    inner_iterations: list = field(default_factory=list)
    inner_converged: list = field(default_factory=list)
    epsilon: float = 0.0
    kappa: float = 0.0
    iterations: int = 0
    converged: bool = False
    degenerate: bool = False

    @property
    def active_knot(self) -> int:
        return self.knot_trace[-1] if self.knot_trace else -1


def _as_generator(rng) -> np.random.Generator:
    if rng is None:
        return RandomSource(0).generator()
    if isinstance(rng, RandomSource):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"rng must be a RandomSource or numpy Generator, got {type(rng).__name__}")


def _design(data: TrialDataset, config: DcaConfig):
    """Feature matrix the weights act on, plus the resolved bandwidth."""
    if config.form == "linear":
        return np.ascontiguousarray(data.X), None
    bw = config.bandwidth if config.bandwidth is not None else median_heuristic(data.X)
    return gaussian_gram(data.X, data.X, bw), bw


def _model_from(config: DcaConfig, data: TrialDataset, w, b, bandwidth) -> DecisionFunction:
    if config.form == "linear":
        return DecisionFunction(
            form="linear",
            weights=w,
            intercept=b,
            penalty=config.penalty,
            lam=config.lam,
            scaling=data.scaling,
        )
    return DecisionFunction(
        form="kernel",
        weights=w,
        intercept=b,
        penalty=config.penalty,
        lam=config.lam,
        bandwidth=bandwidth,
        anchors=data.X,
        scaling=data.scaling,
    )


def _penalty_of(config: DcaConfig, w: np.ndarray, K) -> float:
    if config.penalty == "l2":
        return 0.5 * config.lam * float(w @ w)
    if config.penalty == "l1":
        return config.lam * float(np.abs(w).sum())
    return 0.5 * config.lam * float(w @ (K @ w))


def dca_fit(data: TrialDataset, config: DcaConfig, rng=None):
    """Fit a decision rule by the randomized knot-selection DC iteration.

    Returns (model, state). The objective trace is non-increasing up to the
    epsilon slack plus inner tolerance; on hitting max_iter without the
    successive-objective gap falling below kappa, the best iterate seen is
    returned with state.converged False.
    """
    gen = _as_generator(rng)
    sur = SurrogateParams(config.delta)
    Z, bandwidth = _design(data, config)
    n = data.n
    y = data.action.astype(float)
    C = knot_coefficients(data.outcome, data.propensity, config.gamma, config.criterion)
    P = np.clip(C, 0.0, None).sum(axis=1)
    N = np.clip(-C, 0.0, None).sum(axis=1)
    kind = _PENALTY_KIND[config.penalty]
    Q = Z if config.penalty == "rkhs" else None

    if config.init is not None:
        w = np.ascontiguousarray(config.init[0], dtype=float).copy()
        b = float(config.init[1])
        if w.shape != (Z.shape[1],):
            raise ValueError(f"warm start needs {Z.shape[1]} weights, got {w.shape}")
    else:
        w = np.zeros(Z.shape[1])
        b = 0.0

    def objective_parts(w_, b_):
        u = y * (Z @ w_ + b_)
        G = (s_value(u, sur) @ C) / n
        return G, _penalty_of(config, w_, Z)

    G, pen = objective_parts(w, b)
    gtilde = float(G.min() + pen)
    epsilon = config.epsilon if config.epsilon is not None else 1e-6 * (1.0 + abs(gtilde))

    state = DcaState(model=None, epsilon=float(epsilon), kappa=float(config.kappa))
    state.objective_trace.append(gtilde)
    best = (gtilde, w.copy(), b)

    for _v in range(config.max_iter):
        members = np.flatnonzero(G <= G.min() + epsilon)
        j = int(members[gen.integers(members.size)])

        # Linearize the concave part at the current iterate: the selected
        # knot's h_j has loss coefficients (P - C[:, j]) on s1 and
        # (N + C[:, j]) on s2, both nonnegative.
        u = y * (Z @ w + b)
        a1 = P - C[:, j]
        a2 = N + C[:, j]
        kappa_i = (a1 * s1_prime(u, sur) + a2 * s2_prime(u, sur)) * y
        gw = (Z.T @ kappa_i) / n
        gb = float(kappa_i.sum()) / n

        w, b, inner_it, inner_ok, _res = _kernels.solve_surrogate_subproblem(
            Z, y, P, N, gw, gb, config.lam, kind, Q, config.delta,
            w, b, config.inner_tol, config.inner_max_iter,
        )

        G, pen = objective_parts(w, b)
        gtilde = float(G.min() + pen)
        state.objective_trace.append(gtilde)
        state.knot_trace.append(j)
        state.inner_iterations.append(int(inner_it))
        state.inner_converged.append(bool(inner_ok))
        state.iterations += 1
        if gtilde < best[0]:
            best = (gtilde, w.copy(), b)
        if abs(state.objective_trace[-2] - gtilde) < config.kappa:
            state.converged = True
            break

    _, w, b = best
    model = _model_from(config, data, w, b, bandwidth)
    state.model = model
    decisions = model.decide_batch(data.X)
    state.degenerate = not bool(np.any(decisions == data.action))
    return model, state


def dca_fit_m1(data: TrialDataset, config: DcaConfig, rng=None):
    """dca_fit with the mixed value-plus-tail criterion."""
    cfg = DcaConfig(**{**config.__dict__, "criterion": "m1"})
    return dca_fit(data, cfg, rng)


# -- objective views used by diagnostics and tests ---------------------------


def objective_g1(model: DecisionFunction, data: TrialDataset, alpha: float, gamma: float,
                 surrogate: SurrogateParams = SurrogateParams(), criterion: str = "m0") -> float:
    """Unpenalized DC objective at an arbitrary threshold alpha.

    Equals objective_gj whenever alpha is the j-th observed outcome.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    R = data.outcome
    coef = -alpha + np.clip(alpha - R, 0.0, None) / gamma
    if criterion == "m1":
        coef = 0.5 * coef - 0.5 * R
    coef = coef / data.propensity
    u = data.action * model.score_batch(data.X)
    return float(s_value(u, surrogate) @ coef) / data.n


def objective_gj(model: DecisionFunction, data: TrialDataset, j: int, gamma: float,
                 surrogate: SurrogateParams = SurrogateParams(), criterion: str = "m0") -> float:
    """Unpenalized DC objective at the j-th knot."""
    C = knot_coefficients(data.outcome, data.propensity, gamma, criterion)
    u = data.action * model.score_batch(data.X)
    return float(s_value(u, surrogate) @ C[:, j]) / data.n


@dataclass(frozen=True)
class ConvexPart:
    """One convex piece (1/n) sum_i [a1_i s1(u_i) + a2_i s2(u_i)] of a split.

    Both coefficient vectors are nonnegative, and s1/s2 are convex and
    nondecreasing, so the piece is convex in the model parameters.
    """

    a1: np.ndarray
    a2: np.ndarray
    data: TrialDataset
    surrogate: SurrogateParams

    def margins(self, model: DecisionFunction) -> np.ndarray:
        return self.data.action * model.score_batch(self.data.X)

    def value(self, model: DecisionFunction) -> float:
        u = self.margins(model)
        return float(self.a1 @ s1_value(u, self.surrogate) + self.a2 @ s2_value(u, self.surrogate)) / self.data.n

    def gradient(self, model: DecisionFunction):
        """(d/dweights, d/dintercept) of value()."""
        u = self.margins(model)
        kap = (self.a1 * s1_prime(u, self.surrogate) + self.a2 * s2_prime(u, self.surrogate)) * self.data.action
        Z = model.design(self.data.X)
        return (Z.T @ kap) / self.data.n, float(kap.sum()) / self.data.n


def split_fh(j: int, data: TrialDataset, gamma: float,
             surrogate: SurrogateParams = SurrogateParams(), criterion: str = "m0"):
    """Convex split (F_j, H_j) of the j-th knot objective, G_j = F_j - H_j."""
    C = knot_coefficients(data.outcome, data.propensity, gamma, criterion)
    pos = np.clip(C[:, j], 0.0, None)
    neg = np.clip(-C[:, j], 0.0, None)
    f_part = ConvexPart(a1=pos, a2=neg, data=data, surrogate=surrogate)
    h_part = ConvexPart(a1=neg, a2=pos, data=data, surrogate=surrogate)
    return f_part, h_part


def shared_majorant_terms(data: TrialDataset, gamma: float,
                          surrogate: SurrogateParams = SurrogateParams(),
                          criterion: str = "m0"):
    """The common convex majorant F and the per-knot convex gaps h_j.

    Returns (F, [h_0, ..., h_{n-1}]) with G_j = F - h_j for every knot, so
    min_j G_j can equally be computed as F - max_j h_j.
    """
    C = knot_coefficients(data.outcome, data.propensity, gamma, criterion)
    P = np.clip(C, 0.0, None).sum(axis=1)
    N = np.clip(-C, 0.0, None).sum(axis=1)
    F = ConvexPart(a1=P, a2=N, data=data, surrogate=surrogate)
    hs = [
        ConvexPart(a1=P - C[:, j], a2=N + C[:, j], data=data, surrogate=surrogate)
        for j in range(data.n)
    ]
    return F, hs


def epsilon_argmax(model: DecisionFunction, data: TrialDataset, gamma: float, epsilon: float,
                   surrogate: SurrogateParams = SurrogateParams(),
                   criterion: str = "m0") -> np.ndarray:
    """Knots whose objective is within epsilon of the best one.

    Sorted indices {j : G_j(f) <= min_k G_k(f) + epsilon}; the set the
    randomized iteration samples from. Equivalently the near-argmax set of
    the h_j gaps.
    """
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    C = knot_coefficients(data.outcome, data.propensity, gamma, criterion)
    u = data.action * model.score_batch(data.X)
    G = (s_value(u, surrogate) @ C) / data.n
    return np.flatnonzero(G <= G.min() + epsilon)
