"""Alternating threshold/classification solver for the tail criterion.

For a fixed threshold alpha the criterion is a signed-weighted agreement
between the rule and the observed actions, so maximizing over rules is a
weighted classification problem; for a fixed rule the best alpha is a knot
of the matched-outcome objective. Alternating the two is coordinate ascent
on m(d, alpha) and terminates once an alpha repeats. A local-improvement
heuristic: it makes no global-optimality claim.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import _kernels
from .criteria import evaluate_m0
from .data import RandomSource, TrialDataset
from .errors import DegenerateMatchError
from .models import DecisionFunction, sign_decision


def signed_weights(data: TrialDataset, alpha: float, gamma: float) -> np.ndarray:
    """w_i = (alpha - (alpha - R_i)_+ / gamma) / pi_i.

    The criterion at threshold alpha equals (1/n) sum_i w_i 1(A_i = d(x_i)),
    so records with negative w_i reward disagreement.
    """
    if not (0.0 < gamma <= 1.0):
        raise ValueError("gamma must lie in (0, 1]")
    R = data.outcome
    return (alpha - np.clip(alpha - R, 0.0, None) / gamma) / data.propensity


@dataclass(frozen=True)
class WeightedClassificationProblem:
    """Maximize (1/n) sum_i weights_i * 1(labels_i = d(features_i))."""

    features: np.ndarray
    labels: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if len(self.features) != len(self.labels) or len(self.labels) != len(self.weights):
            raise ValueError("features/labels/weights lengths differ")

    @property
    def n(self) -> int:
        return len(self.labels)

    def flipped(self):
        """(labels', |weights|, offset): negative-weight records flip their
        label, turning the signed objective into offset + a plain weighted
        agreement with nonnegative weights."""
        flip = np.where(self.weights < 0.0, -1, 1)
        offset = float(self.weights[self.weights < 0.0].sum())
        return self.labels * flip, np.abs(self.weights), offset


def build_problem(data: TrialDataset, alpha: float, gamma: float) -> WeightedClassificationProblem:
    return WeightedClassificationProblem(
        features=data.X,
        labels=data.action.copy(),
        weights=signed_weights(data, alpha, gamma),
    )


def weighted_agreement(problem: WeightedClassificationProblem, predictions) -> float:
    """(1/n) sum_i w_i 1(labels_i = predictions_i), weights signed."""
    pred = np.asarray(predictions)
    return float(problem.weights[problem.labels == pred].sum()) / problem.n


def alpha_update(data: TrialDataset, decisions, gamma: float):
    """Best threshold for fixed decisions: (alpha, criterion value).

    Raises DegenerateMatchError when no record matches the rule.
    """
    m0 = evaluate_m0(data, decisions, gamma)
    if m0.degenerate:
        raise DegenerateMatchError("rule matches no record; threshold update undefined")
    return m0.alpha, m0.value


# -- classifier families ------------------------------------------------------


@dataclass(frozen=True)
class ConstantRule:
    action: int

    def decide_batch(self, X) -> np.ndarray:
        return np.full(np.atleast_2d(X).shape[0], self.action, dtype=np.int64)

    def decide(self, x) -> int:
        return self.action


@dataclass(frozen=True)
class ThresholdRule:
    """sign(x[feature] - threshold) * orient, with sign(0) = +1."""

    feature: int
    threshold: float
    orient: int

    def decide_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.orient * sign_decision(X[:, self.feature] - self.threshold)

    def decide(self, x) -> int:
        return int(self.decide_batch(np.atleast_2d(x))[0])


class ExhaustiveAxisFamily:
    """Brute force over constants and single-feature threshold rules.

    Exactly maximizes the weighted agreement within its (finite) rule class;
    intended for low-dimensional or discrete covariates. Ties resolve to the
    first rule in enumeration order (constants first, then features by index
    and thresholds ascending).
    """

    def candidates(self, X: np.ndarray):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        rules = [ConstantRule(1), ConstantRule(-1)]
        for k in range(X.shape[1]):
            vals = np.unique(X[:, k])
            cuts = (vals[:-1] + vals[1:]) / 2.0
            for t in cuts:
                rules.append(ThresholdRule(k, float(t), 1))
                rules.append(ThresholdRule(k, float(t), -1))
        return rules

    def fit(self, problem: WeightedClassificationProblem):
        if not np.any(problem.weights != 0.0):
            raise DegenerateMatchError("all classification weights are zero")
        best_rule = None
        best_score = -np.inf
        for rule in self.candidates(problem.features):
            score = weighted_agreement(problem, rule.decide_batch(problem.features))
            if score > best_score:
                best_rule, best_score = rule, score
        return best_rule


class LinearSurrogateFamily:
    """Linear rule fitted by a convex weighted surrogate classification.

    Flips negative-weight labels, then minimizes the nonnegative-weighted
    convex margin loss sum_i q_i s1(-L_i f(x_i)) with a small ridge term.
    With positive weights and linearly separable classes the minimizer
    reaches zero weighted disagreement.
    """

    def __init__(self, reg: float = 1e-8, delta: float = 1.0,
                 tol: float = 1e-8, max_iter: int = 5000):
        if reg < 0.0:
            raise ValueError("reg must be nonnegative")
        self.reg = reg
        self.delta = delta
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, problem: WeightedClassificationProblem) -> DecisionFunction:
        if not np.any(problem.weights != 0.0):
            raise DegenerateMatchError("all classification weights are zero")
        labels, q, _ = problem.flipped()
        Z = np.ascontiguousarray(np.atleast_2d(problem.features), dtype=float)
        n, m = Z.shape
        # margin u = y f(x) with y = -L: s1(u) penalizes fits with L f < 0
        y = -labels.astype(float)
        w, b, _it, _ok, _res = _kernels.solve_surrogate_subproblem(
            Z, y, q, np.zeros(n), np.zeros(m), 0.0, self.reg, _kernels.PENALTY_L2,
            None, self.delta, np.zeros(m), 0.0, self.tol, self.max_iter,
        )
        return DecisionFunction(form="linear", weights=w, intercept=b,
                                penalty="l2", lam=self.reg)


def classify_step(problem: WeightedClassificationProblem, family):
    """One classification step: (fitted rule, its predictions)."""
    rule = family.fit(problem)
    return rule, rule.decide_batch(problem.features)


# -- the alternation ----------------------------------------------------------


@dataclass
class AltConfig:
    """starts: how many alternation runs to launch. An integer draws that
    many random starting thresholds; "all" starts once from every distinct
    observed outcome, which makes the best run at least as good as solving
    the weighted classification at each knot (each start's first rule step
    does exactly that, and the objective never decreases afterwards)."""

    gamma: float = 0.5
    max_rounds: Optional[int] = None  # default n + 2: an alpha must repeat by then
    starts: Union[int, str] = 1

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must lie in (0, 1]")
        if self.max_rounds is not None and self.max_rounds < 1:
            raise ValueError("max_rounds must be positive")
        if isinstance(self.starts, str):
            if self.starts != "all":
                raise ValueError(f"starts must be a positive integer or 'all', got {self.starts!r}")
        elif self.starts < 1:
            raise ValueError("starts must be positive")


@dataclass
class AltState:
    """Trace of one alternation run; best-so-far is what gets returned.

    With several starts, the scalar fields describe the winning run and
    start_objectives records every run's best objective in start order.
    """

    alphas: list = field(default_factory=list)
    objectives: list = field(default_factory=list)
    rounds: int = 0
    converged: bool = False   # alpha reached a fixed point
    cycled: bool = False      # alpha revisited an earlier, non-adjacent value
    degenerate: bool = False  # a step produced an unusable weighting/rule
    best_objective: float = -np.inf
    best_alpha: Optional[float] = None
    start_objectives: list = field(default_factory=list)


def _alternate_once(data, config, family, alpha: float):
    max_rounds = config.max_rounds if config.max_rounds is not None else data.n + 2
    state = AltState()
    state.alphas.append(alpha)
    visited = {alpha}
    best_rule = None

    for _ in range(max_rounds):
        state.rounds += 1
        problem = build_problem(data, alpha, config.gamma)
        try:
            rule, preds = classify_step(problem, family)
            alpha_next, objective = alpha_update(data, preds, config.gamma)
        except DegenerateMatchError:
            state.degenerate = True
            break
        state.alphas.append(alpha_next)
        state.objectives.append(objective)
        if objective > state.best_objective:
            state.best_objective = objective
            state.best_alpha = alpha_next
            best_rule = rule
        if alpha_next == alpha:
            state.converged = True
            break
        if alpha_next in visited:
            state.cycled = True
            break
        visited.add(alpha_next)
        alpha = alpha_next

    return best_rule, state


def alternate_fit(data: TrialDataset, config: AltConfig, family=None, rng=None):
    """Alternate weighted classification with threshold updates.

    Each run starts from an observed outcome as the threshold (uniformly
    drawn, or every distinct outcome under starts="all"). A round fits the
    family on the signed-weight problem, then moves the threshold to the
    best knot for the fitted rule; the run stops at a fixed point, on a
    revisited threshold (cycle), or after max_rounds. Returns the best rule
    over all runs with the winning run's AltState.
    """
    if family is None:
        family = ExhaustiveAxisFamily()
    if rng is None:
        rng = RandomSource(0)
    gen = rng.generator() if isinstance(rng, RandomSource) else rng

    if config.starts == "all":
        start_alphas = [float(a) for a in np.unique(data.outcome)]
    else:
        start_alphas = [
            float(data.outcome[gen.integers(data.n)]) for _ in range(config.starts)
        ]

    best_rule = None
    best_state = None
    per_start = []
    for alpha0 in start_alphas:
        rule, state = _alternate_once(data, config, family, alpha0)
        per_start.append(state.best_objective)
        if best_state is None or state.best_objective > best_state.best_objective:
            best_rule, best_state = rule, state
    best_state.start_objectives = per_start
    return best_rule, best_state
