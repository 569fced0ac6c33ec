"""Synthetic trial scenarios with materialized potential outcomes.

Every scenario assigns the action uniformly on {-1, +1} (propensity 0.5) and
materializes both potential outcomes per record, so evaluation metrics can
form exact counterfactuals. Apart from the two-point toy scenario, outcomes
follow R = 1 + x1 + x2 + A*delta(X) + eps with a single shared eps draw per
record, giving the coupling R(+1) - R(-1) = 2*delta(X) exactly.

Scenario ids: toy, shift1, shift2, s1..s8.
  toy     one binary covariate; R depends only on the product X*A
  shift1  heavy-tailed covariate mixture, standard normal eps
  shift2  uniform covariates, heavy-tailed eps mixture
  s1..s4  linear boundary delta = x1 - x2 + x3
  s5..s8  quadratic boundary delta = 3.8*(0.8 - x1^2 - x2^2)
with eps per scenario: normal sd 4 (s1, s5), heteroscedastic lognormal
sd 2|1+x1+x2| (s2, s6), lognormal sd 2 (s3, s7), Weibull shape 0.3 scale
0.5 (s4, s8). Distribution parameters are (mean, sd) of the (log-scale)
normal throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtri

from .data import RandomSource, TrialDataset
from .errors import UnsupportedMetricError
from .models import sign_decision

PROPENSITY = 0.5

SCENARIO_IDS = ("toy", "shift1", "shift2", "s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8")

_LINEAR = ("shift1", "shift2", "s1", "s2", "s3", "s4")
_QUAD = ("s5", "s6", "s7", "s8")


@dataclass(frozen=True)
class ScenarioSpec:
    """Which scenario to draw, at what size."""

    id: str
    n: int = 200
    p: int = 20
    gamma: float = 0.5

    def __post_init__(self):
        ident = self.id.lower()
        if ident not in SCENARIO_IDS:
            raise ValueError(f"unknown scenario {self.id!r}; known: {', '.join(SCENARIO_IDS)}")
        object.__setattr__(self, "id", ident)
        if ident == "toy":
            object.__setattr__(self, "p", 1)
        if self.n < 1:
            raise ValueError("n must be positive")
        if ident in _LINEAR and self.p < 3:
            raise ValueError(f"scenario {ident} needs p >= 3")
        if ident in _QUAD and self.p < 2:
            raise ValueError(f"scenario {ident} needs p >= 2")
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("gamma must lie in (0, 1]")


@dataclass(frozen=True)
class PotentialSample:
    """Per-record ground truth behind one generated trial."""

    covariates: np.ndarray
    r_pos: np.ndarray
    r_neg: np.ndarray
    action: np.ndarray
    observed: np.ndarray
    propensity: float
    optimal: Optional[np.ndarray]  # sign(delta), None for toy


@dataclass(frozen=True)
class SimulatedTrial:
    spec: ScenarioSpec
    dataset: TrialDataset
    potentials: PotentialSample


def delta_function(spec: ScenarioSpec):
    """The treatment-interaction term, or None when the scenario has none."""
    if spec.id in _LINEAR:
        return lambda X: X[:, 0] - X[:, 1] + X[:, 2]
    if spec.id in _QUAD:
        return lambda X: 3.8 * (0.8 - X[:, 0] ** 2 - X[:, 1] ** 2)
    return None


def _mixture(gen: np.random.Generator, shape):
    """0.7 N(0,1) + 0.3 lognormal(0, 2) componentwise."""
    pick = gen.random(shape)
    normal = gen.normal(0.0, 1.0, shape)
    heavy = np.exp(gen.normal(0.0, 2.0, shape))
    return np.where(pick < 0.7, normal, heavy)


def sample_covariates(spec: ScenarioSpec, gen: np.random.Generator, m: int) -> np.ndarray:
    if spec.id == "toy":
        return (gen.integers(0, 2, m) * 2 - 1).astype(float).reshape(-1, 1)
    if spec.id == "shift1":
        return _mixture(gen, (m, spec.p))
    return gen.uniform(-1.0, 1.0, (m, spec.p))


def _sample_noise(spec: ScenarioSpec, gen: np.random.Generator, X: np.ndarray) -> np.ndarray:
    m = X.shape[0]
    if spec.id in ("s1", "s5"):
        return gen.normal(0.0, 4.0, m)
    if spec.id in ("s2", "s6"):
        sd = 2.0 * np.abs(1.0 + X[:, 0] + X[:, 1])
        return np.exp(gen.normal(0.0, 1.0, m) * sd)
    if spec.id in ("s3", "s7"):
        return np.exp(gen.normal(0.0, 2.0, m))
    if spec.id in ("s4", "s8"):
        return 0.5 * gen.weibull(0.3, m)
    if spec.id == "shift1":
        return gen.normal(0.0, 1.0, m)
    if spec.id == "shift2":
        return _mixture(gen, m)
    raise AssertionError(spec.id)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RandomSource):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"rng must be a RandomSource or numpy Generator, got {type(rng).__name__}")


def generate(spec: ScenarioSpec, rng) -> SimulatedTrial:
    """Draw one trial: covariates, uniform actions, both potential outcomes."""
    gen = _as_generator(rng)
    n = spec.n
    X = sample_covariates(spec, gen, n)
    action = gen.integers(0, 2, n) * 2 - 1
    if spec.id == "toy":
        # The product X*A selects which noise law the outcome is drawn from:
        # X*A = +1 -> N(-0.1, 1), X*A = -1 -> N(0, 0.5). Flipping the action
        # flips the product, so the potentials swap the two draws.
        eps1 = gen.normal(-0.1, 1.0, n)
        eps2 = gen.normal(0.0, 0.5, n)
        x = X[:, 0]
        r_pos = np.where(x > 0, eps1, eps2)
        r_neg = np.where(x > 0, eps2, eps1)
        optimal = None
    else:
        eps = _sample_noise(spec, gen, X)
        base = 1.0 + X[:, 0] + X[:, 1]
        delta = delta_function(spec)(X)
        r_pos = base + delta + eps
        r_neg = base - delta + eps
        optimal = sign_decision(delta)
    observed = np.where(action == 1, r_pos, r_neg)
    potentials = PotentialSample(
        covariates=X,
        r_pos=r_pos,
        r_neg=r_neg,
        action=action,
        observed=observed,
        propensity=PROPENSITY,
        optimal=optimal,
    )
    dataset = TrialDataset(X, action, observed, PROPENSITY)
    return SimulatedTrial(spec=spec, dataset=dataset, potentials=potentials)


def misclassification(rule, spec: ScenarioSpec, n_test: int, rng) -> float:
    """Disagreement rate with sign(delta) on fresh covariate draws."""
    fn = delta_function(spec)
    if fn is None:
        raise UnsupportedMetricError(f"scenario {spec.id!r} defines no optimal rule")
    gen = _as_generator(rng)
    X = sample_covariates(spec, gen, n_test)
    truth = sign_decision(fn(X))
    return float(np.mean(rule.decide_batch(X) != truth))


@dataclass(frozen=True)
class ValueMetrics:
    """Counterfactual outcome distribution of a rule on fresh draws."""

    mean: float
    quantiles: dict
    n_test: int


def value_metrics(rule, spec: ScenarioSpec, n_test: int, rng,
                  quantiles: Sequence[float] = (0.5, 0.25)) -> ValueMetrics:
    """Mean and empirical quantiles of R(rule(X)) over fresh potential draws."""
    gen = _as_generator(rng)
    trial = generate(ScenarioSpec(spec.id, n=n_test, p=spec.p, gamma=spec.gamma), gen)
    decisions = rule.decide_batch(trial.potentials.covariates)
    r = np.where(decisions == 1, trial.potentials.r_pos, trial.potentials.r_neg)
    qs = {float(q): float(np.quantile(r, q, method="inverted_cdf")) for q in quantiles}
    return ValueMetrics(mean=float(r.mean()), quantiles=qs, n_test=n_test)


@dataclass(frozen=True)
class EvaluationReport:
    """Aggregate of per-replication metrics for one (scenario, method) cell."""

    misclass_mean: Optional[float]
    misclass_sd: Optional[float]
    value_mean: float
    quantile_means: dict
    per_replication: list
    reps: int

    @staticmethod
    def aggregate(rows: Sequence[dict]) -> "EvaluationReport":
        """rows: dicts with keys misclass (float or None), value_mean,
        quantiles (dict level -> value)."""
        if not rows:
            raise ValueError("no replications to aggregate")
        mis = [r["misclass"] for r in rows if r.get("misclass") is not None]
        mis_mean = float(np.mean(mis)) if mis else None
        mis_sd = float(np.std(mis, ddof=1)) if len(mis) > 1 else (0.0 if mis else None)
        vals = np.array([r["value_mean"] for r in rows], dtype=float)
        levels = sorted({lv for r in rows for lv in r["quantiles"]})
        q_means = {
            lv: float(np.mean([r["quantiles"][lv] for r in rows])) for lv in levels
        }
        return EvaluationReport(
            misclass_mean=mis_mean,
            misclass_sd=mis_sd,
            value_mean=float(vals.mean()),
            quantile_means=q_means,
            per_replication=list(rows),
            reps=len(rows),
        )


def normal_cvar(mu: float, sigma: float, gamma: float) -> float:
    """Mean of the lower gamma-tail of N(mu, sigma^2): mu - sigma*phi(z)/gamma
    with z the gamma-quantile of the standard normal."""
    if sigma < 0.0:
        raise ValueError("sigma must be nonnegative")
    if not (0.0 < gamma <= 1.0):
        raise ValueError("gamma must lie in (0, 1]")
    if gamma == 1.0 or sigma == 0.0:
        return float(mu)
    z = ndtri(gamma)
    pdf = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return float(mu - sigma * pdf / gamma)
