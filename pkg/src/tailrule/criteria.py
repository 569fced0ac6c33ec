"""Policy-value and lower-tail criteria for a fixed decision rule.

All estimators are inverse-propensity weighted: a record counts only when the
observed action agrees with the rule's decision, with weight 1/propensity.
The tail criterion at level gamma maximizes

    m(alpha) = mean_i w_i * (alpha - (alpha - R_i)_+ / gamma)

over alpha; the maximizer is attained at one of the matched outcomes, so the
search reduces to a sorted sweep over those knots.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import TrialDataset
from .errors import DegenerateMatchError


@dataclass(frozen=True)
class CriterionValue:
    """A criterion evaluation: the number plus how it was obtained.

    kind          "value", "quantile", "m0", or "m1"
    value         the estimate (0.0 when degenerate for value-type criteria)
    gamma         tail level, None for plain value
    alpha         maximizing/threshold location when the criterion has one
    matched_mass  mean of matched importance weights, mean_i 1(A_i = d_i)/pi_i
    degenerate    True when no record matched the rule
    """

    kind: str
    value: float
    gamma: Optional[float] = None
    alpha: Optional[float] = None
    matched_mass: float = 0.0
    degenerate: bool = False


def as_decisions(decisions, n: int) -> np.ndarray:
    """Validate a rule's decision vector: n entries, each -1 or +1."""
    d = np.asarray(decisions)
    if d.shape != (n,):
        raise ValueError(f"decisions must have shape ({n},), got {d.shape}")
    d = d.astype(np.int64)
    if not np.all((d == 1) | (d == -1)):
        raise ValueError("decisions must be -1 or +1")
    return d


def matched_weights(data: TrialDataset, decisions) -> np.ndarray:
    """Importance weights 1(A_i = d_i) / pi_i, zero for unmatched records."""
    d = as_decisions(decisions, data.n)
    return np.where(data.action == d, 1.0 / data.propensity, 0.0)


def _check_gamma(gamma: float) -> float:
    if not (0.0 < gamma <= 1.0):
        raise ValueError(f"gamma must lie in (0, 1], got {gamma!r}")
    return float(gamma)


def _knot_maximize(y: np.ndarray, w: np.ndarray, gamma: float, scale: float):
    """Maximize sum_i w_i (alpha - (alpha - y_i)_+ / gamma) / scale over alpha.

    The objective is concave piecewise-affine with knots at the y_i, so the
    maximum is attained at a knot; ties return the smallest maximizing knot.
    Runs in O(m log m) via prefix sums over the sorted knots. Requires
    positive weights and m >= 1.
    """
    order = np.argsort(y, kind="stable")
    ys = y[order]
    ws = w[order]
    w_tot = ws.sum()
    cum_w = np.cumsum(ws)
    cum_wy = np.cumsum(ws * ys)
    # At alpha = ys[k]: sum w*(alpha - y)_+ = alpha*cum_w[k] - cum_wy[k]
    # (records with y == alpha contribute zero either way).
    vals = (w_tot * ys - (ys * cum_w - cum_wy) / gamma) / scale
    best = int(np.argmax(vals))
    return float(vals[best]), float(ys[best])


def evaluate_value(data: TrialDataset, decisions, normalized: bool = False) -> CriterionValue:
    """Importance-weighted mean outcome under the rule.

    The default divides by n (unbiased under known propensities); with
    normalized=True it divides by the summed matched weights instead. A rule
    matching no record yields value 0.0 with the degenerate flag set.
    """
    w = matched_weights(data, decisions)
    mass = float(w.mean())
    if mass == 0.0:
        return CriterionValue(kind="value", value=0.0, matched_mass=0.0, degenerate=True)
    denom = w.sum() if normalized else float(data.n)
    return CriterionValue(
        kind="value",
        value=float((w * data.outcome).sum() / denom),
        matched_mass=mass,
    )


def evaluate_quantile(data: TrialDataset, decisions, gamma: float) -> CriterionValue:
    """Weighted gamma-quantile of the matched outcome distribution.

    Returns inf{alpha : F_hat(alpha) >= gamma} where F_hat is the
    importance-weight-normalized CDF of matched outcomes. Raises
    DegenerateMatchError when nothing matches.
    """
    gamma = _check_gamma(gamma)
    w = matched_weights(data, decisions)
    mask = w > 0.0
    if not mask.any():
        raise DegenerateMatchError("no observation matches the rule; quantile undefined")
    y = data.outcome[mask]
    ww = w[mask]
    order = np.argsort(y, kind="stable")
    cdf = np.cumsum(ww[order]) / ww.sum()
    k = int(np.searchsorted(cdf, gamma - 1e-12))
    k = min(k, len(order) - 1)
    return CriterionValue(
        kind="quantile",
        value=float(y[order][k]),
        gamma=gamma,
        alpha=float(y[order][k]),
        matched_mass=float(w.mean()),
    )


def evaluate_m0(
    data: TrialDataset, decisions, gamma: float, normalized: bool = False
) -> CriterionValue:
    """Lower-tail criterion of the rule at level gamma.

    maximizes mean_i w_i (alpha - (alpha - R_i)_+ / gamma) over alpha, where
    w are the matched importance weights. Reports the smallest maximizing
    alpha. With normalized=True the mean is over summed weights rather
    than n. Degenerate rules yield value 0.0 and alpha None.
    """
    gamma = _check_gamma(gamma)
    w = matched_weights(data, decisions)
    mask = w > 0.0
    if not mask.any():
        return CriterionValue(kind="m0", value=0.0, gamma=gamma, matched_mass=0.0, degenerate=True)
    scale = w.sum() if normalized else float(data.n)
    value, alpha = _knot_maximize(data.outcome[mask], w[mask], gamma, scale)
    return CriterionValue(
        kind="m0", value=value, gamma=gamma, alpha=alpha, matched_mass=float(w.mean())
    )


def evaluate_m1(
    data: TrialDataset, decisions, gamma: float, normalized: bool = False
) -> CriterionValue:
    """Equal-weight blend of the value and the tail criterion.

    value = 0.5 * evaluate_value + 0.5 * evaluate_m0, with alpha and
    matched mass taken from the tail part.
    """
    v = evaluate_value(data, decisions, normalized=normalized)
    m0 = evaluate_m0(data, decisions, gamma, normalized=normalized)
    return CriterionValue(
        kind="m1",
        value=0.5 * v.value + 0.5 * m0.value,
        gamma=m0.gamma,
        alpha=m0.alpha,
        matched_mass=m0.matched_mass,
        degenerate=v.degenerate or m0.degenerate,
    )


def cvar_scalar(sample, gamma: float, weights=None) -> tuple[float, float]:
    """Lower-tail conditional value at risk of a weighted scalar sample.

    Returns (cvar, alpha): the maximum over alpha of
    alpha - E_w[(alpha - Y)_+] / gamma with self-normalized weights, and the
    smallest maximizing alpha. With gamma = 1 this is the weighted mean.
    """
    gamma = _check_gamma(gamma)
    y = np.asarray(sample, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("empty sample")
    if weights is None:
        w = np.ones_like(y)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.shape != y.shape:
            raise ValueError("weights must match the sample length")
        if np.any(w < 0.0) or w.sum() <= 0.0:
            raise ValueError("weights must be nonnegative with positive total")
        keep = w > 0.0
        y, w = y[keep], w[keep]
    return _knot_maximize(y, w, gamma, w.sum())
