"""Decision-function models, penalties, and persistence.

Two functional forms share one container: a linear score w.x + b, and a
Gaussian-kernel expansion sum_j w_j k(x, anchor_j) + b with
k(x, x') = exp(-||x - x'||^2 / bandwidth^2). The decision is the sign of the
score with sign(0) = +1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .data import ScalingTransform

FORMS = ("linear", "kernel")
PENALTIES = ("l2", "l1", "rkhs")


def sign_decision(score) -> np.ndarray:
    """Sign with the tie broken toward +1."""
    return np.where(np.asarray(score) >= 0.0, 1, -1).astype(np.int64)


def gaussian_gram(X, anchors, bandwidth: float) -> np.ndarray:
    """Gram matrix exp(-||x - a||^2 / bandwidth^2), rows over X."""
    if not (bandwidth > 0.0 and np.isfinite(bandwidth)):
        raise ValueError(f"bandwidth must be positive and finite, got {bandwidth!r}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    A = np.atleast_2d(np.asarray(anchors, dtype=float))
    sq = (
        np.sum(X * X, axis=1)[:, None]
        + np.sum(A * A, axis=1)[None, :]
        - 2.0 * (X @ A.T)
    )
    np.clip(sq, 0.0, None, out=sq)
    return np.exp(-sq / (bandwidth * bandwidth))


def median_heuristic(X) -> float:
    """Median pairwise Euclidean distance between distinct rows.

    The usual default bandwidth for Gaussian-kernel models; raises when all
    rows coincide (every distance zero).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    if n < 2:
        raise ValueError("median heuristic needs at least two rows")
    sq = (
        np.sum(X * X, axis=1)[:, None]
        + np.sum(X * X, axis=1)[None, :]
        - 2.0 * (X @ X.T)
    )
    np.clip(sq, 0.0, None, out=sq)
    d = np.sqrt(sq[np.triu_indices(n, k=1)])
    med = float(np.median(d))
    if med == 0.0:
        raise ValueError("median pairwise distance is zero; bandwidth undefined")
    return med


@dataclass
class DecisionFunction:
    """A scored decision rule.

    weights/intercept live in the coordinates the model was fitted in. When
    the training dataset carried a scaling transform it is stored here, and
    score_raw/decide_raw apply it before scoring, so the model can be used
    directly on unscaled inputs.
    """

    form: str
    weights: np.ndarray
    intercept: float
    penalty: str = "l2"
    lam: float = 0.0
    bandwidth: Optional[float] = None
    anchors: Optional[np.ndarray] = None
    scaling: Optional[ScalingTransform] = None

    def __post_init__(self):
        if self.form not in FORMS:
            raise ValueError(f"unknown form {self.form!r}")
        if self.penalty not in PENALTIES:
            raise ValueError(f"unknown penalty {self.penalty!r}")
        if self.lam < 0.0:
            raise ValueError("penalty weight must be nonnegative")
        self.weights = np.ascontiguousarray(self.weights, dtype=float)
        if self.weights.ndim != 1:
            raise ValueError("weights must be a vector")
        self.intercept = float(self.intercept)
        if self.form == "kernel":
            if self.anchors is None or self.bandwidth is None:
                raise ValueError("kernel form requires anchors and bandwidth")
            self.anchors = np.ascontiguousarray(self.anchors, dtype=float)
            if self.anchors.ndim != 2 or self.anchors.shape[0] != self.weights.shape[0]:
                raise ValueError("one weight per anchor row is required")
            if not (self.bandwidth > 0.0):
                raise ValueError("bandwidth must be positive")
            if self.penalty == "l1":
                raise ValueError("kernel form supports l2/rkhs penalties only")
        elif self.penalty == "rkhs":
            raise ValueError("rkhs penalty requires the kernel form")

    # -- scoring in fitted coordinates -------------------------------------

    def design(self, X) -> np.ndarray:
        """Feature matrix the weights act on: X itself, or kernel columns."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.form == "linear":
            return X
        return gaussian_gram(X, self.anchors, self.bandwidth)

    def score_batch(self, X) -> np.ndarray:
        return self.design(X) @ self.weights + self.intercept

    def score(self, x) -> float:
        return float(self.score_batch(np.atleast_2d(x))[0])

    def decide_batch(self, X) -> np.ndarray:
        return sign_decision(self.score_batch(X))

    def decide(self, x) -> int:
        return int(sign_decision(self.score(x)))

    # -- scoring raw (unscaled) inputs --------------------------------------

    def score_raw(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.scaling is not None:
            X = self.scaling.apply(X)
        return self.score_batch(X)

    def decide_raw(self, X) -> np.ndarray:
        return sign_decision(self.score_raw(X))


def soft_threshold(v, t: float) -> np.ndarray:
    """Elementwise sign(v) * max(|v| - t, 0)."""
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.clip(np.abs(v) - t, 0.0, None)


def penalty_value(model: DecisionFunction, gram: Optional[np.ndarray] = None) -> float:
    """Penalty term of the training objective for this model."""
    w = model.weights
    if model.penalty == "l2":
        return 0.5 * model.lam * float(w @ w)
    if model.penalty == "l1":
        return model.lam * float(np.abs(w).sum())
    K = gram if gram is not None else gaussian_gram(model.anchors, model.anchors, model.bandwidth)
    return 0.5 * model.lam * float(w @ K @ w)


def penalty_gradient(model: DecisionFunction, gram: Optional[np.ndarray] = None) -> np.ndarray:
    """Gradient of the penalty; defined for the smooth penalties only."""
    if model.penalty == "l2":
        return model.lam * model.weights
    if model.penalty == "rkhs":
        K = gram if gram is not None else gaussian_gram(model.anchors, model.anchors, model.bandwidth)
        return model.lam * (K @ model.weights)
    raise ValueError("l1 penalty is nonsmooth; use penalty_prox")


def penalty_prox(model: DecisionFunction, w, step: float) -> np.ndarray:
    """Proximal map of the penalty at step size `step` (l1 only)."""
    if model.penalty != "l1":
        raise ValueError("prox is exposed for the l1 penalty; smooth penalties use gradients")
    return soft_threshold(w, step * model.lam)


# -- persistence -------------------------------------------------------------


def to_json_dict(model: DecisionFunction) -> dict:
    out = {
        "kind": "decision_function",
        "form": model.form,
        "weights": [float(v) for v in model.weights],
        "intercept": float(model.intercept),
        "penalty": model.penalty,
        "lam": float(model.lam),
    }
    if model.bandwidth is not None:
        out["bandwidth"] = float(model.bandwidth)
    if model.anchors is not None:
        out["anchors"] = [[float(v) for v in row] for row in model.anchors]
    if model.scaling is not None:
        out["scaling"] = {
            "center": [float(v) for v in model.scaling.center],
            "scale": [float(v) for v in model.scaling.scale],
        }
    return out


def from_json_dict(d: dict) -> DecisionFunction:
    if d.get("kind") != "decision_function":
        raise ValueError(f"not a decision-function payload: kind={d.get('kind')!r}")
    scaling = None
    if "scaling" in d:
        scaling = ScalingTransform(
            np.asarray(d["scaling"]["center"], dtype=float),
            np.asarray(d["scaling"]["scale"], dtype=float),
        )
    return DecisionFunction(
        form=d["form"],
        weights=np.asarray(d["weights"], dtype=float),
        intercept=d["intercept"],
        penalty=d["penalty"],
        lam=d["lam"],
        bandwidth=d.get("bandwidth"),
        anchors=np.asarray(d["anchors"], dtype=float) if "anchors" in d else None,
        scaling=scaling,
    )


def save_model(model, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def model_to_dict(model) -> dict:
    """Serialize any fitted rule this package produces."""
    if isinstance(model, DecisionFunction):
        return to_json_dict(model)
    to_dict = getattr(model, "to_json_dict", None)
    if to_dict is not None:
        return to_dict()
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "decision_function":
        return from_json_dict(d)
    if kind == "pls_model":
        from .pls import PlsModel

        return PlsModel.from_json_dict(d)
    raise ValueError(f"unknown model kind {kind!r}")
