"""Penalized least-squares baseline on the interaction basis.

Regresses the outcome on (1, X, A, X*A) with an l1 penalty on everything but
the intercept, then reads the decision rule off the treatment-interaction
part: d(x) = sign(beta_A + x . beta_XA). The standard linear mean-value
baseline our tail-criterion methods are compared against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .data import ScalingTransform, TrialDataset
from .models import sign_decision


def expand_basis(X: np.ndarray, action: np.ndarray) -> np.ndarray:
    """Columns [1, X, A, X*A], width 2p + 2."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    a = np.asarray(action, dtype=float).reshape(-1, 1)
    ones = np.ones((X.shape[0], 1))
    return np.hstack([ones, X, a, X * a])


@dataclass
class PlsModel:
    """Fitted baseline. coef is laid out as the basis: [1, X, A, X*A]."""

    coef: np.ndarray
    lam: float
    p: int
    converged: bool
    sweeps: int
    scaling: Optional[ScalingTransform] = None

    @property
    def treat_coef(self) -> np.ndarray:
        """(beta_A, beta_XA): the part the rule depends on."""
        return self.coef[self.p + 1 :]

    def contrast(self, X) -> np.ndarray:
        """Estimated E[R | x, A=+1] - E[R | x, A=-1], up to the factor 2."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        t = self.treat_coef
        return t[0] + X @ t[1:]

    def decide_batch(self, X) -> np.ndarray:
        return sign_decision(self.contrast(X))

    def decide(self, x) -> int:
        return int(self.decide_batch(np.atleast_2d(x))[0])

    def predict(self, X, action) -> np.ndarray:
        return expand_basis(X, action) @ self.coef

    def decide_raw(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.scaling is not None:
            X = self.scaling.apply(X)
        return self.decide_batch(X)

    def to_json_dict(self) -> dict:
        out = {
            "kind": "pls_model",
            "coef": [float(v) for v in self.coef],
            "lam": float(self.lam),
            "p": int(self.p),
            "converged": bool(self.converged),
            "sweeps": int(self.sweeps),
        }
        if self.scaling is not None:
            out["scaling"] = {
                "center": [float(v) for v in self.scaling.center],
                "scale": [float(v) for v in self.scaling.scale],
            }
        return out

    @staticmethod
    def from_json_dict(d: dict) -> "PlsModel":
        if d.get("kind") != "pls_model":
            raise ValueError(f"not a pls-model payload: kind={d.get('kind')!r}")
        scaling = None
        if "scaling" in d:
            scaling = ScalingTransform(
                np.asarray(d["scaling"]["center"], dtype=float),
                np.asarray(d["scaling"]["scale"], dtype=float),
            )
        return PlsModel(
            coef=np.asarray(d["coef"], dtype=float),
            lam=float(d["lam"]),
            p=int(d["p"]),
            converged=bool(d["converged"]),
            sweeps=int(d["sweeps"]),
            scaling=scaling,
        )


def pls_objective(data: TrialDataset, coef: np.ndarray, lam: float) -> float:
    """(1/n) ||R - Phi beta||^2 + lam * sum_{k >= 1} |beta_k|."""
    Phi = expand_basis(data.X, data.action)
    resid = data.outcome - Phi @ coef
    return float(resid @ resid) / data.n + lam * float(np.abs(coef[1:]).sum())


def pls_kkt_residual(data: TrialDataset, coef: np.ndarray, lam: float) -> float:
    """Max violation of the coordinatewise optimality conditions."""
    Phi = expand_basis(data.X, data.action)
    grad = -2.0 * (Phi.T @ (data.outcome - Phi @ coef)) / data.n
    res = abs(grad[0])
    for k in range(1, coef.shape[0]):
        if coef[k] != 0.0:
            res = max(res, abs(grad[k] + lam * np.sign(coef[k])))
        else:
            res = max(res, max(abs(grad[k]) - lam, 0.0))
    return float(res)


def pls_fit(
    data: TrialDataset,
    lam: float,
    tol: float = 1e-8,
    max_sweeps: int = 10000,
    coef0: Optional[np.ndarray] = None,
) -> PlsModel:
    """Cyclic coordinate descent on the interaction basis.

    The intercept column is unpenalized. Stops when the largest coordinate
    move in a sweep drops to tol.
    """
    if lam < 0.0:
        raise ValueError("lam must be nonnegative")
    Phi = np.ascontiguousarray(expand_basis(data.X, data.action))
    d = Phi.shape[1]
    penalized = np.ones(d, dtype=np.uint8)
    penalized[0] = 0
    beta0 = np.zeros(d) if coef0 is None else np.asarray(coef0, dtype=float)
    if beta0.shape != (d,):
        raise ValueError(f"coef0 must have length {d}")
    coef, sweeps, converged, _ = _kernels.lasso_cd(
        Phi, data.outcome, lam, penalized, beta0, tol, max_sweeps
    )
    return PlsModel(
        coef=coef,
        lam=float(lam),
        p=data.p,
        converged=bool(converged),
        sweeps=int(sweeps),
        scaling=data.scaling,
    )
