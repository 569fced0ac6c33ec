"""Hyperparameter selection by K-fold cross-validation.

cv_select is estimator-agnostic: candidates are opaque config objects and a
fitter callable turns (training fold, candidate) into a fitted rule. The
score is the chosen criterion of the rule's decisions on the validation
fold, averaged over folds. Folds are drawn once and shared by every
candidate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .criteria import evaluate_m0, evaluate_m1, evaluate_value
from .data import RandomSource, TrialDataset, split_kfold

CRITERIA = ("m0", "m1", "value")


@dataclass
class CvRow:
    """One candidate's cross-validation outcome."""

    index: int
    lam: Optional[float]
    bandwidth: Optional[float]
    fold_scores: list
    failures: list  # (fold, message) pairs
    score: float    # mean over successful folds, -inf if none succeeded


@dataclass
class CvTable:
    rows: list
    k: int
    criterion: str
    best_index: int

    @property
    def best_row(self) -> CvRow:
        return self.rows[self.best_index]

    def write_csv(self, path, header_comment: Optional[str] = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            writer = csv.writer(fh)
            writer.writerow(
                ["index", "lam", "bandwidth", "score", "selected"]
                + [f"fold{j}" for j in range(self.k)]
                + ["failures"]
            )
            for row in self.rows:
                folds = list(row.fold_scores) + [""] * (self.k - len(row.fold_scores))
                writer.writerow(
                    [
                        row.index,
                        "" if row.lam is None else repr(row.lam),
                        "" if row.bandwidth is None else repr(row.bandwidth),
                        repr(row.score) if np.isfinite(row.score) else "-inf",
                        int(row.index == self.best_index),
                    ]
                    + [repr(s) if s is not None else "" for s in folds]
                    + ["; ".join(f"fold {f}: {m}" for f, m in row.failures)]
                )


def _score_decisions(criterion: str, fold: TrialDataset, decisions, gamma: float) -> float:
    if criterion == "m0":
        return evaluate_m0(fold, decisions, gamma).value
    if criterion == "m1":
        return evaluate_m1(fold, decisions, gamma).value
    return evaluate_value(fold, decisions).value


def cv_select(
    data: TrialDataset,
    candidates: Sequence,
    k: int,
    criterion: str,
    rng,
    fitter: Callable,
    gamma: float = 0.5,
):
    """Pick the candidate maximizing the cross-validated criterion.

    fitter(train_fold, candidate, fold_rng) must return an object with
    decide_batch. A fold whose fit raises is recorded as a failure and
    contributes nothing to that candidate's mean; a candidate with no
    successful fold scores -inf. Ties break to the smallest lam attribute,
    then the smallest bandwidth. Returns (best candidate, CvTable).
    """
    if len(candidates) == 0:
        raise ValueError("empty candidate grid")
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}; choose from {CRITERIA}")
    source = rng if isinstance(rng, RandomSource) else None
    gen = rng.generator() if source is not None else rng
    if not isinstance(gen, np.random.Generator):
        raise TypeError("rng must be a RandomSource or numpy Generator")
    folds = split_kfold(data.n, k, gen)
    # Fold-level fitting rngs depend only on the fold, so duplicate
    # candidates see identical randomness and score identically.
    if source is not None:
        fold_rngs = [source.substream(f) for f in range(k)]
    else:
        fold_rngs = [RandomSource(int(gen.integers(2**63)), f) for f in range(k)]

    rows = []
    for idx, cand in enumerate(candidates):
        fold_scores = []
        failures = []
        for f, (train_ix, val_ix) in enumerate(folds):
            train = data.subset(train_ix)
            val = data.subset(val_ix)
            try:
                rule = fitter(train, cand, fold_rngs[f])
                fold_scores.append(
                    _score_decisions(criterion, val, rule.decide_batch(val.X), gamma)
                )
            except Exception as exc:  # recorded, not silently dropped
                failures.append((f, f"{type(exc).__name__}: {exc}"))
        score = float(np.mean(fold_scores)) if fold_scores else -np.inf
        rows.append(
            CvRow(
                index=idx,
                lam=getattr(cand, "lam", None),
                bandwidth=getattr(cand, "bandwidth", None),
                fold_scores=fold_scores,
                failures=failures,
                score=score,
            )
        )

    if all(not np.isfinite(r.score) for r in rows):
        raise RuntimeError("every candidate failed on every fold")

    def tie_key(row: CvRow):
        lam = row.lam if row.lam is not None else np.inf
        bw = row.bandwidth if row.bandwidth is not None else np.inf
        return (-row.score, lam, bw, row.index)

    best_index = min(rows, key=tie_key).index
    table = CvTable(rows=rows, k=k, criterion=criterion, best_index=best_index)
    return candidates[best_index], table


def default_lambda_grid() -> np.ndarray:
    """13 log-spaced penalty weights, 2^-8 .. 2^4."""
    return 2.0 ** np.arange(-8, 5, dtype=float)


def default_bandwidth_grid(X) -> np.ndarray:
    """Median pairwise distance scaled by {0.5, 1, 2}."""
    from .models import median_heuristic

    med = median_heuristic(X)
    return med * np.array([0.5, 1.0, 2.0])
