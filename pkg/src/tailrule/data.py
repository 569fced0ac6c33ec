"""Trial data containers, CSV ingestion, fold splitting, and seeded randomness.

A trial dataset holds covariates X (n x p), a binary action in {-1, +1},
a real-valued outcome where larger is better, and the known randomization
probability of the observed action. All downstream estimators consume this
container and nothing else.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .errors import ParseError, SchemaError, ValidationError

# Randomization probabilities must stay this far inside (0, 1) unless the
# caller overrides the margin.
DEFAULT_OVERLAP = 0.01


@dataclass(frozen=True)
class TrialRecord:
    """One observation: covariates, action taken, outcome, propensity."""

    covariates: np.ndarray
    action: int
    outcome: float
    propensity: float


@dataclass(frozen=True)
class ScalingTransform:
    """Invertible per-column affine map x -> (x - center) / scale.

    Columns that were not selected for scaling carry center 0 and scale 1,
    so the transform is always full-width and invertible.
    """

    center: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        scale = np.asarray(self.scale, dtype=float)
        if center.shape != scale.shape or center.ndim != 1:
            raise ValidationError("scaling center/scale must be 1-d arrays of equal length")
        if not np.all(np.isfinite(center)) or not np.all(np.isfinite(scale)):
            raise ValidationError("scaling parameters must be finite")
        if np.any(scale == 0.0):
            raise ValidationError("scaling is not invertible: zero scale entry")
        object.__setattr__(self, "center", _readonly(center))
        object.__setattr__(self, "scale", _readonly(scale))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.center) / self.scale

    def invert(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) * self.scale + self.center


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class TrialDataset:
    """Immutable column store for one trial sample.

    Arrays are validated once at construction and frozen; subsets share the
    scaling transform of the parent so fold splits stay in the same
    coordinate system.
    """

    __slots__ = ("X", "action", "outcome", "propensity", "scaling")

    def __init__(
        self,
        X,
        action,
        outcome,
        propensity,
        scaling: Optional[ScalingTransform] = None,
        overlap: float = DEFAULT_OVERLAP,
    ):
        X = np.array(X, dtype=float, order="C", copy=True)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValidationError("covariates must form a non-empty (n, p) matrix")
        n = X.shape[0]
        action = np.asarray(action)
        outcome = np.array(outcome, dtype=float, order="C", copy=True)
        propensity = np.broadcast_to(np.asarray(propensity, dtype=float), (n,)).copy()
        if action.shape != (n,) or outcome.shape != (n,):
            raise ValidationError("action/outcome length must match the covariate rows")
        if not np.all(np.isfinite(X)):
            rows = np.where(~np.isfinite(X).all(axis=1))[0]
            raise ValidationError(f"non-finite covariate at row {rows[0]}")
        if not np.all(np.isfinite(outcome)):
            rows = np.where(~np.isfinite(outcome))[0]
            raise ValidationError(f"non-finite outcome at row {rows[0]}")
        act = np.array(action, dtype=np.int64, order="C", copy=True)
        if not np.all((act == 1) | (act == -1)):
            rows = np.where((act != 1) & (act != -1))[0]
            raise ValidationError(f"action must be -1 or +1, offending row {rows[0]}")
        if not (0.0 <= overlap < 0.5):
            raise ValueError("overlap margin must lie in [0, 0.5)")
        bad = ~((propensity >= overlap) & (propensity <= 1.0 - overlap))
        if np.any(bad):
            row = int(np.where(bad)[0][0])
            raise ValidationError(
                f"propensity {propensity[row]!r} at row {row} outside "
                f"[{overlap}, {1.0 - overlap}]"
            )
        if scaling is not None and scaling.center.shape[0] != X.shape[1]:
            raise ValidationError("scaling width does not match covariate count")
        self.X = _readonly(X)
        self.action = _readonly(act)
        self.outcome = _readonly(outcome)
        self.propensity = _readonly(propensity)
        self.scaling = scaling

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def record(self, i: int) -> TrialRecord:
        return TrialRecord(
            covariates=self.X[i],
            action=int(self.action[i]),
            outcome=float(self.outcome[i]),
            propensity=float(self.propensity[i]),
        )

    def records(self) -> Iterator[TrialRecord]:
        for i in range(self.n):
            yield self.record(i)

    def subset(self, indices) -> "TrialDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return TrialDataset(
            self.X[idx],
            self.action[idx],
            self.outcome[idx],
            self.propensity[idx],
            scaling=self.scaling,
            overlap=0.0,
        )

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"TrialDataset(n={self.n}, p={self.p}, scaled={self.scaling is not None})"


@dataclass(frozen=True)
class CsvSchema:
    """Column layout for CSV ingestion.

    covariates      ordered covariate column names
    action_col      column holding the action
    outcome_col     column holding the outcome
    propensity_col  column holding per-row propensities, or None
    propensity      constant propensity used when propensity_col is None
    action_coding   "pm1" for {-1,+1} columns, "01" to recode {0,1} -> {-1,+1}
    scale_cols      covariate columns to center/scale (opt-in; () scales none)
    overlap         overlap margin passed through to the dataset
    """

    covariates: Sequence[str]
    action_col: str = "action"
    outcome_col: str = "outcome"
    propensity_col: Optional[str] = "propensity"
    propensity: Optional[float] = None
    action_coding: str = "pm1"
    scale_cols: Sequence[str] = ()
    overlap: float = DEFAULT_OVERLAP

    def __post_init__(self):
        if not self.covariates:
            raise SchemaError("schema needs at least one covariate column")
        if self.action_coding not in ("pm1", "01"):
            raise SchemaError(f"unknown action coding {self.action_coding!r}")
        if self.propensity_col is None and self.propensity is None:
            raise SchemaError("either propensity_col or a constant propensity is required")
        unknown = set(self.scale_cols) - set(self.covariates)
        if unknown:
            raise SchemaError(f"scale_cols not among covariates: {sorted(unknown)}")


def _parse_float(raw: str, row: int, col: str) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ParseError(f"row {row}, column {col!r}: cannot parse {raw!r} as a number") from None


def load_csv(path, schema: CsvSchema) -> TrialDataset:
    """Read a trial CSV into a validated dataset.

    Lines starting with '#' are skipped (output files of this package embed a
    provenance comment). Missing columns raise SchemaError naming the column;
    bad cells raise ParseError naming row and column.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    needed = list(schema.covariates) + [schema.action_col, schema.outcome_col]
    if schema.propensity_col is not None:
        needed.append(schema.propensity_col)
    missing = [c for c in needed if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    col_ix = {c: header.index(c) for c in needed}

    n = len(rows) - 1
    if n == 0:
        raise ValidationError(f"{path}: no data rows")
    X = np.empty((n, len(schema.covariates)))
    action = np.empty(n, dtype=np.int64)
    outcome = np.empty(n)
    propensity = np.empty(n)
    for i, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise ParseError(f"row {i}: expected {len(header)} fields, got {len(row)}")
        for j, c in enumerate(schema.covariates):
            X[i, j] = _parse_float(row[col_ix[c]], i, c)
        a_raw = _parse_float(row[col_ix[schema.action_col]], i, schema.action_col)
        if schema.action_coding == "01":
            if a_raw not in (0.0, 1.0):
                raise ParseError(
                    f"row {i}, column {schema.action_col!r}: expected 0/1, got {a_raw!r}"
                )
            a_raw = 2.0 * a_raw - 1.0
        if a_raw not in (-1.0, 1.0):
            raise ParseError(
                f"row {i}, column {schema.action_col!r}: expected -1/+1, got {a_raw!r}"
            )
        action[i] = int(a_raw)
        outcome[i] = _parse_float(row[col_ix[schema.outcome_col]], i, schema.outcome_col)
        if schema.propensity_col is not None:
            propensity[i] = _parse_float(row[col_ix[schema.propensity_col]], i, schema.propensity_col)
        else:
            propensity[i] = schema.propensity

    scaling = None
    if schema.scale_cols:
        center = np.zeros(len(schema.covariates))
        scale = np.ones(len(schema.covariates))
        for j, c in enumerate(schema.covariates):
            if c in schema.scale_cols:
                mu = X[:, j].mean()
                sd = X[:, j].std()
                if sd == 0.0:
                    raise ValidationError(f"column {c!r} is constant; scaling not invertible")
                center[j] = mu
                scale[j] = sd
        scaling = ScalingTransform(center, scale)
        X = (X - center) / scale
    return TrialDataset(X, action, outcome, propensity, scaling=scaling, overlap=schema.overlap)


def write_csv(dataset: TrialDataset, path, header_comment: Optional[str] = None) -> None:
    """Write a dataset as x1..xp, action, outcome, propensity.

    Floats are written with repr so load_csv round-trips bit-exactly.
    Covariates are written in the dataset's own (possibly scaled) coordinates.
    """
    names = [f"x{j + 1}" for j in range(dataset.p)]
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(names + ["action", "outcome", "propensity"])
        for i in range(dataset.n):
            writer.writerow(
                [repr(float(v)) for v in dataset.X[i]]
                + [
                    str(int(dataset.action[i])),
                    repr(float(dataset.outcome[i])),
                    repr(float(dataset.propensity[i])),
                ]
            )


def default_schema(p: int, **overrides) -> CsvSchema:
    """Schema matching write_csv's column layout."""
    return CsvSchema(covariates=[f"x{j + 1}" for j in range(p)], **overrides)


@dataclass(frozen=True)
class RandomSource:
    """Reproducible randomness: a root seed plus an integer stream id.

    Two sources with the same (seed, stream) yield identical generators;
    distinct stream ids yield statistically independent streams. Callers
    fan out by allocating stream ids, so adding replications never perturbs
    earlier ones.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, k: int) -> "RandomSource":
        # Single level of derivation; callers needing a deeper hierarchy
        # should allocate disjoint stream ranges themselves.
        if k < 0:
            raise ValueError("substream index must be nonnegative")
        return RandomSource(self.seed, self.stream * 1024 + k + 1)


def split_kfold(n: int, k: int, rng: np.random.Generator):
    """Partition range(n) into k folds after one shuffle.

    Returns a list of (train_idx, val_idx) pairs with sorted indices. Fold
    sizes differ by at most one; every index lands in exactly one validation
    fold.
    """
    if k < 2:
        raise ValueError("need at least 2 folds")
    if k > n:
        raise ValueError(f"cannot split {n} rows into {k} folds")
    perm = rng.permutation(n)
    sizes = np.full(k, n // k, dtype=np.int64)
    sizes[: n % k] += 1
    out = []
    start = 0
    for f in range(k):
        val = np.sort(perm[start : start + sizes[f]])
        train = np.sort(np.concatenate([perm[: start], perm[start + sizes[f] :]]))
        out.append((train, val))
        start += sizes[f]
    return out
