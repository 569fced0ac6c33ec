import numpy as np
import pytest

from tailrule.data import (
    CsvSchema,
    RandomSource,
    ScalingTransform,
    TrialDataset,
    default_schema,
    load_csv,
    split_kfold,
    write_csv,
)
from tailrule.errors import ParseError, SchemaError, ValidationError


def _tiny(**kw):
    base = dict(
        X=[[0.0, 1.0], [1.0, 2.0], [2.0, 3.0]],
        action=[1, -1, 1],
        outcome=[0.5, -1.0, 2.0],
        propensity=0.5,
    )
    base.update(kw)
    return TrialDataset(**base)


# ---------------------------------------------------------------------------
# Container validation
# ---------------------------------------------------------------------------

def test_shapes_and_broadcast():
    d = _tiny()
    assert (d.n, d.p) == (3, 2)
    assert d.propensity.shape == (3,)
    assert np.all(d.propensity == 0.5)
    assert len(d) == 3


def test_1d_covariates_promoted():
    d = TrialDataset([1.0, 2.0], [1, -1], [0.0, 1.0], 0.5)
    assert d.X.shape == (2, 1)


def test_arrays_frozen_and_decoupled():
    X = np.array([[0.0], [1.0]])
    d = TrialDataset(X, [1, -1], [0.0, 1.0], 0.5)
    with pytest.raises(ValueError):
        d.X[0, 0] = 99.0
    X[0, 0] = 99.0  # caller's array must stay writable and independent
    assert d.X[0, 0] == 0.0


def test_bad_action_rejected_with_row():
    with pytest.raises(ValidationError, match="row 1"):
        _tiny(action=[1, 0, -1])


def test_nonfinite_rejected_with_row():
    with pytest.raises(ValidationError, match="row 2"):
        _tiny(X=[[0.0, 1.0], [1.0, 2.0], [np.nan, 3.0]])
    with pytest.raises(ValidationError, match="row 0"):
        _tiny(outcome=[np.inf, 0.0, 1.0])


def test_overlap_enforced():
    with pytest.raises(ValidationError, match="propensity"):
        _tiny(propensity=[0.5, 0.001, 0.5])
    # Degenerate propensities allowed when the margin is dropped.
    d = _tiny(propensity=[0.5, 0.001, 0.5], overlap=0.0)
    assert d.propensity[1] == 0.001
    with pytest.raises(ValueError):
        _tiny(overlap=0.7)


def test_length_mismatch():
    with pytest.raises(ValidationError):
        _tiny(action=[1, -1])
    with pytest.raises(ValidationError):
        _tiny(outcome=[1.0])


def test_record_accessors():
    d = _tiny()
    r = d.record(1)
    assert r.action == -1
    assert r.outcome == -1.0
    assert r.propensity == 0.5
    assert np.array_equal(r.covariates, [1.0, 2.0])
    assert len(list(d.records())) == 3


def test_subset_keeps_scaling_and_allows_tight_propensity():
    d = TrialDataset(
        [[0.0], [1.0], [2.0]],
        [1, -1, 1],
        [1.0, 2.0, 3.0],
        [0.5, 0.01, 0.99],
        scaling=ScalingTransform(np.array([1.0]), np.array([2.0])),
    )
    s = d.subset([2, 0])
    assert s.n == 2
    assert np.array_equal(s.outcome, [3.0, 1.0])
    assert s.scaling is d.scaling


# ---------------------------------------------------------------------------
# Scaling transform
# ---------------------------------------------------------------------------

def test_scaling_roundtrip():
    t = ScalingTransform(np.array([1.0, -2.0]), np.array([2.0, 0.5]))
    x = np.array([[3.0, -1.0], [1.0, -2.0]])
    assert np.allclose(t.invert(t.apply(x)), x)
    assert np.allclose(t.apply(np.array([3.0, -1.0])), [1.0, 2.0])


def test_scaling_rejects_zero_scale():
    with pytest.raises(ValidationError):
        ScalingTransform(np.array([0.0]), np.array([0.0]))
    with pytest.raises(ValidationError):
        ScalingTransform(np.array([0.0]), np.array([np.nan]))


# ---------------------------------------------------------------------------
# CSV round-trips and error reporting
# ---------------------------------------------------------------------------

def test_csv_roundtrip_bitexact(tmp_path, rng):
    X = rng.normal(size=(7, 3))
    d = TrialDataset(X, rng.choice([-1, 1], 7), rng.normal(size=7), 0.5)
    path = tmp_path / "trial.csv"
    write_csv(d, path, header_comment="provenance line")
    back = load_csv(path, default_schema(3))
    assert np.array_equal(back.X, d.X)
    assert np.array_equal(back.outcome, d.outcome)
    assert np.array_equal(back.action, d.action)
    assert np.array_equal(back.propensity, d.propensity)
    # The comment line must be present yet invisible to the reader.
    assert open(path).readline().startswith("# provenance")


def test_csv_missing_column_named(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x1,action,outcome\n0.0,1,2.0\n")
    with pytest.raises(SchemaError, match="propensity"):
        load_csv(path, default_schema(1))
    with pytest.raises(SchemaError, match="x2"):
        load_csv(path, CsvSchema(covariates=["x1", "x2"], propensity=0.5, propensity_col=None))


def test_csv_bad_cell_named(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x1,action,outcome,propensity\noops,1,2.0,0.5\n")
    with pytest.raises(ParseError, match="row 0.*'x1'"):
        load_csv(path, default_schema(1))


def test_csv_action_coding(tmp_path):
    path = tmp_path / "zo.csv"
    path.write_text("x1,action,outcome\n0.0,0,1.0\n1.0,1,2.0\n")
    schema = CsvSchema(
        covariates=["x1"], propensity_col=None, propensity=0.5, action_coding="01"
    )
    d = load_csv(path, schema)
    assert np.array_equal(d.action, [-1, 1])
    # pm1 coding refuses 0/1 input.
    with pytest.raises(ParseError, match="action"):
        load_csv(path, CsvSchema(covariates=["x1"], propensity_col=None, propensity=0.5))


def test_csv_constant_propensity_and_scaling(tmp_path):
    path = tmp_path / "sc.csv"
    path.write_text("x1,x2,action,outcome\n0.0,5.0,1,1.0\n2.0,5.5,-1,2.0\n4.0,6.0,1,3.0\n")
    schema = CsvSchema(
        covariates=["x1", "x2"],
        propensity_col=None,
        propensity=0.5,
        scale_cols=["x1"],
    )
    d = load_csv(path, schema)
    assert d.scaling is not None
    # x1 is centered/scaled, x2 untouched.
    assert np.allclose(d.X[:, 0].mean(), 0.0)
    assert np.allclose(d.X[:, 1], [5.0, 5.5, 6.0])
    assert np.allclose(d.scaling.invert(d.X)[:, 0], [0.0, 2.0, 4.0])


def test_csv_constant_scale_column_rejected(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("x1,action,outcome\n1.0,1,1.0\n1.0,-1,2.0\n")
    schema = CsvSchema(
        covariates=["x1"], propensity_col=None, propensity=0.5, scale_cols=["x1"]
    )
    with pytest.raises(ValidationError, match="x1"):
        load_csv(path, schema)


def test_csv_ragged_row(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("x1,action,outcome,propensity\n0.0,1,2.0\n")
    with pytest.raises(ParseError, match="fields"):
        load_csv(path, default_schema(1))


def test_csv_empty_and_headeronly(tmp_path):
    path = tmp_path / "e.csv"
    path.write_text("")
    with pytest.raises(SchemaError):
        load_csv(path, default_schema(1))
    path.write_text("x1,action,outcome,propensity\n")
    with pytest.raises(ValidationError):
        load_csv(path, default_schema(1))


def test_schema_validation():
    with pytest.raises(SchemaError):
        CsvSchema(covariates=[])
    with pytest.raises(SchemaError):
        CsvSchema(covariates=["x1"], action_coding="letters")
    with pytest.raises(SchemaError):
        CsvSchema(covariates=["x1"], propensity_col=None)
    with pytest.raises(SchemaError):
        CsvSchema(covariates=["x1"], scale_cols=["zz"])


# ---------------------------------------------------------------------------
# Random source and fold splitting
# ---------------------------------------------------------------------------

def test_random_source_reproducible():
    a = RandomSource(11, 3).generator().random(5)
    b = RandomSource(11, 3).generator().random(5)
    c = RandomSource(11, 4).generator().random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_substream_disjoint():
    base = RandomSource(7, 2)
    seen = set()
    for k in range(20):
        sub = base.substream(k)
        seen.add((sub.seed, sub.stream))
    assert len(seen) == 20
    with pytest.raises(ValueError):
        base.substream(-1)


def test_split_kfold_partition():
    rng = RandomSource(3, 0).generator()
    folds = split_kfold(23, 5, rng)
    assert len(folds) == 5
    all_val = np.concatenate([v for _, v in folds])
    assert sorted(all_val.tolist()) == list(range(23))
    sizes = sorted(len(v) for _, v in folds)
    assert max(sizes) - min(sizes) <= 1
    for train, val in folds:
        assert len(np.intersect1d(train, val)) == 0
        assert len(train) + len(val) == 23
        assert np.all(np.diff(train) > 0) and np.all(np.diff(val) > 0)


def test_split_kfold_validation():
    rng = RandomSource(3, 0).generator()
    with pytest.raises(ValueError):
        split_kfold(10, 1, rng)
    with pytest.raises(ValueError):
        split_kfold(3, 4, rng)


def test_split_kfold_seeded():
    a = split_kfold(12, 3, RandomSource(5, 1).generator())
    b = split_kfold(12, 3, RandomSource(5, 1).generator())
    for (ta, va), (tb, vb) in zip(a, b):
        assert np.array_equal(ta, tb) and np.array_equal(va, vb)
