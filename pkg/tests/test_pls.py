"""Tests for the penalized least-squares baseline."""

import numpy as np
import pytest

from tailrule.data import ScalingTransform, TrialDataset
from tailrule.models import load_model, save_model
from tailrule.pls import (
    PlsModel,
    expand_basis,
    pls_fit,
    pls_kkt_residual,
    pls_objective,
)

from conftest import random_dataset


def test_expand_basis_layout():
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    a = np.array([1, -1])
    Phi = expand_basis(X, a)
    expected = np.array(
        [
            [1.0, 1.0, 2.0, 1.0, 1.0, 2.0],
            [1.0, 3.0, 4.0, -1.0, -3.0, -4.0],
        ]
    )
    np.testing.assert_array_equal(Phi, expected)


def test_objective_hand_values(four_record_data):
    d = four_record_data
    # zero coefficients: (1/4) * (1 + 4 + 9 + 16)
    assert pls_objective(d, np.zeros(4), lam=2.0) == pytest.approx(7.5)
    # intercept only, unpenalized: residuals [0, 1, 2, 3]
    assert pls_objective(d, np.array([1.0, 0, 0, 0]), lam=2.0) == pytest.approx(3.5)
    # slope 1 on x: residuals all 1, penalty 2 * |1|
    assert pls_objective(d, np.array([0.0, 1.0, 0, 0]), lam=2.0) == pytest.approx(3.0)


def test_noiseless_recovery(rng):
    n, p = 120, 3
    X = rng.normal(size=(n, p))
    action = rng.choice([-1, 1], size=n)
    beta = np.array([0.5, 1.0, -2.0, 0.0, 0.7, 0.0, 3.0, -1.5])
    outcome = expand_basis(X, action) @ beta
    data = TrialDataset(X, action, outcome, 0.5)
    model = pls_fit(data, lam=0.0)
    assert model.converged
    np.testing.assert_allclose(model.coef, beta, atol=1e-6)
    np.testing.assert_allclose(model.treat_coef, beta[p + 1 :], atol=1e-6)
    # the rule only sees the treatment-interaction block
    x = rng.normal(size=(5, p))
    np.testing.assert_allclose(model.contrast(x), beta[p + 1] + x @ beta[p + 2 :], atol=1e-5)


def test_kkt_residual_at_fit(rng):
    data = random_dataset(rng, 60, p=4)
    lam = 0.25
    model = pls_fit(data, lam=lam)
    assert model.converged
    assert pls_kkt_residual(data, model.coef, lam) < 1e-6
    # the fit beats natural reference points
    obj = pls_objective(data, model.coef, lam)
    assert obj <= pls_objective(data, np.zeros(2 * data.p + 2), lam) + 1e-12
    for _ in range(20):
        trial = model.coef + rng.normal(scale=0.05, size=model.coef.shape)
        assert obj <= pls_objective(data, trial, lam) + 1e-12


def test_large_penalty_gives_intercept_only(rng):
    data = random_dataset(rng, 50, p=3)
    model = pls_fit(data, lam=1e4)
    np.testing.assert_allclose(model.coef[1:], 0.0)
    assert model.coef[0] == pytest.approx(float(data.outcome.mean()))
    assert np.all(model.treat_coef == 0.0)
    # ties in the contrast break toward +1
    assert np.all(model.decide_batch(data.X) == 1)


def test_warm_start_at_solution_stops_immediately(rng):
    data = random_dataset(rng, 40, p=2)
    model = pls_fit(data, lam=0.1)
    again = pls_fit(data, lam=0.1, coef0=model.coef)
    assert again.sweeps <= 2
    np.testing.assert_allclose(again.coef, model.coef, atol=1e-10)


def test_contrast_and_predict_oracle():
    model = PlsModel(
        coef=np.array([9.0, 1.0, 2.0, 3.0, 4.0, 5.0]),
        lam=0.0,
        p=2,
        converged=True,
        sweeps=1,
    )
    np.testing.assert_array_equal(model.treat_coef, [3.0, 4.0, 5.0])
    x = np.array([[1.0, 1.0], [0.0, -1.0]])
    np.testing.assert_allclose(model.contrast(x), [12.0, -2.0])
    assert list(model.decide_batch(x)) == [1, -1]
    assert model.decide([1.0, 1.0]) == 1
    # predict uses the full basis
    pred = model.predict(np.array([[1.0, 1.0]]), np.array([-1.0]))
    assert pred[0] == pytest.approx(9 + 1 + 2 - 3 - 4 - 5)


def test_decide_raw_applies_scaling():
    scaling = ScalingTransform(np.array([10.0]), np.array([2.0]))
    model = PlsModel(
        coef=np.array([0.0, 0.0, 1.0, 2.0]),
        lam=0.0,
        p=1,
        converged=True,
        sweeps=1,
        scaling=scaling,
    )
    # contrast on the model scale is 1 + 2 * x_scaled
    assert model.decide_raw(np.array([[11.0]]))[0] == 1
    assert model.decide_raw(np.array([[8.0]]))[0] == -1


def test_fit_carries_dataset_scaling(rng):
    X = rng.normal(size=(30, 2))
    scaling = ScalingTransform(np.array([1.0, -1.0]), np.array([2.0, 0.5]))
    data = TrialDataset(X, rng.choice([-1, 1], size=30), rng.normal(size=30), 0.5, scaling=scaling)
    model = pls_fit(data, lam=0.05)
    assert model.scaling is not None
    np.testing.assert_array_equal(model.scaling.center, scaling.center)
    raw = scaling.invert(X[:5])
    np.testing.assert_array_equal(model.decide_raw(raw), model.decide_batch(X[:5]))


def test_json_roundtrip(tmp_path, four_record_data):
    model = pls_fit(four_record_data, lam=0.1)
    path = tmp_path / "pls.json"
    save_model(model, path)
    back = load_model(path)
    assert isinstance(back, PlsModel)
    np.testing.assert_array_equal(back.coef, model.coef)
    assert back.lam == model.lam
    assert back.p == model.p
    assert back.converged == model.converged
    assert back.sweeps == model.sweeps
    assert back.scaling is None


def test_json_roundtrip_with_scaling(tmp_path, rng):
    scaling = ScalingTransform(np.array([1.0]), np.array([3.0]))
    data = TrialDataset(
        rng.normal(size=(20, 1)), rng.choice([-1, 1], size=20), rng.normal(size=20), 0.5,
        scaling=scaling,
    )
    model = pls_fit(data, lam=0.2)
    path = tmp_path / "pls_scaled.json"
    save_model(model, path)
    back = load_model(path)
    np.testing.assert_array_equal(back.scaling.center, scaling.center)
    np.testing.assert_array_equal(back.scaling.scale, scaling.scale)
    x = rng.normal(size=(6, 1)) * 4.0
    np.testing.assert_array_equal(back.decide_raw(x), model.decide_raw(x))


def test_from_json_dict_rejects_foreign_payload():
    with pytest.raises(ValueError, match="pls-model"):
        PlsModel.from_json_dict({"kind": "decision_function"})


def test_fit_validation(four_record_data):
    with pytest.raises(ValueError, match="nonnegative"):
        pls_fit(four_record_data, lam=-0.1)
    with pytest.raises(ValueError, match="length"):
        pls_fit(four_record_data, lam=0.1, coef0=np.zeros(3))
