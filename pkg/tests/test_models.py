import numpy as np
import pytest

from tailrule.data import ScalingTransform
from tailrule.models import (
    DecisionFunction,
    from_json_dict,
    gaussian_gram,
    load_model,
    median_heuristic,
    penalty_gradient,
    penalty_prox,
    penalty_value,
    save_model,
    sign_decision,
    soft_threshold,
    to_json_dict,
)


def _linear(w=(1.0, -2.0), b=0.5, **kw):
    return DecisionFunction(form="linear", weights=np.array(w), intercept=b, **kw)


def _kernel(**kw):
    anchors = np.array([[0.0, 0.0], [1.0, 1.0]])
    base = dict(
        form="kernel",
        weights=np.array([1.0, -1.0]),
        intercept=0.0,
        penalty="rkhs",
        bandwidth=1.5,
        anchors=anchors,
    )
    base.update(kw)
    return DecisionFunction(**base)


def test_sign_decision_tie_to_plus():
    assert np.array_equal(sign_decision([-0.5, 0.0, 2.0]), [-1, 1, 1])
    assert sign_decision(0.0) == 1


def test_linear_scoring_hand_oracle():
    m = _linear()
    # score = 1*x1 - 2*x2 + 0.5
    assert m.score([1.0, 1.0]) == pytest.approx(-0.5)
    assert m.decide([1.0, 1.0]) == -1
    assert np.array_equal(m.decide_batch([[1.0, 0.0], [0.0, 1.0]]), [1, -1])


def test_gaussian_gram_hand_oracle():
    K = gaussian_gram([[0.0, 0.0]], [[0.0, 0.0], [3.0, 4.0]], bandwidth=5.0)
    # distances 0 and 5 -> exp(0), exp(-25/25)
    assert K[0, 0] == pytest.approx(1.0)
    assert K[0, 1] == pytest.approx(np.exp(-1.0))
    with pytest.raises(ValueError):
        gaussian_gram([[0.0]], [[0.0]], bandwidth=0.0)


def test_gram_symmetric_psd(rng):
    X = rng.normal(size=(8, 3))
    K = gaussian_gram(X, X, bandwidth=2.0)
    assert np.allclose(K, K.T)
    assert np.min(np.linalg.eigvalsh(K)) > -1e-10
    assert np.allclose(np.diag(K), 1.0)


def test_median_heuristic_hand_oracle():
    # pairwise distances {1, 2, 3} -> median 2
    assert median_heuristic([[0.0], [1.0], [3.0]]) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        median_heuristic([[1.0]])
    with pytest.raises(ValueError):
        median_heuristic([[1.0], [1.0], [1.0]])


def test_kernel_scoring_matches_manual(rng):
    m = _kernel()
    X = rng.normal(size=(5, 2))
    K = gaussian_gram(X, m.anchors, m.bandwidth)
    assert np.allclose(m.score_batch(X), K @ m.weights)


def test_scaling_applied_by_raw_scorers():
    t = ScalingTransform(np.array([10.0]), np.array([2.0]))
    m = DecisionFunction(
        form="linear", weights=np.array([1.0]), intercept=0.0, scaling=t
    )
    # raw x=12 -> scaled 1.0
    assert m.score_raw([[12.0]])[0] == pytest.approx(1.0)
    assert m.score([12.0]) == pytest.approx(12.0)  # fitted-coordinate scorer
    assert m.decide_raw([[8.0]])[0] == -1


def test_constructor_validation():
    with pytest.raises(ValueError):
        DecisionFunction(form="cubic", weights=np.ones(2), intercept=0.0)
    with pytest.raises(ValueError):
        _linear(penalty="huber")
    with pytest.raises(ValueError):
        _linear(lam=-1.0)
    with pytest.raises(ValueError):
        _linear(penalty="rkhs")
    with pytest.raises(ValueError):
        _kernel(penalty="l1")
    with pytest.raises(ValueError):
        _kernel(anchors=None)
    with pytest.raises(ValueError):
        _kernel(weights=np.ones(3))
    with pytest.raises(ValueError):
        _kernel(bandwidth=-1.0)


def test_soft_threshold_hand_oracle():
    assert soft_threshold(3.0, 1.0) == pytest.approx(2.0)
    assert soft_threshold(-3.0, 1.0) == pytest.approx(-2.0)
    assert soft_threshold(0.5, 1.0) == 0.0
    assert np.allclose(soft_threshold([2.0, -0.3, 0.0], 0.5), [1.5, 0.0, 0.0])


def test_penalty_values_hand_oracle():
    m = _linear(w=(3.0, -4.0), penalty="l2", lam=2.0)
    assert penalty_value(m) == pytest.approx(25.0)  # 0.5*2*(9+16)
    m = _linear(w=(3.0, -4.0), penalty="l1", lam=2.0)
    assert penalty_value(m) == pytest.approx(14.0)  # 2*(3+4)
    k = _kernel(lam=2.0)
    K = gaussian_gram(k.anchors, k.anchors, k.bandwidth)
    assert penalty_value(k) == pytest.approx(float(k.weights @ K @ k.weights))


def test_penalty_gradients_and_prox():
    m = _linear(w=(3.0, -4.0), penalty="l2", lam=2.0)
    assert np.allclose(penalty_gradient(m), [6.0, -8.0])
    k = _kernel(lam=3.0)
    K = gaussian_gram(k.anchors, k.anchors, k.bandwidth)
    assert np.allclose(penalty_gradient(k), 3.0 * (K @ k.weights))
    l1 = _linear(penalty="l1", lam=2.0)
    assert np.allclose(penalty_prox(l1, np.array([3.0, -0.5]), 0.5), [2.0, 0.0])
    with pytest.raises(ValueError):
        penalty_gradient(l1)
    with pytest.raises(ValueError):
        penalty_prox(m, np.ones(2), 0.1)


def test_json_roundtrip_linear(tmp_path):
    t = ScalingTransform(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
    m = _linear(penalty="l1", lam=0.25, scaling=t)
    d = to_json_dict(m)
    back = from_json_dict(d)
    assert back.form == "linear" and back.penalty == "l1" and back.lam == 0.25
    assert np.array_equal(back.weights, m.weights)
    assert np.array_equal(back.scaling.center, t.center)

    path = tmp_path / "model.json"
    save_model(m, path)
    again = load_model(path)
    X = np.array([[0.3, -1.0], [2.0, 5.0]])
    assert np.allclose(again.score_raw(X), m.score_raw(X))


def test_json_roundtrip_kernel(tmp_path, rng):
    m = _kernel(lam=0.5)
    path = tmp_path / "k.json"
    save_model(m, path)
    back = load_model(path)
    X = rng.normal(size=(4, 2))
    assert np.allclose(back.score_batch(X), m.score_batch(X))
    assert back.bandwidth == m.bandwidth


def test_from_json_rejects_foreign_payload():
    with pytest.raises(ValueError):
        from_json_dict({"kind": "mystery"})
