import numpy as np
import pytest

from tailrule.criteria import (
    cvar_scalar,
    evaluate_m0,
    evaluate_m1,
    evaluate_quantile,
    evaluate_value,
)
from tailrule.errors import DegenerateMatchError
from tailrule.simlab import normal_cvar

from conftest import random_dataset


ALL_PLUS = np.array([1, 1, 1, 1])
MATCH_ACTIONS = np.array([1, 1, -1, -1])


# ---------------------------------------------------------------------------
# Hand-computed oracles on the four-record fixture
# (A = [+1,+1,-1,-1], R = [1,2,3,4], pi = 0.5, weights 1/pi = 2 when matched).
# ---------------------------------------------------------------------------

def test_value_hand_oracle(four_record_data):
    # d = +1 everywhere matches records 0,1 only:
    #   V = (1/4) * (2*1 + 2*2) = 1.5
    res = evaluate_value(four_record_data, ALL_PLUS)
    assert res.value == pytest.approx(1.5, abs=1e-12)
    # Matching every action doubles the matched mass:
    #   V = (1/4) * 2 * (1+2+3+4) = 5.0
    res = evaluate_value(four_record_data, MATCH_ACTIONS)
    assert res.value == pytest.approx(5.0, abs=1e-12)


def test_value_normalized_hand_oracle(four_record_data):
    # Self-normalized: sum(w*R)/sum(w) = (2*1 + 2*2) / 4 = 1.5 for d = +1,
    # and (1+2+3+4)/4 = 2.5 when every action matches.
    res = evaluate_value(four_record_data, ALL_PLUS, normalized=True)
    assert res.value == pytest.approx(1.5, abs=1e-12)
    res = evaluate_value(four_record_data, MATCH_ACTIONS, normalized=True)
    assert res.value == pytest.approx(2.5, abs=1e-12)


def test_m0_hand_oracle_partial_match(four_record_data):
    # Matched outcomes {1, 2} with weight 2, gamma = 0.5, HT scale (1/n):
    #   alpha=1: (1/4)[2*(1-0)        + 2*(1-0)]          = 1.0
    #   alpha=2: (1/4)[2*(2-(2-1)/.5) + 2*(2-0)]          = 1.0
    # Tie -> smallest maximizing knot alpha = 1.
    res = evaluate_m0(four_record_data, ALL_PLUS, gamma=0.5)
    assert res.value == pytest.approx(1.0, abs=1e-12)
    assert res.alpha == pytest.approx(1.0, abs=1e-12)


def test_m0_hand_oracle_all_matched(four_record_data):
    # All four outcomes matched, gamma = 0.5:
    #   alpha=1 -> 2.0, alpha=2 -> 3.0, alpha=3 -> 3.0, alpha=4 -> 2.0
    # Max 3.0 first attained at alpha = 2.
    res = evaluate_m0(four_record_data, MATCH_ACTIONS, gamma=0.5)
    assert res.value == pytest.approx(3.0, abs=1e-12)
    assert res.alpha == pytest.approx(2.0, abs=1e-12)


def test_m0_at_gamma_one_equals_value(four_record_data):
    for dec in (ALL_PLUS, MATCH_ACTIONS):
        m0 = evaluate_m0(four_record_data, dec, gamma=1.0)
        v = evaluate_value(four_record_data, dec)
        assert m0.value == pytest.approx(v.value, abs=1e-12)


def test_m1_hand_oracle(four_record_data):
    # M1 = 0.5*V + 0.5*M0 = 0.5*1.5 + 0.5*1.0 = 1.25 for d = +1.
    res = evaluate_m1(four_record_data, ALL_PLUS, gamma=0.5)
    assert res.value == pytest.approx(1.25, abs=1e-12)
    # alpha/matched mass are inherited from the M0 half.
    assert res.alpha == pytest.approx(1.0, abs=1e-12)


def test_quantile_hand_oracle(four_record_data):
    # Equal-weight matched outcomes {1,2,3,4}: weighted cdf hits 0.5 at 2.
    res = evaluate_quantile(four_record_data, MATCH_ACTIONS, gamma=0.5)
    assert res.value == pytest.approx(2.0, abs=1e-12)
    res = evaluate_quantile(four_record_data, MATCH_ACTIONS, gamma=0.25)
    assert res.value == pytest.approx(1.0, abs=1e-12)
    res = evaluate_quantile(four_record_data, MATCH_ACTIONS, gamma=1.0)
    assert res.value == pytest.approx(4.0, abs=1e-12)


def test_no_match_behaviour(four_record_data):
    none_match = -MATCH_ACTIONS
    res = evaluate_value(four_record_data, none_match)
    assert res.value == 0.0 and res.degenerate
    res = evaluate_m0(four_record_data, none_match, gamma=0.5)
    assert res.value == 0.0 and res.degenerate
    with pytest.raises(DegenerateMatchError):
        evaluate_quantile(four_record_data, none_match, gamma=0.5)


def test_decision_validation(four_record_data):
    with pytest.raises(ValueError):
        evaluate_value(four_record_data, np.array([1, 1, 0, 1]))
    with pytest.raises(ValueError):
        evaluate_value(four_record_data, np.ones(3))


# ---------------------------------------------------------------------------
# cvar_scalar oracles
# ---------------------------------------------------------------------------

def test_cvar_scalar_hand_oracle():
    # gamma=0.5 on {1,2,3,4}: objective alpha - 2*mean((alpha-y)+) equals
    # 1, 1.5, 1.5, 1 at the four knots; first maximizer alpha = 2.
    value, alpha = cvar_scalar([1.0, 2.0, 3.0, 4.0], 0.5)
    assert value == pytest.approx(1.5, abs=1e-12)
    assert alpha == pytest.approx(2.0, abs=1e-12)


def test_cvar_scalar_gamma_one_is_mean():
    sample = [1.0, 2.0, 3.0, 4.0]
    value, alpha = cvar_scalar(sample, 1.0)
    assert value == pytest.approx(2.5, abs=1e-12)
    assert alpha == pytest.approx(4.0, abs=1e-12)


def test_cvar_scalar_weighted_hand_oracle():
    # Weights keep only {1, 4}; half-tail of that two-point law is {1}.
    value, alpha = cvar_scalar([1.0, 2.0, 3.0, 4.0], 0.5, weights=[1.0, 0.0, 0.0, 1.0])
    assert value == pytest.approx(1.0, abs=1e-12)
    assert alpha == pytest.approx(1.0, abs=1e-12)


def test_cvar_scalar_translation_and_scale(rng):
    y = rng.normal(size=200)
    v, _ = cvar_scalar(y, 0.3)
    v_shift, _ = cvar_scalar(y + 5.0, 0.3)
    v_scale, _ = cvar_scalar(y * 3.0, 0.3)
    assert v_shift == pytest.approx(v + 5.0, abs=1e-10)
    assert v_scale == pytest.approx(v * 3.0, abs=1e-10)


def test_cvar_scalar_normal_oracle():
    # Acceptance: N(0,1) at gamma=0.5 converges to the analytic -0.7979.
    gen = np.random.default_rng(777)
    sample = gen.normal(size=100_000)
    value, _ = cvar_scalar(sample, 0.5)
    assert abs(value - normal_cvar(0.0, 1.0, 0.5)) < 0.02
    assert normal_cvar(0.0, 1.0, 0.5) == pytest.approx(-0.7978845608028654, abs=1e-12)


def test_gamma_continuity(rng):
    # Adjacent-gamma jumps shrink as the grid refines (criterion continuity).
    y = rng.normal(size=300)
    def max_jump(k):
        gammas = np.linspace(0.05, 1.0, k)
        vals = np.array([cvar_scalar(y, g)[0] for g in gammas])
        return np.max(np.abs(np.diff(vals)))
    assert max_jump(400) < max_jump(20)
    assert max_jump(400) < 0.05


# ---------------------------------------------------------------------------
# Coherence properties (normalized estimators) and the knot oracle
# ---------------------------------------------------------------------------

def test_prop1_coherence_on_random_instances():
    gen = np.random.default_rng(4242)
    checked = 0
    for _ in range(1000):
        n = int(gen.integers(4, 40))
        data = random_dataset(gen, n)
        decisions = gen.choice([-1, 1], size=n)
        if not np.any(decisions == data.action):
            continue
        gamma = float(gen.uniform(0.1, 1.0))
        m0 = evaluate_m0(data, decisions, gamma=gamma, normalized=True)
        v = evaluate_value(data, decisions, normalized=True)
        q = evaluate_quantile(data, decisions, gamma=gamma)

        # Dominance: tail mean below both the overall mean and the quantile.
        assert m0.value <= v.value + 1e-9
        assert m0.value <= q.value + 1e-9

        # Translation equivariance and positive homogeneity.
        shifted = type(data)(data.X, data.action, data.outcome + 3.7, data.propensity)
        scaled = type(data)(data.X, data.action, data.outcome * 2.5, data.propensity)
        m0_shift = evaluate_m0(shifted, decisions, gamma=gamma, normalized=True)
        m0_scale = evaluate_m0(scaled, decisions, gamma=gamma, normalized=True)
        assert m0_shift.value == pytest.approx(m0.value + 3.7, abs=1e-8)
        assert m0_scale.value == pytest.approx(m0.value * 2.5, abs=1e-8)

        # Monotonicity: raising every outcome cannot lower the criterion.
        bumped = type(data)(
            data.X, data.action, data.outcome + gen.random(n), data.propensity
        )
        m0_up = evaluate_m0(bumped, decisions, gamma=gamma, normalized=True)
        assert m0_up.value >= m0.value - 1e-9
        checked += 1
    assert checked >= 900


def test_knot_oracle_matches_dense_grid():
    # The alpha-objective is piecewise affine with knots at matched outcomes,
    # so a dense grid containing the knots can never beat the knot maximum.
    gen = np.random.default_rng(31337)
    for _ in range(200):
        n = int(gen.integers(3, 51))
        data = random_dataset(gen, n)
        decisions = gen.choice([-1, 1], size=n)
        if not np.any(decisions == data.action):
            continue
        gamma = float(gen.uniform(0.1, 1.0))
        res = evaluate_m0(data, decisions, gamma=gamma)

        matched = decisions == data.action
        y = data.outcome[matched]
        w = 1.0 / data.propensity[matched]
        lo, hi = y.min() - 1.0, y.max() + 1.0
        grid = np.unique(np.concatenate([y, np.linspace(lo, hi, 512)]))
        vals = [
            float(np.sum(w * (a - np.clip(a - y, 0.0, None) / gamma))) / data.n
            for a in grid
        ]
        best = max(vals)
        assert res.value == pytest.approx(best, abs=1e-9)
        # And the reported alpha is the smallest maximizing knot.
        knot_vals = np.array([
            float(np.sum(w * (a - np.clip(a - y, 0.0, None) / gamma))) / data.n
            for a in np.sort(y)
        ])
        first = np.sort(y)[np.argmax(knot_vals > best - 1e-12)]
        assert res.alpha == pytest.approx(first, abs=1e-12)


def test_m0_markers(four_record_data):
    res = evaluate_m0(four_record_data, ALL_PLUS, gamma=0.5)
    assert res.kind == "m0"
    assert res.gamma == 0.5
    # Mean matched weight: (2 + 2 + 0 + 0) / 4.
    assert res.matched_mass == pytest.approx(1.0)
    assert not res.degenerate
