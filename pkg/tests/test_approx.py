import math
import random
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from baseline_odx import (
    GENERAL_DYE,
    PLAIN,
    Design,
    DesignMeasure,
    FactorLayout,
    InvalidInput,
    ModelSpec,
    NotEstimable,
    candidate_slides,
    certificate,
    closed_form_orth,
    closed_form_pi0,
    criterion_value,
    efficiency,
    from_frequencies,
    frequencies,
    hetero_efficiency,
    is_admissible,
    measure_criterion,
    measure_variances,
    optimize_measure,
    round_measure,
)
from baseline_odx.approx import PI_TILDE, _from_2x2, xi_of

L22 = FactorLayout((2, 2))


def test_xi_values():
    assert abs(xi_of(2) - 0.207107) < 1e-6
    assert abs(xi_of(F(2, 3)) - 1 / 6) < 1e-15
    assert abs(xi_of(1e8) - 0.25) < 1e-6


def test_closed_form_orth():
    assert np.allclose(closed_form_orth(1).masses_2x2(), 1 / 6)
    assert np.allclose(closed_form_orth(4 - 1e-12).masses_2x2(), PI_TILDE)
    assert np.allclose(closed_form_orth(9).masses_2x2(), PI_TILDE)
    with pytest.raises(InvalidInput):
        closed_form_pi0(0)


def test_measure_validation_and_json():
    m = closed_form_pi0(2)
    back = DesignMeasure.from_dict(m.to_dict())
    assert np.allclose(back.mass, m.mass) and back.slides == m.slides
    assert '"pi":' in m.to_json()
    with pytest.raises(InvalidInput):
        DesignMeasure(L22, m.slides, np.ones(6))
    with pytest.raises(InvalidInput):
        DesignMeasure.from_dict({"layout": [2, 2]})


def test_pi0_variances_from_resistance_network():
    # V01 is the effective resistance between 00 and 01: the direct edge in
    # parallel with the path 01-11-10-00
    xi = xi_of(2)
    a = 0.5 - xi
    v01 = 1 / (a + 1 / (2 / xi + 1 / a))
    var = measure_variances(closed_form_pi0(2), PLAIN)
    assert math.isclose(var[(0, 1)], v01, rel_tol=1e-12)
    lap = np.zeros((4, 4))
    for (r, g), p in zip([(1, 0), (2, 0), (3, 1), (3, 2)], [a, a, xi, xi]):
        e = np.zeros(4)
        e[r], e[g] = 1, -1
        lap += p * np.outer(e, e)
    c = np.array([1, -1, -1, 1.0])
    assert math.isclose(var[(1, 1)], c @ np.linalg.pinv(lap) @ c, rel_tol=1e-10)


@pytest.mark.parametrize("w", [F(2, 3), 1, 2, 3, 5])
def test_optimizer_matches_pi0(w):
    m = optimize_measure(L22, PLAIN, w, restarts=4)
    assert np.abs(m.masses_2x2() - closed_form_pi0(w).masses_2x2()).max() < 1e-6
    assert certificate(m, PLAIN, w) >= -1e-10


@pytest.mark.parametrize("w", [1, 5])
def test_optimizer_orthogonal(w):
    m = optimize_measure(L22, PLAIN, w, "orthogonal", restarts=4)
    assert np.abs(m.masses_2x2() - closed_form_orth(w).masses_2x2()).max() < 1e-6


def test_optimum_never_worse_than_closed_form_on_grid():
    for w in np.linspace(2 / 3, 10, 8):
        opt = measure_criterion(optimize_measure(L22, PLAIN, float(w), restarts=2), PLAIN, float(w))
        closed = measure_criterion(closed_form_pi0(w), PLAIN, float(w))
        assert opt <= closed * (1 + 1e-10)
        assert math.isclose(opt, closed, rel_tol=1e-10)


def test_optimizer_is_seed_deterministic():
    a = optimize_measure(FactorLayout((2, 3)), PLAIN, 2, restarts=3, seed=11)
    b = optimize_measure(FactorLayout((2, 3)), PLAIN, 2, restarts=3, seed=11)
    assert a.to_json() == b.to_json()


def test_optimizer_rejects_dye_model():
    with pytest.raises(InvalidInput):
        optimize_measure(L22, GENERAL_DYE, 1)


def test_efficiency_values():
    assert abs(efficiency(from_frequencies((6, 6, 0, 0, 5, 5)), PLAIN, 2) - 99.44) < 0.01
    assert abs(efficiency(closed_form_pi0(3), PLAIN, 3) - 100) < 1e-8
    assert efficiency(_from_2x2((0.25, 0.25, 0, 0, 0.25, 0.25)), PLAIN, 1) < 100


def test_hetero_equal_pattern_is_homoscedastic():
    assert abs(hetero_efficiency((2, 2, 2, 2), 2) - 100) < 1e-8


@pytest.mark.parametrize(
    "w,N,expected",
    [(2, 22, (6, 6, 0, 0, 5, 5)), (2, 10, (3, 3, 0, 0, 2, 2))],
)
def test_rounding(w, N, expected):
    assert frequencies(round_measure(closed_form_pi0(w), N)) == expected


def test_rounding_exact_multiples_and_failure():
    assert frequencies(round_measure(_from_2x2(PI_TILDE), 8)) == (2, 2, 0, 0, 2, 2)
    with pytest.raises(NotEstimable):
        round_measure(closed_form_pi0(2), 2)
    with pytest.raises(InvalidInput):
        round_measure(closed_form_pi0(2), 0)


@pytest.mark.parametrize("xi", [F(1, 6), F(1, 5), F(1, 4)])
def test_family_admissible(xi):
    x = float(xi)
    assert is_admissible(_from_2x2((0.5 - x, 0.5 - x, 0, 0, x, x)), PLAIN)


def test_family_outside_range_inadmissible():
    assert not is_admissible(_from_2x2((0.4, 0.4, 0, 0, 0.1, 0.1)), PLAIN)


def test_pi_tilde_minimizes_v11():
    best = measure_variances(_from_2x2(PI_TILDE), PLAIN)[(1, 1)]
    rng = np.random.default_rng(0)
    for _ in range(200):
        m = _from_2x2(rng.dirichlet(np.ones(6)))
        assert measure_variances(m, PLAIN)[(1, 1)] >= best - 1e-12


def _random_estimable(layout, N, rng, model):
    cands = candidate_slides(layout, model.dye != PLAIN.dye)
    while True:
        d = Design(layout, tuple(rng.choice(cands) for _ in range(N)))
        try:
            return d, criterion_value(d, model, 2)
        except NotEstimable:
            continue


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([(2, 2), (2, 3), (3, 3)]), st.integers(0, 4))
def test_scaling_identity(seed, levels, extra):
    layout = FactorLayout(levels)
    rng = random.Random(seed)
    d, value = _random_estimable(layout, layout.v - 1 + extra, rng, PLAIN)
    lhs = measure_criterion(DesignMeasure.from_design(d), PLAIN, 2)
    assert math.isclose(lhs, d.N * float(value), rel_tol=1e-9)


def test_scaling_identity_heteroscedastic():
    layout = FactorLayout((2, 2))
    model = ModelSpec.heteroscedastic(layout, (2, 3, 4, 6))
    d = from_frequencies((2, 2, 0, 0, 1, 1))
    assert math.isclose(measure_criterion(DesignMeasure.from_design(d), model, 3), 6 * float(criterion_value(d, model, 3)), rel_tol=1e-12)
