import random
from fractions import Fraction as F

import pytest

from baseline_odx import (
    GENERAL_DYE,
    PLAIN,
    REDUCED_DYE,
    Design,
    FactorLayout,
    InvalidInput,
    ModelSpec,
    NotEstimable,
    ReplicationPlan,
    VarianceReport,
    baseline_contrast,
    blue_variance,
    construct_d0,
    construct_reference,
    dye_swap,
    is_estimable,
    variance_report,
)
from baseline_odx.models import Analysis

import oracles
from known import D_STAR, DYE_8_22, REDUCED_7_23, RIVAL_22, SYMMETRIC_22, OPT_22


def _pairs(design):
    return [(s.red, s.green) for s in design.slides]


def test_example_designs_frozen():
    assert variance_report(SYMMETRIC_22, PLAIN).vector() == (F(1, 2), F(1, 2), F(1))
    assert variance_report(RIVAL_22, PLAIN).vector() == (F(5, 12), F(5, 12), F(3, 4))
    assert variance_report(construct_reference(FactorLayout((2, 2))), PLAIN).vector() == (1, 1, 3)


def test_reduced_model_quoted_design_frozen():
    rep = variance_report(REDUCED_7_23, REDUCED_DYE)
    assert rep[(0, 1)] == rep[(0, 2)] == F(71, 96)
    assert rep[(1, 0)] == F(21, 32)
    assert rep[(1, 1)] == rep[(1, 2)] == F(23, 24)


def test_disconnected_design_reports_failing_effects():
    d = Design.from_pairs((2, 2), [("01", "00"), ("11", "10"), ("01", "00")])
    with pytest.raises(NotEstimable) as err:
        variance_report(d, PLAIN)
    # the interaction is a difference of two within-component comparisons
    assert err.value.effects == [(1, 0)]
    assert is_estimable(d, PLAIN, baseline_contrast(d.layout, (1, 1)))


def test_saturated_d0_not_estimable_under_general_dye():
    d = construct_d0(FactorLayout((2, 2)))
    with pytest.raises(NotEstimable):
        variance_report(d, GENERAL_DYE)
    assert variance_report(dye_swap(d), GENERAL_DYE).vector() == (F(1, 2), F(1, 2), F(1))


def _random_connected(layout, N, rng):
    ts = layout.treatments()
    while True:
        slides = []
        for _ in range(N):
            a, b = rng.sample(ts, 2)
            slides.append((a, b))
        d = Design(layout, tuple(slides))
        if d.is_connected():
            return d


CASES = []
_rng = random.Random(7)
for levels, N, dye in [((2, 2), 4, "none"), ((2, 3), 7, "none"), ((2, 2), 7, "general"), ((2, 3), 7, "reduced"), ((3, 2), 10, "general")]:
    for _ in range(3):
        CASES.append((levels, N, dye, _random_connected(FactorLayout(levels), N, _rng)))
CASES += [((2, 2), 8, "general", DYE_8_22), ((2, 3), 7, "reduced", REDUCED_7_23)]

MODEL_OF = {"none": PLAIN, "general": GENERAL_DYE, "reduced": REDUCED_DYE}


@pytest.mark.parametrize("levels,N,dye,design", CASES)
def test_blue_matches_constrained_minimum_oracle(levels, N, dye, design):
    model = MODEL_OF[dye]
    analysis = Analysis(design, model)
    for e in design.layout.effects():
        ref = oracles.blue_variance(levels, _pairs(design), e, dye)
        c = baseline_contrast(design.layout, e)
        if ref is None:
            assert not analysis.estimable(c)
        else:
            assert analysis.estimable(c)
            assert analysis.variance(c) == F(int(ref.p), int(ref.q))


def test_heteroscedastic_matches_oracle():
    layout = FactorLayout((2, 2))
    pattern = (2, F(5, 2), F(5, 2), 3)
    model = ModelSpec.heteroscedastic(layout, pattern)
    gamma = dict(zip(layout.treatments(), pattern))
    for design in OPT_22.values():
        cov = oracles.covariance((2, 2), _pairs(design), gamma={t: oracles.sp.Rational(str(g)) for t, g in gamma.items()})
        rep = variance_report(design, model)
        assert rep.unit == "delta^2"
        for e in layout.effects():
            ref = oracles.blue_variance((2, 2), _pairs(design), e, cov=cov)
            assert rep[e] == F(int(ref.p), int(ref.q))


def test_equal_heteroscedastic_is_scaled_homoscedastic():
    layout = FactorLayout((2, 3))
    model = ModelSpec.heteroscedastic(layout, [2] * 6)
    d = construct_d0(layout)
    assert variance_report(d, model).vector() == tuple(5 * q for q in variance_report(d, PLAIN).vector())


@pytest.mark.parametrize("ratio", [F(1, 2), F(1), F(5)])
def test_replication_covariance_matches_latent_subject_oracle(ratio):
    d = D_STAR
    plans = [
        ReplicationPlan.all_biological(d),
        # 00 and 11 each reused on both of their slides, 01 and 10 fresh
        ReplicationPlan((("a", "z"), ("b", "z"), ("y", "c"), ("y", "e"))),
        ReplicationPlan((("a", "z"), ("b", "z"), ("y", "a"), ("y", "b"))),
    ]
    for plan in plans:
        model = ModelSpec(replication=plan, ratio=ratio)
        rep = variance_report(d, model)
        cov = oracles.covariance((2, 2), _pairs(d), subjects=plan.subjects, ratio=oracles.sp.Rational(ratio.numerator, ratio.denominator))
        for e in d.layout.effects():
            ref = oracles.blue_variance((2, 2), _pairs(d), e, cov=cov)
            assert rep[e] == F(int(ref.p), int(ref.q))


def test_all_biological_beats_technical_at_ratio_one():
    d = D_STAR
    bio = ModelSpec(replication=ReplicationPlan.all_biological(d), ratio=1)
    tech = ModelSpec(replication=ReplicationPlan((("a", "z"), ("b", "z"), ("y", "a"), ("y", "b"))), ratio=1)
    w = {(0, 1): 1, (1, 0): 1, (1, 1): 1}
    crit = lambda m: sum(variance_report(d, m)[e] * q for e, q in w.items())
    assert crit(bio) < crit(tech)


def test_replication_plan_validation():
    d = D_STAR
    with pytest.raises(InvalidInput):
        ModelSpec(replication=ReplicationPlan((("a", "b"),) * 4), ratio=1).replication.validate(d)
    plan = ReplicationPlan((("a", "z"), ("b", "z"), ("y", "a"), ("y", "b")))
    assert ReplicationPlan.from_dict(plan.to_dict()) == plan
    assert not plan.is_all_biological()


def test_zero_ratio_ignores_plan():
    d = D_STAR
    tech = ModelSpec(replication=ReplicationPlan((("a", "z"), ("b", "z"), ("y", "a"), ("y", "b"))), ratio=0)
    assert variance_report(d, tech).vector() == variance_report(d, PLAIN).vector()


def test_variance_report_csv_roundtrip():
    rep = variance_report(RIVAL_22, PLAIN)
    text = rep.to_csv()
    assert text.splitlines()[0] == "effect,order,variance"
    assert "11,2,3/4" in text
    assert VarianceReport.from_csv(text, RIVAL_22.layout) == rep


def test_blue_variance_layout_mismatch():
    with pytest.raises(InvalidInput):
        blue_variance(RIVAL_22, PLAIN, baseline_contrast(FactorLayout((2, 3)), (1, 1)))


def test_negative_ratio_rejected():
    with pytest.raises(InvalidInput):
        ModelSpec(ratio=-1)
    with pytest.raises(InvalidInput):
        ModelSpec.heteroscedastic(FactorLayout((2, 2)), [1, -1, 1, 1])
