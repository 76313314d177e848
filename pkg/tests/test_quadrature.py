import math

import numpy as np
import pytest

from wpsystole.quadrature import (
    DegenerateField,
    InconsistentReports,
    QuadratureConfig,
    area_check,
    collar_area,
    conjugate_exponent,
    cylinder_norm,
    dirichlet_norms,
    dual_lp_bracket,
    lp_norm,
    lp_norms,
    sup_norm,
)
from wpsystole.series import GradientEvaluator
from wpsystole.surface import NotClosed, bolza, cylinder, enumerate_ball, from_fenchel_nielsen

BOLZA = bolza()
BOLZA_EV = GradientEvaluator.build(BOLZA, "alpha")
FN = from_fenchel_nielsen((1.0, 1.0, 1.0))
CFG = QuadratureConfig(samples=100_000, seed=5)


@pytest.fixture(scope="module")
def bolza_norms():
    out = dict(lp_norms(BOLZA, BOLZA_EV, (1.0, 4 / 3, 2.0, 4.0), CFG))
    out[math.inf] = sup_norm(BOLZA, None, BOLZA_EV, 10_000)
    return out


@pytest.mark.parametrize("ell", [0.5, 1.0, 2.0])
def test_cylinder_oracles(ell):
    m = cylinder(ell)
    ev = GradientEvaluator.build(m, "alpha")
    assert lp_norm(m, None, ev, 1, 1000).value == pytest.approx(2 * ell, rel=1e-6)
    assert lp_norm(m, None, ev, 2, 1000).value ** 2 == pytest.approx(2 * ell / math.pi, rel=1e-6)
    assert lp_norm(m, None, ev, 4, 1000).value ** 4 == pytest.approx(5 * ell / math.pi ** 3, rel=1e-6)
    assert sup_norm(m, None, ev).value == pytest.approx(2 / math.pi, rel=1e-6)
    assert sup_norm(m, None, ev, kind="envelope").value == pytest.approx(1.0, rel=1e-6)


def test_cylinder_examples():
    ev = GradientEvaluator.build(cylinder(1.0), "alpha")
    assert cylinder_norm(ev, 2).integral == pytest.approx(0.63662, abs=1e-5)
    assert cylinder_norm(ev, 4).integral == pytest.approx(5 / math.pi ** 3, rel=1e-9)
    assert cylinder_norm(ev, 4).integral == pytest.approx(0.16126, abs=1e-5)


def test_holder_containment(bolza_norms):
    s = bolza_norms[math.inf].value
    for p in (1.0, 2.0, 4.0):
        assert bolza_norms[p].value <= s * BOLZA.area ** (1 / p)


def test_sup_is_lower_bound_only(bolza_norms):
    r = bolza_norms[math.inf]
    assert r.lower_bound_only and math.isinf(r.p)


def test_riera_lower_and_unfolding_bounds(bolza_norms):
    ell = BOLZA.curve("alpha").length
    r1, r2 = bolza_norms[1.0], bolza_norms[2.0]
    assert r1.value <= 2 * ell + 3 * r1.stat_error
    assert r2.integral > 2 / math.pi * ell - 3 * r2.integral_error


def test_collar_area():
    a, e = collar_area(BOLZA_EV, CFG)
    assert a == pytest.approx(4 * math.pi, abs=4 * e + 1e-3)


@pytest.mark.parametrize("model", [BOLZA, FN])
def test_area_check(model):
    rep = area_check(model, budget=200_000, seed=2)
    assert rep.area == pytest.approx(4 * math.pi, rel=0.02)
    assert rep.max_accepted_radius < rep.cap


def test_area_cylinder():
    with pytest.raises(NotClosed):
        area_check(cylinder(1.0))


def test_dirichlet_agrees_with_collar(bolza_norms):
    ball = enumerate_ball(BOLZA, 2 * (BOLZA.diam_est + 1))
    rs = lp_norms(BOLZA, BOLZA_EV, (2.0,), QuadratureConfig(samples=200_000, seed=1), ball=ball, domain="dirichlet")
    a, b = rs[2.0], bolza_norms[2.0]
    assert abs(a.integral - b.integral) <= 4 * math.hypot(a.integral_error, b.integral_error)


def test_degenerate_field():
    ball = enumerate_ball(BOLZA, 2 * (BOLZA.diam_est + 1))
    with pytest.raises(DegenerateField):
        dirichlet_norms(BOLZA, ball, lambda zs: np.zeros(len(zs)), (2.0,), QuadratureConfig(samples=5000))


def test_seed_determinism():
    a = lp_norms(FN, GradientEvaluator.build(FN, "alpha"), (2.0,), QuadratureConfig(samples=20_000, seed=11))
    b = lp_norms(FN, GradientEvaluator.build(FN, "alpha"), (2.0,), QuadratureConfig(samples=20_000, seed=11))
    c = lp_norms(FN, GradientEvaluator.build(FN, "alpha"), (2.0,), QuadratureConfig(samples=20_000, seed=12))
    assert a[2.0] == b[2.0]
    assert a[2.0].integral != c[2.0].integral


def test_conjugate_exponents():
    assert conjugate_exponent(2.0) == 2.0
    assert conjugate_exponent(4.0) == pytest.approx(4 / 3)
    assert conjugate_exponent(math.inf) == 1.0 and math.isinf(conjugate_exponent(1.0))


def test_dual_bracket_examples(bolza_norms):
    b = dual_lp_bracket(bolza_norms, 2.0)
    assert b.lower == pytest.approx(b.upper) and b.upper == bolza_norms[2.0].value
    m = cylinder(1.0)
    ev = GradientEvaluator.build(m, "alpha")
    reps = {p: cylinder_norm(ev, p) for p in (1.0, 2.0)}
    reps[math.inf] = sup_norm(m, None, ev)
    b = dual_lp_bracket(reps, math.inf)
    assert (b.lower, b.upper) == (pytest.approx(1.0, rel=1e-6), pytest.approx(2.0, rel=1e-6))


def test_dual_bracket_sandwich(bolza_norms):
    for p in (4 / 3, 2.0, 4.0, math.inf):
        b = dual_lp_bracket(bolza_norms, p)
        assert b.lower <= b.upper + 3 * (b.lower_error + b.upper_error)


def test_dual_bracket_inconsistent(bolza_norms):
    with pytest.raises(InconsistentReports):
        dual_lp_bracket({2.0: bolza_norms[2.0]}, 4.0)
    with pytest.raises(InconsistentReports):
        dual_lp_bracket({2.0: bolza_norms[2.0], 4.0: bolza_norms[4.0], 4 / 3: bolza_norms[2.0]}, 4.0)
