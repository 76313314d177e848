import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wpsystole.mobius import HPoint, MoebiusElement, translation_length
from wpsystole.surface import (
    BudgetExceeded,
    ConstructionFailure,
    InsufficientBall,
    bolza,
    build_surface,
    collar_bounds,
    collar_crossing,
    cylinder,
    enumerate_ball,
    from_fenchel_nielsen,
    injectivity_radius,
    parse_surface_spec,
    reduce_to_domain,
    systole,
)

BOLZA_SYSTOLE = 2 * math.acosh(1 + math.sqrt(2))
_BALL = enumerate_ball(bolza(), 8.0)


@pytest.fixture(scope="module")
def bolza_ball():
    return _BALL


def _key_set(elements):
    out = set()
    for row in np.round(elements, 6):
        m = MoebiusElement.from_array(row)
        out.add(tuple(np.round(m.entries(), 6) + 0.0))
    return out


def test_fn_lengths():
    m = from_fenchel_nielsen((1.0, 1.0, 1.0))
    for c in m.named_curves.values():
        assert translation_length(c.element) == pytest.approx(1.0, abs=1e-6)
    m = from_fenchel_nielsen((0.1, 2.0, 2.0))
    assert m.curve("alpha").length == pytest.approx(0.1, abs=1e-6)
    assert m.genus == 2 and m.closed
    assert all(abs(g.trace) > 2 for g in m.generators)


@pytest.mark.parametrize("lengths", [(1, 1, 1), (0.1, 2, 2), (3, 0.5, 0.5)])
def test_named_curve_frames(lengths):
    m = from_fenchel_nielsen(lengths, (0.2, -0.3, 0.1))
    for c in m.named_curves.values():
        local = c.frame.inverse() @ c.element @ c.frame
        assert np.allclose(local.entries(), MoebiusElement.scaling(c.length).entries(), atol=1e-9)
        assert translation_length(c.element) == pytest.approx(c.length, abs=1e-6)


def test_twist_periodicity():
    # a full twist along a pants curve is a Dehn twist: same surface
    l1 = 1.3
    a = systole(from_fenchel_nielsen((l1, 2.0, 2.5), (0.0, 0.0, 0.0))).length
    b = systole(from_fenchel_nielsen((l1, 2.0, 2.5), (l1, 0.0, 0.0))).length
    assert a == pytest.approx(b, abs=1e-6)


def test_bad_lengths():
    with pytest.raises(ConstructionFailure):
        from_fenchel_nielsen((1.0, -1.0, 1.0))
    with pytest.raises(ConstructionFailure):
        build_surface("torus")
    with pytest.raises(ConstructionFailure):
        cylinder(0.0)


def test_bolza_basics():
    m = bolza()
    assert m.genus == 2
    assert m.area == pytest.approx(4 * math.pi)
    assert systole(m).length == pytest.approx(BOLZA_SYSTOLE, abs=1e-9)
    assert BOLZA_SYSTOLE == pytest.approx(3.057142, abs=1e-6)


def test_cylinder_basics():
    m = cylinder(2.0)
    assert len(m.generators) == 1
    assert translation_length(m.generators[0]) == pytest.approx(2.0)
    assert systole(m).length == 2.0
    assert not m.closed


def test_ball_cylinder():
    ball = enumerate_ball(cylinder(1.0), 3.5)
    assert len(ball) == 7
    ks = sorted(round(math.log(row[0] / row[3]) if row[0] > 0 else 0.0) for row in ball.elements)
    assert ks == [-3, -2, -1, 0, 1, 2, 3]


@pytest.mark.parametrize("model", [bolza(), from_fenchel_nielsen((1.0, 1.0, 1.0))])
def test_ball_zero(model):
    ball = enumerate_ball(model, 0.0)
    assert len(ball) == 1
    assert MoebiusElement.from_array(ball.elements[0]).is_identity()


def test_ball_structure():
    m = bolza()
    ball = enumerate_ball(m, 4.0)
    keys = _key_set(ball.elements)
    assert len(keys) == len(ball)
    inv = _key_set([MoebiusElement.from_array(r).inverse().entries() for r in ball.elements])
    assert inv == keys


def test_ball_monotone():
    m = from_fenchel_nielsen((1.0, 1.5, 2.0))
    small = _key_set(enumerate_ball(m, 3.0).elements)
    big = _key_set(enumerate_ball(m, 4.5).elements)
    assert small <= big


def test_ball_cap():
    with pytest.raises(BudgetExceeded):
        enumerate_ball(bolza(), 12.0, cap=500)


def test_reduce_examples(bolza_ball):
    m = bolza()
    w = reduce_to_domain(m, bolza_ball, m.basepoint)
    assert abs(w.z - m.basepoint.z) < 1e-12
    c = cylinder(2.0)
    w = reduce_to_domain(c, enumerate_ball(c, 8.0), HPoint(0.0, math.exp(3.0)))
    assert w.x == pytest.approx(0.0, abs=1e-12) and w.y == pytest.approx(math.e)


def test_reduce_insufficient():
    c = cylinder(2.0)
    # only the identity fits in a ball of radius 1
    with pytest.raises(InsufficientBall):
        reduce_to_domain(c, enumerate_ball(c, 1.0), HPoint(0.0, math.exp(0.9)))
    w = reduce_to_domain(c, enumerate_ball(c, 2.5), HPoint(0.0, math.exp(9.0)))
    assert w.y == pytest.approx(math.e)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_reduce_idempotent(x, logy):
    m = bolza()
    w = reduce_to_domain(m, _BALL, HPoint(x, math.exp(logy)))
    w2 = reduce_to_domain(m, _BALL, w)
    assert abs(w.z - w2.z) < 1e-9


def test_injectivity_examples():
    c = cylinder(2.0)
    ball = enumerate_ball(c, 10.0)
    assert injectivity_radius(c, ball, HPoint(0.0, 1.0)) == pytest.approx(1.0)
    z = HPoint(math.sinh(1.0), 1.0)  # distance 1 from the core
    # brute force over powers of the generator
    y = complex(z.x, z.y)
    brute = min(math.acosh(1 + abs(y - math.exp(2 * k) * y) ** 2 / (2 * y.imag * math.exp(2 * k) * y.imag)) / 2
                for k in range(1, 5))
    assert injectivity_radius(c, ball, z) == pytest.approx(brute, abs=1e-12)
    assert brute == pytest.approx(math.asinh(math.cosh(1.0) * math.sinh(1.0)), abs=1e-12)
    assert brute == pytest.approx(1.35694, abs=1e-5)


def test_injectivity_bolza(bolza_ball):
    m = bolza()
    assert 0 < injectivity_radius(m, bolza_ball, m.basepoint) <= BOLZA_SYSTOLE / 2 + 1e-9
    rng = np.random.default_rng(1)
    for z in rng.uniform(-0.5, 0.5, 20) + 1j * np.exp(rng.uniform(-0.5, 0.5, 20)):
        assert injectivity_radius(m, bolza_ball, HPoint.from_complex(z)) > 0


def test_systole_family():
    vals = [systole(from_fenchel_nielsen((t, 2.0, 2.0))).length for t in (0.05, 0.1, 0.2)]
    assert vals[1] == pytest.approx(0.1, abs=1e-6)
    assert vals == sorted(vals)


def test_collar_examples():
    r = collar_bounds(2 * math.asinh(1.0), False)
    assert r.width_lower_general == pytest.approx(math.log(1 + math.sqrt(2)))
    assert r.width_lower_systolic is None
    l_star, value = collar_crossing()
    t = math.exp(l_star / 4)
    assert t ** 3 - t ** 2 - t - 1 == pytest.approx(0.0, abs=1e-12)
    assert t == pytest.approx(1.8392, abs=1e-4)
    assert value == pytest.approx(math.log(t), abs=1e-12)
    r = collar_bounds(l_star, True)
    assert r.width_lower_general == pytest.approx(r.width_lower_systolic, abs=1e-9)


def test_collar_monotone():
    grid = np.geomspace(1e-3, 20, 400)
    gen = [collar_bounds(float(x), True).width_lower_general for x in grid]
    sysw = [collar_bounds(float(x), True).width_lower_systolic for x in grid]
    assert np.all(np.diff(gen) < 0) and np.all(np.diff(sysw) > 0)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 20))
def test_systolic_collar_half(ell):
    assert collar_bounds(ell, True).combined_bound > 0.5


def test_parse_spec():
    d = parse_surface_spec("kind = fn2  # pinch\nlengths = 0.5, 2, 2\ntwists: 0 0 0.1\n")
    assert d == {"kind": "fn2", "lengths": [0.5, 2.0, 2.0], "twists": [0.0, 0.0, 0.1]}
    with pytest.raises(ValueError):
        parse_surface_spec("lengths = 1,1,1")
