import numpy as np
import pytest

from nullkahler.curvature import coordinate_curvature
from nullkahler.expressions import ExpressionError
from nullkahler.fields import Chart, ExprField
from nullkahler.geometry import nk_metric
from nullkahler.nk_system import (
    NKSolution,
    box_operator,
    commutator_sweep,
    example_family,
    induced_f,
    lax_commutator,
    lax_fields,
    residual_nk1,
    residual_nk2,
)
from nullkahler.sampling import Box, SamplePlan

CHART4 = Chart(("w", "z", "x", "y"))
BOX4 = Box(((-1, 1),) * 4)
FAMILY3_BOX = Box(((-1, 1), (-1, 1), (-1, 1), (0.7, 1.7)))


@pytest.fixture(scope="module")
def pts():
    return SamplePlan(BOX4, count=60).points()


def field(text):
    return ExprField.from_text(text, CHART4)


def test_induced_f_examples(pts):
    assert np.max(np.abs(induced_f(field("0")).evaluate(pts))) == 0.0
    p = np.array([0.1, -0.2, 1.0, 1.0])
    assert induced_f(field("x*y^3")).evaluate(p) == -9.0
    assert induced_f(field("x^2*y^2")).evaluate(p) == -12.0


def test_residuals_family1_analytic(pts):
    theta, f = field("z*y^3/3"), field("y^2")
    assert np.max(np.abs(residual_nk1(theta, f).evaluate(pts))) < 1e-14
    assert np.max(np.abs(residual_nk2(theta, f).evaluate(pts))) < 1e-14


def test_residuals_family3_quotient():
    # analytically zero away from y = 0; the 1/y^10 term magnitudes set
    # the round-off floor, which stays under 1e-8 for y >= 0.3
    theta = field("x^2/y^2")
    f = field("-4*x^2/y^6")
    sample = SamplePlan(Box(((-1, 1), (-1, 1), (-1, 1), (0.3, 1.3))),
                        count=60).points()
    assert np.max(np.abs(residual_nk1(theta, f).evaluate(sample))) < 1e-8
    assert np.max(np.abs(residual_nk2(theta, f).evaluate(sample))) < 1e-8


def test_negative_control_box_value(pts):
    theta = field("x^2*y^2")
    f = induced_f(theta)
    assert np.max(np.abs(residual_nk1(theta, f).evaluate(pts))) == 0.0
    boxf = residual_nk2(theta, f)
    value = boxf.evaluate(np.array([1.0, 1.0, 1.0, 1.0]))
    assert value == pytest.approx(288.0, abs=1e-6)
    expected = 288.0 * pts[:, 2] ** 2 * pts[:, 3] ** 2
    np.testing.assert_allclose(boxf.evaluate(pts), expected, atol=1e-10)


def test_gauge_linearity(pts):
    theta, f = field("z*y^3/3"), field("y^2")
    shifted = residual_nk1(theta, f + 2.5).evaluate(pts)
    base = residual_nk1(theta, f).evaluate(pts)
    np.testing.assert_allclose(shifted, base - 2.5, atol=1e-14)


@pytest.mark.parametrize("kind,params,box", [
    (1, {"A": "y^2"}, BOX4),
    (2, {"P": "w*y", "Q": "y^2"}, BOX4),
    (3, {"A": "s^2"}, FAMILY3_BOX),
    (4, {"A": "y^3"}, BOX4),
])
def test_families_solve_the_system(kind, params, box):
    sol = example_family(kind, params, box)
    sample = SamplePlan(box, count=60).points()
    assert np.max(np.abs(residual_nk1(sol.theta, sol.f).evaluate(sample))) < 1e-10
    assert np.max(np.abs(residual_nk2(sol.theta, sol.f).evaluate(sample))) < 1e-10


def test_family1_values():
    sol = example_family(1, {"A": "y^2"})
    p = np.array([0.0, 1.0, 0.0, 1.0])
    assert sol.theta.evaluate(p) == pytest.approx(1.0 / 3.0)
    assert sol.f.evaluate(p) == 1.0


def test_family4_values():
    sol = example_family(4, {"A": "y^3"})
    p = np.array([0.3, 0.4, 2.0, 1.0])
    assert sol.theta.evaluate(p) == 2.0  # x A(y) with B = 0
    assert sol.f.evaluate(p) == -9.0
    # nonzero ASD Weyl witness: the fourth delta-derivative is 6
    assert sol.theta.deriv(x=1, y=3).evaluate(p) == 6.0


def test_family1_constant_a_is_vacuum(pts):
    sol = example_family(1, {"A": "w"})
    raw = coordinate_curvature(nk_metric(sol.theta), pts)
    assert np.max(np.abs(raw.ricci)) < 1e-8


def test_family_needs_polynomials():
    with pytest.raises(ExpressionError):
        example_family(1, {"A": "sin(y)"})
    with pytest.raises(ValueError):
        example_family(5, {})


def test_lax_flat_exact():
    zero = ExprField.constant(0.0, CHART4)
    lax = lax_fields(zero, zero)
    # L0 = d_w - lambda d_y, L1 = d_z + lambda d_x
    assert lax.l0[0][0][1].evaluate(np.zeros(4)) == 1.0
    assert lax.l1[1][0][1].evaluate(np.zeros(4)) == 1.0
    pts = SamplePlan(BOX4, count=10).points()
    lams = np.linspace(-2, 2, 10)
    assert np.max(np.abs(lax_commutator(lax, pts, lams))) == 0.0


def test_lax_coefficients_xy3():
    theta, f = field("x*y^3"), field("-9*y^4")
    lax = lax_fields(theta, f)
    p = np.array([0.5, -0.5, 1.0, 1.0])
    # L0 = d_w - 3y^2 d_y + 6xy d_x - lambda d_y - 36 y^3 d_lambda
    coeff_x = sum(c.evaluate(p) for _, c in lax.l0[2])
    assert coeff_x == 6.0
    lam0_y = dict(lax.l0[3])[0].evaluate(p)
    lam1_y = dict(lax.l0[3])[1].evaluate(p)
    assert lam0_y == -3.0 and lam1_y == -1.0
    # d_lambda coefficients are (f_y, -f_x) by construction
    assert dict(lax.l0[4])[0].evaluate(p) == -36.0
    assert dict(lax.l1[4])[0].evaluate(p) == 0.0


def test_lax_commutator_valid_fixtures():
    for kind, params, box in ((1, {"A": "y^2"}, BOX4),
                              (4, {"A": "y^3"}, BOX4),
                              (3, {"A": "s^2"}, FAMILY3_BOX)):
        sol = example_family(kind, params, box)
        assert commutator_sweep(sol, count=100) < 1e-8


def test_lax_commutator_negative_control():
    theta = field("x^2*y^2")
    bad = NKSolution(theta, induced_f(theta), BOX4)
    value = lax_commutator(lax_fields(bad.theta, bad.f),
                           np.array([[1.0, 1.0, 1.0, 1.0]]), 1.0)
    assert np.max(np.abs(value)) > 1e-2
    # the nonvanishing component is the spectral one: -box f
    np.testing.assert_allclose(value[0, 4], -288.0, atol=1e-10)
    assert np.max(np.abs(value[0, :2])) == 0.0


def test_equivalence_of_formulations(pts):
    # residuals vanish <=> commutator vanishes <=> SD Weyl vanishes,
    # in both the positive and negative directions
    from nullkahler.curvature import check_asd
    from nullkahler.geometry import nk_coframe

    good = example_family(1, {"A": "y^2"})
    assert np.max(np.abs(residual_nk2(good.theta, good.f).evaluate(pts))) < 1e-10
    assert commutator_sweep(good) < 1e-8
    assert check_asd(nk_coframe(good.theta), pts) < 1e-8

    theta = field("x^2*y^2")
    bad = NKSolution(theta, induced_f(theta), BOX4)
    assert np.max(np.abs(residual_nk2(bad.theta, bad.f).evaluate(pts))) > 1e-2
    assert commutator_sweep(bad) > 1e-2
    assert check_asd(nk_coframe(bad.theta), pts) > 1e-2


def test_box_operator_matches_nk2(pts):
    theta = field("x*y^3 + z*x^2/4")
    g = field("w*x^2 - y^3/3")
    direct = (g.deriv(x=1, w=1) + g.deriv(y=1, z=1)
              + theta.deriv(y=2) * g.deriv(x=2)
              + theta.deriv(x=2) * g.deriv(y=2)
              - 2.0 * (theta.deriv(x=1, y=1) * g.deriv(x=1, y=1)))
    np.testing.assert_allclose(box_operator(theta, g).evaluate(pts),
                               direct.evaluate(pts), atol=1e-14)
