import numpy as np
import pytest

from nullkahler.fields import (
    BoundaryError,
    Chart,
    DomainError,
    ExcludedBand,
    ExprField,
    GridSpec,
    MultiIndex,
    OrderOverflowError,
    SampledField,
    grid_from_csv,
    grid_to_csv,
    sample_to_grid,
)

CHART4 = Chart(("w", "z", "x", "y"))
CHART2 = Chart(("x", "y"))


def test_closed_form_mixed_fourth_derivative():
    theta = ExprField.from_text("x*y^3", CHART4)
    d = theta.deriv(x=1, y=3)
    assert d.evaluate(np.array([0.3, -0.4, 1.7, 2.9])) == 6.0


def test_closed_form_second_derivative():
    f = ExprField.from_text("-9*y^4", CHART4)
    assert f.deriv(y=2).evaluate(np.array([0.0, 0.0, 0.0, 2.0])) == -108.0 * 4


def test_order_overflow():
    theta = ExprField.from_text("x*y^3", CHART4)
    with pytest.raises(OrderOverflowError):
        theta.deriv(x=3, y=2)


def test_evaluate_examples():
    field = ExprField.from_text("x^2/y^2", CHART2)
    assert field.evaluate(np.array([2.0, 1.0])) == 4.0
    zero = ExprField.constant(0.0, CHART2)
    assert zero.evaluate(np.array([0.77, -0.2])) == 0.0
    from nullkahler.expressions import EvaluationError

    with pytest.raises(EvaluationError):
        field.evaluate(np.array([1.0, 0.0]))


def test_evaluate_bitwise_reproducible():
    field = ExprField.from_text("sin(x)*y^3 - x/(2+y)", CHART2)
    pts = np.random.default_rng(5).uniform(-1, 1, size=(50, 2))
    first = field.evaluate(pts)
    second = field.evaluate(pts)
    assert np.array_equal(first, second)


def test_excluded_band():
    chart = Chart(("x", "y"), (ExcludedBand("y", 0.0),))
    field = ExprField.from_text("x/y", chart)
    assert field.evaluate(np.array([1.0, 0.5])) == 2.0
    with pytest.raises(DomainError):
        field.evaluate(np.array([1.0, 0.03]))


def test_sample_to_grid_nodes_exact():
    grid = GridSpec(((0.0, 1.0, 16), (0.0, 1.0, 16)))
    field = ExprField.from_text("x*y^3", CHART2)
    sampled = sample_to_grid(field, grid)
    xs, ys = grid.coordinates()
    for i in (0, 5, 15):
        for j in (0, 9, 15):
            assert sampled.values[i, j] == xs[i] * ys[j] ** 3
    constant = sample_to_grid(ExprField.constant(1.0, CHART2), grid)
    assert np.all(constant.values == 1.0)


def test_resampling_identity():
    grid = GridSpec(((0.0, 1.0, 12), (0.0, 1.0, 12)))
    sampled = sample_to_grid(ExprField.from_text("x*y^3", CHART2), grid)
    again = sample_to_grid(sampled, grid)
    assert np.array_equal(sampled.values, again.values)


def test_degenerate_grid_rejected():
    with pytest.raises(ValueError):
        GridSpec(((1.0, 1.0, 16),))
    # the sampled backend needs stencil support: >= 9 nodes per axis
    field = ExprField.from_text("x*y", CHART2)
    with pytest.raises(ValueError):
        sample_to_grid(field, GridSpec(((0.0, 1.0, 5), (0.0, 1.0, 16))))


def test_sampled_fourth_derivative_oracle():
    # sampled copy of theta = x*y^3: mixed 4th derivative at an interior
    # node must reproduce the closed-form value 6 (stencils are exact on
    # quartics, so the tolerance is far below the required 1e-5)
    grid = GridSpec(((0.0, 2.0, 33), (0.0, 2.0, 33)))
    field = sample_to_grid(ExprField.from_text("x*y^3", CHART2), grid)
    d = field.differentiate(MultiIndex((1, 3)))
    assert abs(d.evaluate(np.array([1.0, 1.0])) - 6.0) < 1e-5


def test_sampled_boundary_violation():
    grid = GridSpec(((0.0, 1.0, 17), (0.0, 1.0, 17)))
    field = sample_to_grid(ExprField.from_text("x*y^3", CHART2), grid)
    d = field.differentiate(MultiIndex((1, 1)))
    with pytest.raises(BoundaryError):
        d.evaluate(np.array([0.01, 0.5]))


def test_sampled_interpolation_off_node():
    grid = GridSpec(((0.0, 2.0, 41), (0.0, 2.0, 41)))
    field = sample_to_grid(ExprField.from_text("x^3*y^2", CHART2), grid)
    value = field.evaluate(np.array([1.234, 0.789]))
    assert value == pytest.approx(1.234 ** 3 * 0.789 ** 2, abs=1e-9)


def test_linearity_both_backends():
    f = ExprField.from_text("x^2*y", CHART2)
    g = ExprField.from_text("y^3 - x", CHART2)
    combo = f * 2.5 + g * (-1.5)
    pts = np.random.default_rng(0).uniform(0.3, 0.7, size=(20, 2))
    idx = MultiIndex((1, 1))
    lhs = combo.differentiate(idx).evaluate(pts)
    rhs = 2.5 * f.differentiate(idx).evaluate(pts) \
        - 1.5 * g.differentiate(idx).evaluate(pts)
    np.testing.assert_allclose(lhs, rhs, atol=1e-14)

    grid = GridSpec(((0.0, 1.0, 33), (0.0, 1.0, 33)))
    sf, sg = sample_to_grid(f, grid), sample_to_grid(g, grid)
    combo_s = SampledField(grid, 2.5 * sf.values - 1.5 * sg.values, CHART2)
    lhs_s = combo_s.differentiate(idx).evaluate(pts)
    rhs_s = 2.5 * sf.differentiate(idx).evaluate(pts) \
        - 1.5 * sg.differentiate(idx).evaluate(pts)
    np.testing.assert_allclose(lhs_s, rhs_s, atol=1e-10)


def test_mixed_partial_symmetry():
    f = ExprField.from_text("x^3*y^2 + x*y^4", CHART2)
    pts = np.random.default_rng(1).uniform(0.3, 0.7, size=(20, 2))
    a = f.deriv(x=1).deriv(y=1).evaluate(pts)
    b = f.deriv(y=1).deriv(x=1).evaluate(pts)
    np.testing.assert_array_equal(a, b)  # exact for the closed form

    grid = GridSpec(((0.0, 1.0, 33), (0.0, 1.0, 33)))
    s = sample_to_grid(f, grid)
    sa = s.differentiate(MultiIndex((1, 0))).differentiate(MultiIndex((0, 1)))
    sb = s.differentiate(MultiIndex((0, 1))).differentiate(MultiIndex((1, 0)))
    rel = np.max(np.abs(sa.evaluate(pts) - sb.evaluate(pts)))
    scale = max(np.max(np.abs(sa.evaluate(pts))), 1.0)
    assert rel / scale < 1e-8


def test_backend_agreement_quartic_polynomials():
    # all 4th derivatives of a degree <= 6 polynomial on [-1,1]^4,
    # compared on the 33^4 interior nodes left by the stencil margin
    rng = np.random.default_rng(42)
    names = ("w", "z", "x", "y")
    exponents = [(2, 1, 2, 1), (0, 0, 3, 3), (1, 1, 2, 2), (0, 2, 0, 4),
                 (6, 0, 0, 0), (0, 0, 1, 4), (1, 0, 4, 1), (2, 2, 1, 1)]
    coeffs = rng.uniform(-0.5, 0.5, size=len(exponents))
    text = " + ".join(
        f"{c:.6f}*w^{e[0]}*z^{e[1]}*x^{e[2]}*y^{e[3]}"
        for c, e in zip(coeffs, exponents)
    )
    chart = Chart(names)
    field = ExprField.from_text(text, chart)
    grid = GridSpec(tuple((-1.0, 1.0, 49) for _ in range(4)))
    sampled = sample_to_grid(field, grid)

    axes = grid.coordinates()
    inner = [axis[8:-8] for axis in axes]
    mesh = np.meshgrid(*inner, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    assert mesh[0].shape == (33, 33, 33, 33)

    from itertools import combinations_with_replacement

    worst = 0.0
    for combo in combinations_with_replacement(range(4), 4):
        orders = tuple(combo.count(axis) for axis in range(4))
        idx = MultiIndex(orders)
        exact = field.differentiate(idx).evaluate(pts).reshape(mesh[0].shape)
        approx = sampled.differentiate(idx)
        block = approx.values[(slice(8, -8),) * 4]
        worst = max(worst, float(np.max(np.abs(block - exact))))
    assert worst < 1e-4


def test_grid_csv_round_trip(tmp_path):
    grid = GridSpec(((0.0, 1.0, 9), (0.0, 2.0, 11)))
    sampled = sample_to_grid(ExprField.from_text("x*y^3 - 0.25", CHART2), grid)
    path = tmp_path / "grid.csv"
    grid_to_csv(sampled, path)
    header = path.read_text().splitlines()[0]
    assert header.startswith("# axes: x,0,1,9;y,0,2,11")
    loaded = grid_from_csv(path)
    assert loaded.chart.coords == ("x", "y")
    assert np.array_equal(loaded.values, sampled.values)
