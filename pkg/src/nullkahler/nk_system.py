"""The fourth-order system behind the split-signature metric ansatz.

A potential Theta(w, z, x, y) and an auxiliary function f satisfy

    Theta_wx + Theta_zy + Theta_xx Theta_yy - Theta_xy^2 = f,
    box f := f_xw + f_yz + Theta_yy f_xx + Theta_xx f_yy
             - 2 Theta_xy f_xy = 0,

which is equivalent to anti-self-duality of the induced metric and to
commutativity of the associated spectral-parameter Lax fields.  This
module provides the residual operators, four closed-form solution
families, and the Lax pair with a numerical commutator check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expressions import (
    Expr,
    ExpressionError,
    Var,
    as_expr,
    integrate_polynomial,
    parse,
)
from .fields import Chart, ExcludedBand, ExprField
from .sampling import Box

NK_COORDS = ("w", "z", "x", "y")


def _nk_chart(excluded=()) -> Chart:
    return Chart(NK_COORDS, tuple(excluded))


DEFAULT_NK_BOX = Box(((-1.0, 1.0),) * 4)


@dataclass(frozen=True)
class NKSolution:
    """A (Theta, f) pair with its sampling box.

    Objects labelled valid satisfy both residual operators on the box;
    the label is asserted by tests, not enforced here.
    """

    theta: ExprField
    f: ExprField
    box: Box = DEFAULT_NK_BOX
    label: str = ""


def induced_f(theta: ExprField) -> ExprField:
    """f := Theta_wx + Theta_zy + Theta_xx Theta_yy - Theta_xy^2."""
    txy = theta.deriv(x=1, y=1)
    return (
        theta.deriv(w=1, x=1)
        + theta.deriv(z=1, y=1)
        + theta.deriv(x=2) * theta.deriv(y=2)
        - txy * txy
    )


def residual_nk1(theta: ExprField, f: ExprField) -> ExprField:
    """First equation residual: induced_f(theta) - f."""
    return induced_f(theta) - f


def box_operator(theta: ExprField, g: ExprField) -> ExprField:
    """box g = g_xw + g_yz + Tyy g_xx + Txx g_yy - 2 Txy g_xy."""
    return (
        g.deriv(x=1, w=1)
        + g.deriv(y=1, z=1)
        + theta.deriv(y=2) * g.deriv(x=2)
        + theta.deriv(x=2) * g.deriv(y=2)
        - 2.0 * (theta.deriv(x=1, y=1) * g.deriv(x=1, y=1))
    )


def residual_nk2(theta: ExprField, f: ExprField) -> ExprField:
    """Second equation residual: box f."""
    return box_operator(theta, f)


# --- closed-form solution families -------------------------------------------

def _parse_in(text, names):
    if isinstance(text, Expr):
        return text
    return parse(str(text), names)


def example_family(kind: int, params: dict, box: Box = DEFAULT_NK_BOX) -> NKSolution:
    """The four closed-form families.

    1. Theta_x = 0:  Theta = B(w,y) + z * int A(w,y) dy, f = A.
       A, B polynomial (the y-antiderivative must be closed form).
    2. f = Theta_x with Theta_xx = 0:
       Theta = x * int P dy + z * intint (P - P_w + 2 P P_y) dy^2
             + intint Q dy^2,  f = Theta_x;  P, Q polynomial in (w, y).
    3. Theta = A(x/y) for an arbitrary expression A(s); f is induced.
       The locus y = 0 is excluded from the chart.
    4. Theta = x A(y) + B(y), f = -(A')^2.
    """
    if kind == 1:
        a = _parse_in(params["A"], ("w", "y"))
        b = _parse_in(params.get("B", "0"), ("w", "y"))
        theta = as_expr(b) + Var("z") * integrate_polynomial(a, "y")
        chart = _nk_chart()
        return NKSolution(ExprField(theta, chart), ExprField(a, chart), box,
                          label="family-1")
    if kind == 2:
        p = _parse_in(params["P"], ("w", "y"))
        q = _parse_in(params.get("Q", "0"), ("w", "y"))
        p_w = p.diff("w")
        p_y = p.diff("y")
        source = p - p_w + 2.0 * (p * p_y)
        n_zz = integrate_polynomial(integrate_polynomial(source, "y"), "y")
        n_q = integrate_polynomial(integrate_polynomial(q, "y"), "y")
        theta = (Var("x") * integrate_polynomial(p, "y")
                 + Var("z") * n_zz + n_q)
        chart = _nk_chart()
        theta_field = ExprField(theta, chart)
        return NKSolution(theta_field, theta_field.deriv(x=1), box,
                          label="family-2")
    if kind == 3:
        a = _parse_in(params["A"], ("s",))
        theta = a.substitute("s", Var("x") / Var("y"))
        chart = _nk_chart(excluded=(ExcludedBand("y", 0.0),))
        theta_field = ExprField(theta, chart)
        return NKSolution(theta_field, induced_f(theta_field), box,
                          label="family-3")
    if kind == 4:
        a = _parse_in(params["A"], ("y",))
        b = _parse_in(params.get("B", "0"), ("y",))
        theta = Var("x") * a + b
        a_y = a.diff("y")
        chart = _nk_chart()
        return NKSolution(ExprField(theta, chart),
                          ExprField(-(a_y * a_y), chart), box,
                          label="family-4")
    raise ValueError(f"unknown family kind {kind!r}")


# --- Lax pair -----------------------------------------------------------------

LAX_COORDS = ("w", "z", "x", "y", "lambda")


@dataclass
class LaxFields:
    """Two vector fields on (w, z, x, y, lambda).

    Coefficients are polynomials in lambda with scalar-field values:
    ``l0[k]`` / ``l1[k]`` map a coordinate index to a list of
    (lambda power, ExprField).  The normal form is pinned by
    coefficient(d_w in L0) = coefficient(d_z in L1) = 1.
    """

    l0: dict
    l1: dict
    chart: Chart


def lax_fields(theta: ExprField, f: ExprField) -> LaxFields:
    """L0 = (d_w - Txy d_y + Tyy d_x) - lambda d_y + f_y d_lambda,
    L1 = (d_z + Txx d_y - Txy d_x) + lambda d_x - f_x d_lambda."""
    chart = theta.chart
    one = ExprField.constant(1.0, chart)
    txx = theta.deriv(x=2)
    tyy = theta.deriv(y=2)
    txy = theta.deriv(x=1, y=1)
    l0 = {
        0: [(0, one)],
        2: [(0, tyy)],
        3: [(0, -txy), (1, -one)],
        4: [(0, f.deriv(y=1))],
    }
    l1 = {
        1: [(0, one)],
        2: [(0, -txy), (1, one)],
        3: [(0, txx)],
        4: [(0, -f.deriv(x=1))],
    }
    return LaxFields(l0, l1, chart)


def _poly_diff_coord(poly, axis, chart):
    out = []
    for power, coeff in poly:
        orders = tuple(1 if k == axis else 0 for k in range(chart.dim))
        from .fields import MultiIndex

        out.append((power, coeff.differentiate(MultiIndex(orders))))
    return out


def _poly_diff_lambda(poly):
    return [(power - 1, coeff * float(power)) for power, coeff in poly if power]


def _poly_scale_add(acc, poly, scale_poly):
    """acc += scale_poly * poly (both lambda polynomials)."""
    for p1, c1 in scale_poly:
        for p2, c2 in poly:
            acc.append((p1 + p2, c1 * c2))
    return acc


def lax_commutator(lax: LaxFields, points, lambdas) -> np.ndarray:
    """[L0, L1] components at (point, lambda) pairs; shape (n, 5).

    The commutator coefficients are lambda polynomials of degree <= 2
    assembled from exact field derivatives of the Lax coefficients:
    [L0,L1]^k = L0(L1^k) - L1(L0^k).
    """
    chart = lax.chart
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lam = np.broadcast_to(np.asarray(lambdas, dtype=float), (pts.shape[0],))
    out = np.zeros((pts.shape[0], 5))
    for k in range(5):
        poly = []
        for j, coeff_j in lax.l0.items():
            target = lax.l1.get(k, [])
            if j < 4:
                dtarget = _poly_diff_coord(target, j, chart)
            else:
                dtarget = _poly_diff_lambda(target)
            _poly_scale_add(poly, dtarget, coeff_j)
        for j, coeff_j in lax.l1.items():
            target = lax.l0.get(k, [])
            if j < 4:
                dtarget = _poly_diff_coord(target, j, chart)
            else:
                dtarget = _poly_diff_lambda(target)
            _poly_scale_add(poly, [(p, c * -1.0) for p, c in dtarget], coeff_j)
        for power, coeff in poly:
            out[:, k] += coeff.evaluate(pts) * lam ** power
    return out


def commutator_sweep(solution: NKSolution, count: int = 100, seed: int = 20240,
                     lambda_window=(-2.0, 2.0)) -> float:
    """Max |[L0, L1]| component over a deterministic (point, lambda) sweep."""
    from .sampling import SamplePlan

    plan = SamplePlan(solution.box, count=count, seed=seed)
    pts = plan.points()
    lam = plan.rng().uniform(*lambda_window, size=pts.shape[0])
    lax = lax_fields(solution.theta, solution.f)
    return float(np.max(np.abs(lax_commutator(lax, pts, lam))))
