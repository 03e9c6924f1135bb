"""Symmetry reduction: dKP potentials, Einstein-Weyl structures,
monopole pairs, and the circle-bundle metric they assemble into.

Potentials H(x, y, t) and W(x, y, t) satisfy

    H_yy - H_xt + H_x H_xx = 0          (potential dKP)
    W_yy - W_xt + (H_x W_x)_x = 0       (linearised dKP)

With u = H_x the Weyl structure h = dy^2 - 4 dx dt - 4 u dt^2,
nu = -4 u_x dt is Einstein-Weyl exactly when u solves dKP, and
(V = W_x, alpha = -W_x dy - 2 W_y dt) solves the generalised monopole
equation on it.  The four-metric built from (H, W) is then ASD
null-Kahler with the Killing vector along z.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import christoffel, christoffel_derivatives
from .fields import Chart, ExprField, MultiIndex
from .geometry import (
    CoFrame,
    DegeneracyError,
    FormField,
    MetricField,
    dkp_coframe,
    dkp_metric,
    exterior_derivative,
    wedge,
)
from .sampling import Box
from .spinors import hodge_star_values

EW_CHART = Chart(("x", "y", "t"))

#: orientation of the Einstein-Weyl chart (x, y, t); fixed by the
#: closed-form star relations *dt = dt^dy, *dy = 2 dt^dx
EW_ORIENTATION = 1

#: orientation induced by the dkp coframe volume form on (x, y, t, z)
DKP_ORIENTATION = -1

#: orientation used inside the Jones-Tod one-form; the opposite choice
#: flips nu, and this one reproduces nu = -4 u_x dt modulo the gauge
#: term d ln(Wx^2) on every circle-bundle fixture
JONES_TOD_ORIENTATION = 1


def _require_ew_chart(field: ExprField):
    if field.chart.coords != EW_CHART.coords:
        raise ValueError("dkp potentials live on the chart (x, y, t)")


def residual_heqn(h_pot: ExprField) -> ExprField:
    """H_yy - H_xt + H_x H_xx."""
    _require_ew_chart(h_pot)
    return (
        h_pot.deriv(y=2)
        - h_pot.deriv(x=1, t=1)
        + h_pot.deriv(x=1) * h_pot.deriv(x=2)
    )


def residual_lindkp(h_pot: ExprField, w_pot: ExprField) -> ExprField:
    """W_yy - W_xt + (H_x W_x)_x."""
    _require_ew_chart(h_pot)
    _require_ew_chart(w_pot)
    hx_wx = h_pot.deriv(x=1) * w_pot.deriv(x=1)
    return w_pot.deriv(y=2) - w_pot.deriv(x=1, t=1) + hx_wx.deriv(x=1)


def symmetry_w(h_pot: ExprField, a=0.0, b=0.0, c=0.0, e=0.0) -> ExprField:
    """Linearised solution from the scaling/translation symmetry orbit:

        W = a (x H_x + y H_y + t H_t - H) + b H_x + c H_t + e H_y.

    The scaling family carries conformal weight -1 on H (the potential
    equation is invariant under H -> H(lam x, lam y, lam t)/lam), which
    is where the -H term of the a-generator comes from; the residual
    contract residual_lindkp(H, W) = 0 for every exact H pins it.
    """
    _require_ew_chart(h_pot)
    chart = h_pot.chart
    x = ExprField.from_text("x", chart)
    y = ExprField.from_text("y", chart)
    t = ExprField.from_text("t", chart)
    hx, hy, ht = h_pot.deriv(x=1), h_pot.deriv(y=1), h_pot.deriv(t=1)
    out = ExprField.constant(0.0, chart)
    if a:
        out = out + (x * hx + y * hy + t * ht - h_pot) * a
    if b:
        out = out + hx * b
    if c:
        out = out + ht * c
    if e:
        out = out + hy * e
    return out


# --- Einstein-Weyl structures --------------------------------------------------

@dataclass
class EWStructure:
    """Three-metric h and one-form nu on the chart (x, y, t)."""

    h: MetricField
    nu: FormField

    def signature_ok(self, points) -> bool:
        pos, neg = self.h.signature_counts(points)
        return bool(np.all(pos == 2) and np.all(neg == 1))


def ew_from_u(u: ExprField) -> EWStructure:
    """h = dy^2 - 4 dx dt - 4 u dt^2, nu = -4 u_x dt."""
    _require_ew_chart(u)
    chart = u.chart
    zero = ExprField.constant(0.0, chart)
    one = ExprField.constant(1.0, chart)
    x, y, t = 0, 1, 2
    comps = [[zero for _ in range(3)] for _ in range(3)]
    comps[y][y] = one
    comps[x][t] = comps[t][x] = ExprField.constant(-2.0, chart)
    comps[t][t] = -4.0 * u
    h = MetricField(chart, comps, orientation=EW_ORIENTATION)
    nu = FormField(chart, 1, {(t,): -4.0 * u.deriv(x=1)})
    return EWStructure(h, nu)


def weyl_connection(ew: EWStructure, points):
    """Coefficients and exact first derivatives of the Weyl connection.

    gamma^i_jk = LC(h) - 1/2 (d^i_j nu_k + d^i_k nu_j - h_jk nu^i),
    the unique torsion-free connection with D h = nu x h.
    """
    hv = ew.h.evaluate(points)
    hinv = ew.h.inverse(points)
    dh = ew.h.first_derivatives(points)
    ddh = ew.h.second_derivatives(points)
    gamma = christoffel(hv, dh, hinv)
    dgamma = christoffel_derivatives(hv, dh, ddh, hinv)

    n = hv.shape[-1]
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    nu = np.zeros((pts.shape[0], n))
    dnu = np.zeros((pts.shape[0], n, n))
    for (axis,), field in ew.nu.comps.items():
        nu[:, axis] = field.evaluate(pts)
        for k in range(n):
            orders = tuple(1 if c == k else 0 for c in range(n))
            dnu[:, k, axis] = field.differentiate(MultiIndex(orders)).evaluate(pts)

    eye = np.eye(n)
    nu_up = np.einsum("nij,nj->ni", hinv, nu)
    correction = -0.5 * (
        np.einsum("ij,nk->nijk", eye, nu)
        + np.einsum("ik,nj->nijk", eye, nu)
        - np.einsum("njk,ni->nijk", hv, nu_up)
    )
    dhinv = -np.einsum("nia,nkab,nbj->nkij", hinv, dh, hinv)
    dnu_up = np.einsum("nkij,nj->nki", dhinv, nu) + np.einsum(
        "nij,nkj->nki", hinv, dnu
    )
    dcorrection = -0.5 * (
        np.einsum("ij,nlk->nlijk", eye, dnu)
        + np.einsum("ik,nlj->nlijk", eye, dnu)
        - np.einsum("nljk,ni->nlijk", dh, nu_up)
        - np.einsum("njk,nli->nlijk", hv, dnu_up)
    )
    return gamma + correction, dgamma + dcorrection


def ew_residual(ew: EWStructure, points) -> float:
    """Max trace-free symmetrized Ricci of the Weyl connection."""
    gamma, dgamma = weyl_connection(ew, points)
    ricci = (
        np.einsum("nkkij->nij", dgamma)
        - np.einsum("nikkj->nij", dgamma)
        + np.einsum("nkkl,nlij->nij", gamma, gamma)
        - np.einsum("nkil,nlkj->nij", gamma, gamma)
    )
    sym = 0.5 * (ricci + np.swapaxes(ricci, -1, -2))
    hv = ew.h.evaluate(points)
    hinv = ew.h.inverse(points)
    trace = np.einsum("nij,nij->n", hinv, sym)
    tracefree = sym - np.einsum("n,nij->nij", trace / 3.0, hv)
    return float(np.max(np.abs(tracefree)))


# --- monopole pairs -------------------------------------------------------------

@dataclass
class MonopolePair:
    """Function V of conformal weight -1 and connection one-form alpha."""

    v: ExprField
    alpha: FormField
    weight: int = -1


def monopole_from_w(h_pot: ExprField, w_pot: ExprField) -> MonopolePair:
    """V = W_x with alpha = -W_x dy - 2 W_y dt (the gauge used by the
    circle-bundle metric)."""
    _require_ew_chart(w_pot)
    x, y, t = 0, 1, 2
    alpha = FormField(w_pot.chart, 1, {
        (y,): -1.0 * w_pot.deriv(x=1),
        (t,): -2.0 * w_pot.deriv(y=1),
    })
    return MonopolePair(w_pot.deriv(x=1), alpha)


def monopole_residual(ew: EWStructure, pair: MonopolePair, points) -> float:
    """Max component of *_h (dV + 1/2 nu V) - d alpha over the points."""
    chart = pair.v.chart
    dv = exterior_derivative(FormField(chart, 0, {(): pair.v}))
    coupled = dv + ew.nu.mul_scalar(pair.v * 0.5)
    values = coupled.evaluate(points)
    hv = ew.h.evaluate(points)
    star = hodge_star_values(values, 1, hv, EW_ORIENTATION)
    dalpha = exterior_derivative(pair.alpha).evaluate(points)
    return float(np.max(np.abs(star - dalpha)))


# --- circle-bundle metric and its SD two-forms ----------------------------------

def build_metric(h_pot: ExprField, w_pot: ExprField, box: Box = None) -> MetricField:
    """The four-metric on (x, y, t, z); delegates to the constructor."""
    return dkp_metric(h_pot, w_pot, box)


def sigma11_rhs(h_pot: ExprField, w_pot: ExprField) -> FormField:
    """Closed-form d Sigma^{1'1'} for the circle-bundle tetrad:

        d(2W - H_x) ^ dt ^ dz  -  2 (lindKP residual) dx ^ dy ^ dt.

    Derived by exact differentiation of the Sigma^{1'1'} components; it
    vanishes iff W = H_x/2 + f(t) modulo the linearised equation.
    """
    chart4 = Chart(("x", "y", "t", "z"), h_pot.chart.excluded)
    x, y, t, z = 0, 1, 2, 3
    f0 = (2.0 * w_pot - h_pot.deriv(x=1)).on_chart(chart4)
    df = exterior_derivative(FormField(chart4, 0, {(): f0}))
    dt_dz = FormField(chart4, 2, {(t, z): ExprField.constant(1.0, chart4)})
    dxdydt = FormField(chart4, 3, {(x, y, t): ExprField.constant(1.0, chart4)})
    lind = residual_lindkp(h_pot, w_pot).on_chart(chart4)
    return wedge(df, dt_dz) + dxdydt.mul_scalar(lind * -2.0)


@dataclass
class DSigmaReport:
    d_sigma00: float
    d_sigma01: float
    d_sigma11_max: float
    d_sigma11_vs_rhs: float


def sd_two_forms(h_pot: ExprField, w_pot: ExprField, points,
                 box: Box = None):
    """The printed SD two-form basis and its closedness report.

    Returns (sigma00, sigma01, sigma11, report) where the forms use the
    display normalization Sigma^{0'0'} = e00'^e10',
    Sigma^{0'1'} = e10'^e01' - e00'^e11', Sigma^{1'1'} = e01'^e11'.
    """
    coframe = dkp_coframe(h_pot, w_pot, box)
    e00, e01 = coframe.form(0, 0), coframe.form(0, 1)
    e10, e11 = coframe.form(1, 0), coframe.form(1, 1)
    sigma00 = wedge(e00, e10)
    sigma01 = wedge(e10, e01) - wedge(e00, e11)
    sigma11 = wedge(e01, e11)
    d00 = float(np.max(np.abs(exterior_derivative(sigma00).evaluate(points))))
    d01 = float(np.max(np.abs(exterior_derivative(sigma01).evaluate(points))))
    d11 = exterior_derivative(sigma11).evaluate(points)
    rhs = sigma11_rhs(h_pot, w_pot).evaluate(points)
    report = DSigmaReport(
        d00, d01,
        float(np.max(np.abs(d11))),
        float(np.max(np.abs(d11 - rhs))),
    )
    return sigma00, sigma01, sigma11, report


# --- Jones-Tod reduction ---------------------------------------------------------

@dataclass
class JonesTodReduction:
    """EW data recovered from a four-metric with the Killing vector d_z.

    ``h`` carries exact component fields on (x, y, t); the one-form is
    exposed pointwise through ``nu_at`` (its derivatives are never
    needed by the round-trip contracts).
    """

    h: MetricField
    nu_at: object  # callable(points4) -> (n, 4) component array


def jones_tod_reduce(metric: MetricField,
                     orientation: int = JONES_TOD_ORIENTATION) -> JonesTodReduction:
    """h = |K|^{-2} g - |K|^{-4} Kb o Kb, nu = 2 |K|^{-2} *_g (Kb ^ dKb)
    for K = d_z; the metric components must not depend on z."""
    chart4 = metric.chart
    if chart4.coords != ("x", "y", "t", "z"):
        raise ValueError("jones_tod_reduce expects the chart (x, y, t, z)")
    zi = 3
    for i in range(4):
        for j in range(4):
            if "z" in metric.component(i, j).expr.variables():
                raise ValueError("metric components depend on z; K is not Killing")
    chart3 = Chart(("x", "y", "t"), chart4.excluded)
    norm2 = metric.component(zi, zi)  # |K|^2 = g_zz
    comps3 = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            gij = metric.component(i, j)
            ki = metric.component(zi, i)
            kj = metric.component(zi, j)
            entry = gij / norm2 - (ki * kj) / (norm2 * norm2)
            comps3[i][j] = ExprField(entry.expr, chart3)
    h = MetricField(chart3, comps3)

    kflat = FormField(chart4, 1, {
        (mu,): metric.component(zi, mu) for mu in range(4)
    })
    three_form = wedge(kflat, exterior_derivative(kflat))

    def nu_at(points4) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points4, dtype=float))
        gv = metric.evaluate(pts)
        star = hodge_star_values(three_form.evaluate(pts), 3, gv, orientation)
        scale = 2.0 / norm2.on_chart(chart4).evaluate(pts)
        return star * scale[:, None]

    return JonesTodReduction(h, nu_at)


# --- pseudo hyper-Kahler specialization ------------------------------------------

def hyperkahler_specialize(h_pot: ExprField, box: Box = None) -> MetricField:
    """g = (H_xx/2)(dy^2 - 4 dx dt - 4 H_x dt^2)
          - (2/H_xx)(dz - H_xx dy/2 - H_xy dt)^2,

    the covariantly-constant-frame case W = H_x/2; H_xx must be bounded
    away from zero (degenerate conformal factor otherwise).
    """
    _require_ew_chart(h_pot)
    hxx = h_pot.deriv(x=2)
    hxy = h_pot.deriv(x=1, y=1)
    hx = h_pot.deriv(x=1)
    if box is not None:
        from .geometry import _check_nonvanishing

        _check_nonvanishing(hxx, box, "H_xx")
    chart4 = Chart(("x", "y", "t", "z"), h_pot.chart.excluded)
    hxx4, hxy4, hx4 = (f.on_chart(chart4) for f in (hxx, hxy, hx))
    zero = ExprField.constant(0.0, chart4)
    x, y, t, z = 0, 1, 2, 3
    comps = [[zero for _ in range(4)] for _ in range(4)]
    comps[x][t] = comps[t][x] = -1.0 * hxx4
    comps[y][z] = comps[z][y] = ExprField.constant(1.0, chart4)
    comps[y][t] = comps[t][y] = -1.0 * hxy4
    comps[z][z] = -2.0 / hxx4
    comps[z][t] = comps[t][z] = 2.0 * hxy4 / hxx4
    comps[t][t] = -2.0 * (hxx4 * hx4) - 2.0 * (hxy4 * hxy4) / hxx4
    metric = MetricField(chart4, comps)
    metric.orientation = DKP_ORIENTATION
    return metric
