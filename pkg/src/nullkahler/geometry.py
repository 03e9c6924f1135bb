"""Coframes, metric fields and exterior calculus on a single chart.

Forms are stored in coordinate components (dictionaries keyed by strictly
increasing index tuples); frame quantities are converted to coordinate
components at evaluation points.  Line-element products are symmetrized,
so a displayed ``dw dx`` contributes 1/2 to each of g_wx and g_xw.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .expressions import Const
from .fields import Chart, DomainError, ExprField, MultiIndex, ScalarField
from .sampling import Box, SamplePlan
from .spinors import SYM_PAIRS, hodge_star_values, sigma_basis

NK_CHART = Chart(("w", "z", "x", "y"))

DEGENERACY_TOL = 1e-10


class DegeneracyError(ValueError):
    """Coframe or metric degenerate on the declared domain."""


def _merge_sign(left: tuple, right: tuple):
    """Sorted concatenation of disjoint index tuples and its parity."""
    if set(left) & set(right):
        return None, 0
    merged = list(left)
    sign = 1
    for idx in right:
        pos = 0
        while pos < len(merged) and merged[pos] < idx:
            pos += 1
        sign *= (-1) ** (len(merged) - pos)
        merged.insert(pos, idx)
    return tuple(merged), sign


def _zero_field(chart: Chart) -> ExprField:
    return ExprField.constant(0.0, chart)


class FormField:
    """Differential form of degree p with scalar-field components."""

    def __init__(self, chart: Chart, degree: int, comps=None):
        if not 0 <= degree <= chart.dim:
            raise DomainError(f"degree {degree} out of range on {chart.coords}")
        self.chart = chart
        self.degree = degree
        self.comps = {}
        for key, value in (comps or {}).items():
            key = tuple(key)
            if len(key) != degree or list(key) != sorted(set(key)):
                raise DomainError(f"bad component key {key} for degree {degree}")
            self.comps[key] = value

    @classmethod
    def zero(cls, chart: Chart, degree: int) -> "FormField":
        return cls(chart, degree)

    @classmethod
    def one_form(cls, chart: Chart, components) -> "FormField":
        comps = {}
        for k, field in enumerate(components):
            if _is_zero(field):
                continue
            comps[(k,)] = field
        return cls(chart, 1, comps)

    @classmethod
    def from_scalar(cls, field: ScalarField) -> "FormField":
        return cls(field.chart, 0, {(): field})

    def component(self, key) -> ScalarField:
        return self.comps.get(tuple(key), _zero_field(self.chart))

    def __add__(self, other: "FormField") -> "FormField":
        if other.degree != self.degree or other.chart != self.chart:
            raise DomainError("form degree/chart mismatch")
        comps = dict(self.comps)
        for key, value in other.comps.items():
            comps[key] = comps[key] + value if key in comps else value
        return FormField(self.chart, self.degree, comps)

    def __sub__(self, other: "FormField") -> "FormField":
        return self + other.scaled(-1.0)

    def scaled(self, factor) -> "FormField":
        comps = {key: value * factor for key, value in self.comps.items()}
        return FormField(self.chart, self.degree, comps)

    def mul_scalar(self, field: ScalarField) -> "FormField":
        comps = {key: value * field for key, value in self.comps.items()}
        return FormField(self.chart, self.degree, comps)

    def evaluate(self, points) -> np.ndarray:
        """Dense antisymmetric component array of shape (n, 4, ..., 4)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.chart.dim
        if self.degree == 0:
            if self.comps:
                return np.asarray(self.component(()).evaluate(pts))
            return np.zeros(pts.shape[0])
        out = np.zeros((pts.shape[0],) + (n,) * self.degree)
        from itertools import permutations as _perms

        for key, field in self.comps.items():
            values = field.evaluate(pts)
            for perm in _perms(range(self.degree)):
                sign = 1
                for i in range(self.degree):
                    for j in range(i + 1, self.degree):
                        if perm[i] > perm[j]:
                            sign = -sign
                idx = tuple(key[p] for p in perm)
                out[(slice(None),) + idx] = sign * values
        return out


def _is_zero(field) -> bool:
    return (
        isinstance(field, ExprField)
        and isinstance(field.expr, Const)
        and field.expr.value == 0.0
    )


def wedge(a: FormField, b: FormField) -> FormField:
    if a.chart != b.chart:
        raise DomainError("wedge across different charts")
    degree = a.degree + b.degree
    if degree > a.chart.dim:
        raise DomainError("wedge degree exceeds chart dimension")
    comps = {}
    for ka, fa in a.comps.items():
        for kb, fb in b.comps.items():
            key, sign = _merge_sign(ka, kb)
            if key is None:
                continue
            term = (fa * fb) * float(sign)
            comps[key] = comps[key] + term if key in comps else term
    return FormField(a.chart, degree, comps)


def exterior_derivative(a: FormField) -> FormField:
    if a.degree >= a.chart.dim:
        return FormField.zero(a.chart, min(a.degree + 1, a.chart.dim))
    comps = {}
    for key, field in a.comps.items():
        for axis in range(a.chart.dim):
            if axis in key:
                continue
            orders = tuple(1 if c == axis else 0 for c in range(a.chart.dim))
            partial = field.differentiate(MultiIndex(orders))
            new_key, sign = _merge_sign((axis,), key)
            term = partial * float(sign)
            comps[new_key] = comps[new_key] + term if new_key in comps else term
    return FormField(a.chart, a.degree + 1, comps)


def hodge_star(a: FormField, g: "MetricField", orientation: int, points) -> np.ndarray:
    """Pointwise Hodge dual of ``a`` with respect to ``g`` at ``points``."""
    values = a.evaluate(points)
    gv = g.evaluate(points)
    return hodge_star_values(values, a.degree, gv, orientation)


class MetricField:
    """Symmetric matrix of scalar-field components on a chart."""

    def __init__(self, chart: Chart, comps, orientation: int = 1):
        self.chart = chart
        n = chart.dim
        self.comps = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                entry = comps[i][j]
                self.comps[i][j] = entry
        self.orientation = orientation
        self._deriv_cache = {}

    def component(self, i: int, j: int) -> ScalarField:
        return self.comps[i][j]

    def evaluate(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.chart.dim
        out = np.empty((pts.shape[0], n, n))
        for i in range(n):
            for j in range(i, n):
                values = self.comps[i][j].evaluate(pts)
                out[:, i, j] = values
                out[:, j, i] = values
        return out

    def inverse(self, points) -> np.ndarray:
        gv = self.evaluate(points)
        det = np.linalg.det(gv)
        if np.any(np.abs(det) < DEGENERACY_TOL):
            raise DegeneracyError("metric degenerate at a sample point")
        return np.linalg.inv(gv)

    def _derivative_field(self, i, j, orders):
        key = (i, j, orders)
        if key not in self._deriv_cache:
            self._deriv_cache[key] = self.comps[i][j].differentiate(MultiIndex(orders))
        return self._deriv_cache[key]

    def first_derivatives(self, points) -> np.ndarray:
        """dg[n, k, i, j] = partial_k g_ij, exact."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.chart.dim
        out = np.empty((pts.shape[0], n, n, n))
        for k in range(n):
            orders = tuple(1 if a == k else 0 for a in range(n))
            for i in range(n):
                for j in range(i, n):
                    values = self._derivative_field(i, j, orders).evaluate(pts)
                    out[:, k, i, j] = values
                    out[:, k, j, i] = values
        return out

    def second_derivatives(self, points) -> np.ndarray:
        """ddg[n, k, l, i, j] = partial_k partial_l g_ij, exact."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.chart.dim
        out = np.empty((pts.shape[0], n, n, n, n))
        for k in range(n):
            for l in range(k, n):
                orders = tuple(
                    (1 if a == k else 0) + (1 if a == l else 0) for a in range(n)
                )
                for i in range(n):
                    for j in range(i, n):
                        values = self._derivative_field(i, j, orders).evaluate(pts)
                        out[:, k, l, i, j] = values
                        out[:, k, l, j, i] = values
                        out[:, l, k, i, j] = values
                        out[:, l, k, j, i] = values
        return out

    def signature_counts(self, points):
        """(positive, negative) eigenvalue counts at each point."""
        eigenvalues = np.linalg.eigvalsh(self.evaluate(points))
        return (eigenvalues > 0).sum(axis=1), (eigenvalues < 0).sum(axis=1)


class CoFrame:
    """Null tetrad of one-forms e^{AA'} with scalar-field components."""

    def __init__(self, chart: Chart, forms):
        self.chart = chart
        self.forms = forms  # forms[A][Ap] is a degree-1 FormField

    def form(self, a: int, ap: int) -> FormField:
        return self.forms[a][ap]

    def evaluate(self, points) -> np.ndarray:
        """E[n, A, A', mu]."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.chart.dim
        out = np.empty((pts.shape[0], 2, 2, n))
        for a in range(2):
            for ap in range(2):
                form = self.forms[a][ap]
                for mu in range(n):
                    out[:, a, ap, mu] = form.component((mu,)).evaluate(pts)
        return out

    def first_derivatives(self, points) -> np.ndarray:
        """dE[n, k, A, A', mu] = partial_k e^{AA'}_mu, exact."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.chart.dim
        out = np.zeros((pts.shape[0], n, 2, 2, n))
        for a in range(2):
            for ap in range(2):
                for mu, field in self.forms[a][ap].comps.items():
                    for k in range(n):
                        orders = tuple(1 if c == k else 0 for c in range(n))
                        out[:, k, a, ap, mu[0]] = field.differentiate(
                            MultiIndex(orders)
                        ).evaluate(pts)
        return out

    def second_derivatives(self, points) -> np.ndarray:
        """ddE[n, k, l, A, A', mu], exact."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.chart.dim
        out = np.zeros((pts.shape[0], n, n, 2, 2, n))
        for a in range(2):
            for ap in range(2):
                for mu, field in self.forms[a][ap].comps.items():
                    for k in range(n):
                        for l in range(k, n):
                            orders = tuple(
                                (1 if c == k else 0) + (1 if c == l else 0)
                                for c in range(n)
                            )
                            values = field.differentiate(MultiIndex(orders)).evaluate(pts)
                            out[:, k, l, a, ap, mu[0]] = values
                            out[:, l, k, a, ap, mu[0]] = values
        return out

    def volume_form(self) -> FormField:
        """nu = e^{01'} ^ e^{10'} ^ e^{11'} ^ e^{00'} (orientation fix)."""
        return wedge(
            wedge(self.form(0, 1), self.form(1, 0)),
            wedge(self.form(1, 1), self.form(0, 0)),
        )

    def orientation_sign(self, points) -> int:
        """Sign of nu against the chart coordinate volume element."""
        top = self.volume_form().evaluate(points)
        component = top[(slice(None),) + tuple(range(self.chart.dim))]
        if np.any(component == 0.0):
            raise DegeneracyError("degenerate coframe (vanishing volume form)")
        signs = np.sign(component)
        if not np.all(signs == signs[0]):
            raise DegeneracyError("orientation flips across the sample set")
        return int(signs[0])

    def sigma_fields(self):
        """Sigma^{A'B'} and Sigma^{AB} as exact form fields.

        Same normalization as :func:`nullkahler.spinors.sigma_basis`:
        Sigma^{A'B'} = 1/2 eps_{AB} e^{AA'} ^ e^{BB'}.
        """
        eps = ((0.0, 1.0), (-1.0, 0.0))
        primed, unprimed = [], []
        for (i, j) in SYM_PAIRS:
            acc_p = FormField.zero(self.chart, 2)
            acc_u = FormField.zero(self.chart, 2)
            for a in range(2):
                for b in range(2):
                    if eps[a][b]:
                        acc_p = acc_p + wedge(self.form(a, i), self.form(b, j)).scaled(0.5 * eps[a][b])
                        acc_u = acc_u + wedge(self.form(i, a), self.form(j, b)).scaled(0.5 * eps[a][b])
            primed.append(acc_p)
            unprimed.append(acc_u)
        return primed, unprimed

    def dual_vectors(self, points) -> np.ndarray:
        """Frame vectors D[n, A, A', mu] with e^{BB'}(D_{AA'}) = delta."""
        e = self.evaluate(points)
        mat = e.reshape(e.shape[0], 4, 4)  # rows 00',01',10',11'
        det = np.linalg.det(mat)
        if np.any(np.abs(det) < DEGENERACY_TOL):
            raise DegeneracyError("degenerate coframe")
        dual = np.linalg.inv(mat)  # columns are the dual vectors
        return np.transpose(dual, (0, 2, 1)).reshape(e.shape[0], 2, 2, -1)


def metric_from_coframe(e: CoFrame) -> MetricField:
    """g = 2(e^{00'} e^{11'} - e^{10'} e^{01'}), symmetrized products."""
    chart = e.chart
    n = chart.dim
    zero = _zero_field(chart)
    comps = [[zero for _ in range(n)] for _ in range(n)]
    e00, e11 = e.form(0, 0), e.form(1, 1)
    e10, e01 = e.form(1, 0), e.form(0, 1)
    for i in range(n):
        for j in range(i, n):
            acc = (
                e00.component((i,)) * e11.component((j,))
                + e00.component((j,)) * e11.component((i,))
                - e10.component((i,)) * e01.component((j,))
                - e10.component((j,)) * e01.component((i,))
            )
            comps[i][j] = acc
            comps[j][i] = acc
    return MetricField(chart, comps)


# --- constructors ------------------------------------------------------------

def _theta_blocks(theta: ExprField):
    txx = theta.deriv(x=2)
    tyy = theta.deriv(y=2)
    txy = theta.deriv(x=1, y=1)
    return txx, tyy, txy


def nk_metric(theta: ExprField) -> MetricField:
    """g = dw dx + dz dy - Txx dz^2 - Tyy dw^2 + 2 Txy dw dz."""
    chart = theta.chart
    if chart.coords != ("w", "z", "x", "y"):
        raise DomainError("nk metric expects the chart (w, z, x, y)")
    txx, tyy, txy = _theta_blocks(theta)
    half = ExprField.constant(0.5, chart)
    zero = _zero_field(chart)
    w, z, x, y = 0, 1, 2, 3
    comps = [[zero for _ in range(4)] for _ in range(4)]
    comps[w][x] = comps[x][w] = half
    comps[z][y] = comps[y][z] = half
    comps[w][w] = -tyy
    comps[z][z] = -txx
    comps[w][z] = comps[z][w] = txy
    metric = MetricField(chart, comps)
    metric.orientation = 1
    return metric


def nk_coframe(theta: ExprField) -> CoFrame:
    """Null tetrad whose induced metric reproduces nk_metric exactly.

    e^{00'} = dw, e^{10'} = dz,
    e^{01'} = -(dy + Txy dw - Txx dz)/2,
    e^{11'} =  (dx - Tyy dw + Txy dz)/2.
    Sigma^{0'0'} = e^{00'} ^ e^{10'} = dw ^ dz.
    """
    chart = theta.chart
    if chart.coords != ("w", "z", "x", "y"):
        raise DomainError("nk coframe expects the chart (w, z, x, y)")
    txx, tyy, txy = _theta_blocks(theta)
    one = ExprField.constant(1.0, chart)
    zero = _zero_field(chart)
    w, z, x, y = 0, 1, 2, 3

    def one_form(entries):
        comps = {}
        for axis, field in entries.items():
            comps[(axis,)] = field
        return FormField(chart, 1, comps)

    e00 = one_form({w: one})
    e10 = one_form({z: one})
    e01 = one_form({y: one * -0.5, w: txy * -0.5, z: txx * 0.5})
    e11 = one_form({x: one * 0.5, w: tyy * -0.5, z: txy * 0.5})
    return CoFrame(chart, [[e00, e01], [e10, e11]])


DKP_CHART_COORDS = ("x", "y", "t", "z")


def _require_dkp_chart(field: ExprField):
    if field.chart.coords != ("x", "y", "t"):
        raise DomainError("dkp potentials live on the chart (x, y, t)")


def _check_nonvanishing(field: ExprField, box: Box, what: str):
    if box.dim > field.chart.dim:
        box = Box(box.bounds[: field.chart.dim])
    plan = SamplePlan(box, count=60, seed=11)
    values = field.evaluate(plan.points())
    crosses_zero = values.min() < 0.0 < values.max()
    if crosses_zero or np.min(np.abs(values)) < 1e-6:
        raise DegeneracyError(f"{what} vanishes on the declared domain")


def dkp_metric(h_pot: ExprField, w_pot: ExprField, box: Box = None) -> MetricField:
    """g = Wx (dy^2 - 4 dx dt - 4 Hx dt^2) - Wx^{-1} (dz - Wx dy - 2 Wy dt)^2.

    Chart (x, y, t, z); Wx must be bounded away from zero on the domain
    box (checked on a deterministic sample when a box is supplied).
    """
    _require_dkp_chart(h_pot)
    _require_dkp_chart(w_pot)
    hx = h_pot.deriv(x=1)
    wx = w_pot.deriv(x=1)
    wy = w_pot.deriv(y=1)
    if box is not None:
        _check_nonvanishing(wx, box, "W_x")
    chart4 = Chart(DKP_CHART_COORDS, h_pot.chart.excluded)
    hx4, wx4, wy4 = (f.on_chart(chart4) for f in (hx, wx, wy))
    zero = _zero_field(chart4)
    x, y, t, z = 0, 1, 2, 3
    comps = [[zero for _ in range(4)] for _ in range(4)]
    comps[x][t] = comps[t][x] = -2.0 * wx4
    comps[y][z] = comps[z][y] = ExprField.constant(1.0, chart4)
    comps[y][t] = comps[t][y] = -2.0 * wy4
    comps[z][z] = -1.0 / wx4
    comps[z][t] = comps[t][z] = 2.0 * wy4 / wx4
    comps[t][t] = -4.0 * (wx4 * hx4) - 4.0 * (wy4 * wy4) / wx4
    metric = MetricField(chart4, comps)
    metric.orientation = -1  # induced by the dkp coframe volume form
    return metric


def dkp_coframe(h_pot: ExprField, w_pot: ExprField, box: Box = None) -> CoFrame:
    """Null tetrad for the dkp metric, g = 2(e^{00'}e^{11'} - e^{10'}e^{01'}).

    e^{00'} = -2 Wx dt,
    e^{10'} = (dz - 2 Wy dt) / (2 Wx),
    e^{01'} = dz - 2 Wx dy - 2 Wy dt + z e^{00'},
    e^{11'} = dx + Hx dt + z e^{10'}.

    The Wy term of e^{01'} multiplies dt and the Hx term of e^{11'}
    multiplies dt: this is the unique choice (in this triangular shape)
    reproducing the metric, and it also matches the closed-form
    Sigma^{0'1'} and Sigma^{1'1'} expressions used by the dkp pipeline.
    """
    _require_dkp_chart(h_pot)
    _require_dkp_chart(w_pot)
    hx = h_pot.deriv(x=1)
    wx = w_pot.deriv(x=1)
    wy = w_pot.deriv(y=1)
    if box is not None:
        _check_nonvanishing(wx, box, "W_x")
    chart4 = Chart(DKP_CHART_COORDS, h_pot.chart.excluded)
    hx4, wx4, wy4 = (f.on_chart(chart4) for f in (hx, wx, wy))
    zc = ExprField.from_text("z", chart4)
    one = ExprField.constant(1.0, chart4)
    x, y, t, z = 0, 1, 2, 3

    e00 = FormField(chart4, 1, {(t,): -2.0 * wx4})
    e10 = FormField(chart4, 1, {(z,): 0.5 / wx4, (t,): -1.0 * wy4 / wx4})
    e01 = FormField(chart4, 1, {
        (z,): one,
        (y,): -2.0 * wx4,
        (t,): -2.0 * wy4 + zc * (-2.0 * wx4),
    })
    e11 = FormField(chart4, 1, {
        (x,): one,
        (t,): hx4 + zc * (-1.0 * wy4 / wx4),
        (z,): zc * (0.5 / wx4),
    })
    return CoFrame(chart4, [[e00, e01], [e10, e11]])


def sigma_basis_values(coframe: CoFrame, points):
    """(sigma_primed, sigma_unprimed) value arrays from a coframe."""
    return sigma_basis(coframe.evaluate(points))
