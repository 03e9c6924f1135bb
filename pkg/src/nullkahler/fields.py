"""Scalar fields on coordinate charts with derivatives up to fourth order.

Two backends share one interface: a closed-form backend that
differentiates expression trees exactly, and a sampled-grid backend that
applies fourth-order central stencils.  Either can serve as an oracle for
the other; the test suite pins their agreement on polynomial fixtures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expressions import (
    EvaluationError,
    Expr,
    ExpressionError,
    as_expr,
    parse,
)

#: half-width of the exclusion band around a declared singular locus
EXCLUDED_BAND_HALF_WIDTH = 0.05

#: weights of the 4th-order central first-derivative stencil, offsets -2..2
_STENCIL = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0

MAX_DERIVATIVE_ORDER = 4


class DomainError(ValueError):
    """Point outside the declared chart domain or inside an excluded band."""


class OrderOverflowError(ValueError):
    """Derivative request beyond total order four."""


class BoundaryError(ValueError):
    """Sampled-backend evaluation too close to the grid boundary."""


@dataclass(frozen=True)
class ExcludedBand:
    """Open band |coord - center| < half_width removed from the domain."""

    coord: str
    center: float
    half_width: float = EXCLUDED_BAND_HALF_WIDTH


@dataclass(frozen=True)
class Chart:
    """Ordered coordinate names plus declared singular loci."""

    coords: tuple
    excluded: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "excluded", tuple(self.excluded))

    @property
    def dim(self):
        return len(self.coords)

    def axis(self, name: str) -> int:
        try:
            return self.coords.index(name)
        except ValueError:
            raise DomainError(f"{name!r} is not a coordinate of {self.coords}") from None

    def check_domain(self, points: np.ndarray) -> None:
        for band in self.excluded:
            values = points[..., self.axis(band.coord)]
            if np.any(np.abs(values - band.center) < band.half_width):
                raise DomainError(
                    f"evaluation inside excluded band {band.coord} = {band.center}"
                )


@dataclass(frozen=True)
class MultiIndex:
    """Per-coordinate derivative orders, total order at most four."""

    orders: tuple

    def __post_init__(self):
        object.__setattr__(self, "orders", tuple(int(k) for k in self.orders))
        if any(k < 0 for k in self.orders):
            raise ValueError("derivative orders must be non-negative")
        if self.total > MAX_DERIVATIVE_ORDER:
            raise OrderOverflowError(
                f"total derivative order {self.total} exceeds {MAX_DERIVATIVE_ORDER}"
            )

    @property
    def total(self):
        return sum(self.orders)

    @classmethod
    def of(cls, chart: Chart, **orders) -> "MultiIndex":
        unknown = set(orders) - set(chart.coords)
        if unknown:
            raise DomainError(f"unknown coordinates {sorted(unknown)}")
        return cls(tuple(orders.get(name, 0) for name in chart.coords))


def _as_points(points, dim):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        if pts.shape[0] != dim:
            raise DomainError(f"expected a point of dimension {dim}")
        return pts[None, :], True
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise DomainError(f"expected points of shape (n, {dim})")
    return pts, False


class ScalarField:
    """Common field interface: ``evaluate`` and ``differentiate``."""

    chart: Chart

    def evaluate(self, points):
        raise NotImplementedError

    def differentiate(self, idx: MultiIndex) -> "ScalarField":
        raise NotImplementedError

    def deriv(self, **orders) -> "ScalarField":
        return self.differentiate(MultiIndex.of(self.chart, **orders))

    def __call__(self, points):
        return self.evaluate(points)


class ExprField(ScalarField):
    """Closed-form backend: exact differentiation of an expression tree."""

    backend = "closed-form"

    def __init__(self, expr, chart: Chart, params=None):
        self.expr = as_expr(expr)
        self.chart = chart
        self.params = dict(params or {})
        free = self.expr.variables() - set(chart.coords) - set(self.params)
        if free:
            raise ExpressionError(f"unbound variables {sorted(free)}")

    @classmethod
    def from_text(cls, text: str, chart: Chart, params=None) -> "ExprField":
        params = dict(params or {})
        expr = parse(text, tuple(chart.coords) + tuple(params))
        return cls(expr, chart, params)

    @classmethod
    def constant(cls, value, chart: Chart) -> "ExprField":
        return cls(as_expr(value), chart)

    def on_chart(self, chart: Chart) -> "ExprField":
        """The same expression viewed on a larger chart."""
        return ExprField(self.expr, chart, self.params)

    def evaluate(self, points):
        pts, single = _as_points(points, self.chart.dim)
        self.chart.check_domain(pts)
        env = {name: pts[:, k] for k, name in enumerate(self.chart.coords)}
        env.update(self.params)
        values = self.expr.evaluate(env)
        values = np.broadcast_to(np.asarray(values, dtype=float), (pts.shape[0],))
        if not np.all(np.isfinite(values)):
            raise EvaluationError("non-finite field value")
        return float(values[0]) if single else np.array(values)

    def differentiate(self, idx: MultiIndex) -> "ExprField":
        if len(idx.orders) != self.chart.dim:
            raise DomainError("multi-index does not match chart dimension")
        expr = self.expr
        for name, order in zip(self.chart.coords, idx.orders):
            for _ in range(order):
                expr = expr.diff(name)
        return ExprField(expr, self.chart, self.params)

    # Field arithmetic builds new trees; handy for residual operators.
    def _binary(self, other, op):
        if isinstance(other, ExprField):
            if other.chart != self.chart:
                raise DomainError("field charts differ")
            merged = {**self.params, **other.params}
            return ExprField(op(self.expr, other.expr), self.chart, merged)
        return ExprField(op(self.expr, as_expr(other)), self.chart, self.params)

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, lambda a, b: a / b)

    def __rtruediv__(self, other):
        return self._binary(other, lambda a, b: b / a)

    def __neg__(self):
        return ExprField(-self.expr, self.chart, self.params)


#: minimum nodes per axis for the sampled backend (stencil support)
MIN_SAMPLED_NODES = 9


@dataclass(frozen=True)
class GridSpec:
    """Per-axis (min, max, points)."""

    axes: tuple  # of (lo, hi, n)

    def __post_init__(self):
        axes = tuple((float(lo), float(hi), int(n)) for lo, hi, n in self.axes)
        object.__setattr__(self, "axes", axes)
        for lo, hi, n in axes:
            if n < 2 or not hi > lo:
                raise ValueError(f"degenerate grid axis ({lo}, {hi}, {n})")

    @property
    def dim(self):
        return len(self.axes)

    @property
    def shape(self):
        return tuple(n for _, _, n in self.axes)

    def coordinates(self):
        return [np.linspace(lo, hi, n) for lo, hi, n in self.axes]

    def spacing(self):
        return [(hi - lo) / (n - 1) for lo, hi, n in self.axes]

    def meshpoints(self) -> np.ndarray:
        mesh = np.meshgrid(*self.coordinates(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


class SampledField(ScalarField):
    """Grid-sampled backend with 4th-order central-difference stencils.

    Mixed partials are taken by repeated first-derivative application;
    each application widens the invalid boundary margin by two cells.
    Off-node evaluation uses separable 4-point Lagrange interpolation.
    """

    backend = "sampled"

    def __init__(self, grid: GridSpec, values: np.ndarray, chart: Chart, margin=None):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"values shape {values.shape} != grid {grid.shape}")
        if grid.dim != chart.dim:
            raise ValueError("grid dimension does not match chart")
        if min(grid.shape) < MIN_SAMPLED_NODES:
            raise ValueError(
                f"sampled backend needs >= {MIN_SAMPLED_NODES} nodes per axis"
            )
        self.grid = grid
        self.values = values
        self.chart = chart
        self.margin = tuple(margin or (0,) * grid.dim)
        self._axes = grid.coordinates()
        self._spacing = grid.spacing()

    def differentiate(self, idx: MultiIndex) -> "SampledField":
        if len(idx.orders) != self.chart.dim:
            raise DomainError("multi-index does not match chart dimension")
        values = self.values
        margin = list(self.margin)
        for axis, order in enumerate(idx.orders):
            for _ in range(order):
                values = self._apply_stencil(values, axis)
                margin[axis] += 2
        if any(2 * m >= n for m, n in zip(margin, self.grid.shape)):
            raise BoundaryError("stencil margin consumed the whole grid")
        return SampledField(self.grid, values, self.chart, tuple(margin))

    def _apply_stencil(self, values, axis):
        h = self._spacing[axis]
        moved = np.moveaxis(values, axis, 0)
        out = np.zeros_like(moved)
        # interior-only sliced accumulation; the two-cell rim joins the margin
        out[2:-2] = (
            _STENCIL[0] * moved[:-4]
            + _STENCIL[1] * moved[1:-3]
            + _STENCIL[3] * moved[3:-1]
            + _STENCIL[4] * moved[4:]
        ) / h
        return np.moveaxis(out, 0, axis)

    def _interp_weights(self, x, axis):
        """Indices and 4-point Lagrange weights along one axis."""
        nodes = self._axes[axis]
        h = self._spacing[axis]
        n = len(nodes)
        lo = self.margin[axis]
        hi = n - 1 - self.margin[axis]
        if np.any(x < nodes[lo] - 1e-12) or np.any(x > nodes[hi] + 1e-12):
            raise BoundaryError(
                f"evaluation within stencil margin on axis {self.chart.coords[axis]}"
            )
        t = (x - nodes[0]) / h
        nearest = np.rint(t)
        on_node = np.abs(t - nearest) < 1e-9
        base = np.clip(np.floor(t).astype(int), lo, hi - 1)
        # 4-point stencil [base-1, base+2], clipped to the valid window
        start = np.clip(base - 1, lo, max(hi - 3, lo))
        idx = start[:, None] + np.arange(4)[None, :]
        xs = nodes[idx]
        w = np.ones((x.shape[0], 4))
        for i in range(4):
            for j in range(4):
                if i == j:
                    continue
                w[:, i] *= (x[:, None][:, 0] - xs[:, j]) / (xs[:, i] - xs[:, j])
        # snap exactly onto nodes: kills interpolation error at grid points
        snap = on_node & (np.abs(nearest - t) < 1e-9)
        if np.any(snap):
            k = nearest.astype(int)
            inside = (k[:, None] == idx)
            w[snap] = np.where(inside[snap], 1.0, 0.0)
        return idx, w

    def evaluate(self, points):
        pts, single = _as_points(points, self.chart.dim)
        self.chart.check_domain(pts)
        idx_w = [self._interp_weights(pts[:, a], a) for a in range(self.chart.dim)]
        npts = pts.shape[0]
        result = np.zeros(npts)
        # tensor-product accumulation over the 4^d interpolation nodes
        from itertools import product

        for combo in product(range(4), repeat=self.chart.dim):
            weights = np.ones(npts)
            gather = []
            for axis, pick in enumerate(combo):
                idx, w = idx_w[axis]
                weights *= w[:, pick]
                gather.append(idx[:, pick])
            result += weights * self.values[tuple(gather)]
        if not np.all(np.isfinite(result)):
            raise EvaluationError("non-finite sampled value")
        return float(result[0]) if single else result


def sample_to_grid(field: ScalarField, grid: GridSpec) -> SampledField:
    """Sample any field onto a grid; node values match evaluation exactly."""
    if grid.dim != field.chart.dim:
        raise ValueError("grid dimension does not match field chart")
    values = field.evaluate(grid.meshpoints()).reshape(grid.shape)
    margin = getattr(field, "margin", (0,) * grid.dim)
    return SampledField(grid, values, field.chart, margin)


# Functional forms of the field operations.

def differentiate(field: ScalarField, idx: MultiIndex) -> ScalarField:
    return field.differentiate(idx)


def evaluate(field: ScalarField, point):
    return field.evaluate(point)


# --- CSV serialization of sampled grids --------------------------------------

def grid_to_csv(field: SampledField, path) -> None:
    """Header row with axis specs, then row-major values (%.17g)."""
    spec = ";".join(
        f"{name},{lo:.17g},{hi:.17g},{n}"
        for name, (lo, hi, n) in zip(field.chart.coords, field.grid.axes)
    )
    flat = field.values.reshape(-1, field.grid.shape[-1])
    with open(path, "w") as handle:
        handle.write(f"# axes: {spec}\n")
        for row in flat:
            handle.write(",".join(f"{v:.17g}" for v in row) + "\n")


def grid_from_csv(path, excluded=()) -> SampledField:
    with open(path) as handle:
        header = handle.readline().strip()
        if not header.startswith("# axes:"):
            raise ValueError("missing '# axes:' header")
        axes, names = [], []
        for part in header[len("# axes:"):].strip().split(";"):
            name, lo, hi, n = part.split(",")
            names.append(name)
            axes.append((float(lo), float(hi), int(n)))
        rows = [
            [float(v) for v in line.split(",")]
            for line in handle
            if line.strip()
        ]
    grid = GridSpec(tuple(axes))
    values = np.array(rows).reshape(grid.shape)
    return SampledField(grid, values, Chart(tuple(names), tuple(excluded)))
