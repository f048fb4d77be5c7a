"""Grids, sampled fields, conformal metrics and curvature on the truncated cylinder.

The metric is g = e^{2u}(dx^2 + dtheta^2) with a rotationally invariant
conformal factor u(x), so every field lives on a uniform 1D grid in the
cylinder coordinate x. Gauss curvature reduces to K = -e^{-2u} u_xx.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Uniform grid with n intervals (n+1 nodes) on [x_min, x_max]."""

    x_min: float
    x_max: float
    n: int
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.x_min < self.x_max):
            raise ValueError(f"need x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if self.n < 8:
            raise ValueError(f"need at least 8 intervals, got n={self.n}")
        xs = self.x_min + self.dx * np.arange(self.n + 1)
        object.__setattr__(self, "nodes", _readonly(xs))

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    def same_layout(self, other: "Grid1D") -> bool:
        return (
            self.n == other.n
            and self.x_min == other.x_min
            and self.x_max == other.x_max
        )

    def index_of(self, x: float, tol: float = 1e-9) -> int:
        """Node index of x, requiring x to sit on a node within tol*dx."""
        s = (x - self.x_min) / self.dx
        i = int(round(s))
        if not (0 <= i <= self.n) or abs(s - i) > tol:
            raise ValueError(f"x={x} is not a grid node")
        return i


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Finite samples of a function at every node of a grid."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        v = _readonly(self.values)
        if v.shape != (self.grid.n + 1,):
            raise ValueError(
                f"field has {v.shape[0]} samples, grid wants {self.grid.n + 1}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class ConformalMetric:
    """Metric e^{2u}(dx^2 + dtheta^2) represented by its conformal factor u."""

    u: ScalarField

    @property
    def grid(self) -> Grid1D:
        return self.u.grid

    @property
    def values(self) -> np.ndarray:
        return self.u.values


@dataclass(frozen=True, eq=False)
class CurvatureField:
    """Gauss curvature samples; trustworthy on interior nodes only.

    The centered second-difference stencil leaves no value at the two end
    nodes; those entries are padded with the nearest interior value and
    valid_range = (1, n-1) marks the usable index span (inclusive).
    """

    K: ScalarField
    valid_range: tuple[int, int]

    @property
    def grid(self) -> Grid1D:
        return self.K.grid

    def window_values(self, x_a: float, x_b: float) -> np.ndarray:
        """Curvature samples at nodes inside [x_a, x_b] ∩ valid range."""
        g = self.grid
        lo, hi = self.valid_range
        xs = g.nodes
        eps = 1e-9 * g.dx
        mask = (xs >= x_a - eps) & (xs <= x_b + eps)
        mask[: lo] = False
        mask[hi + 1 :] = False
        vals = self.K.values[mask]
        if vals.size == 0:
            raise ValueError(f"window [{x_a}, {x_b}] contains no valid curvature node")
        return vals


@dataclass(frozen=True)
class BreatherParams:
    """Scale lambda > 1 and the cylinder-shift a of the pullback diffeomorphism."""

    lam: float
    shift: float = 1.0

    def __post_init__(self):
        if not (self.lam > 1.0 and math.isfinite(self.lam)):
            raise ValueError(f"breather scale must be finite and > 1, got {self.lam}")
        if not math.isfinite(self.shift):
            raise ValueError("shift must be finite")


# --- closed-form initial data and model metrics ---


def breather_initial(params: BreatherParams, grid: Grid1D) -> ConformalMetric:
    """u(x) = (log(lam)/2) x + sin(2 pi x).

    Shifting x by one adds exactly log(lam)/2, so the pullback by the unit
    cylinder shift rescales the metric by lam.
    """
    x = grid.nodes
    u = 0.5 * math.log(params.lam) * x + np.sin(2.0 * math.pi * x)
    return ConformalMetric(ScalarField(grid, u))


def cone_initial(alpha: float, grid: Grid1D) -> ConformalMetric:
    """Flat cone u(x) = alpha * x; alpha = 1 is the punctured Euclidean plane."""
    if not math.isfinite(alpha):
        raise ValueError("alpha must be finite")
    return ConformalMetric(ScalarField(grid, alpha * grid.nodes))


def cusp_model(t: float, grid: Grid1D) -> ConformalMetric:
    """Hyperbolic-cusp representative u(x) = -log|x| + log(2t)/2 for x < 0.

    This family solves u_t = e^{-2u} u_xx exactly and has constant Gauss
    curvature -1/(2t); the grid must stay at least 2*dx away from x = 0.
    """
    if not (t > 0.0 and math.isfinite(t)):
        raise ValueError(f"cusp model needs t > 0, got {t}")
    if grid.x_max >= -2.0 * grid.dx:
        raise ValueError(
            f"cusp model needs all nodes at x <= -2*dx; grid reaches {grid.x_max}"
        )
    u = -np.log(-grid.nodes) + 0.5 * math.log(2.0 * t)
    return ConformalMetric(ScalarField(grid, u))


# --- differential / integral operators ---


def gauss_curvature(m: ConformalMetric) -> CurvatureField:
    """K_i = -e^{-2 u_i} (u_{i+1} - 2 u_i + u_{i-1}) / dx^2 on interior nodes."""
    g = m.grid
    u = m.values
    dx2 = g.dx * g.dx
    K = np.empty_like(u)
    K[1:-1] = -np.exp(-2.0 * u[1:-1]) * (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dx2
    K[0] = K[1]
    K[-1] = K[-2]
    return CurvatureField(ScalarField(g, K), valid_range=(1, g.n - 1))


def interpolate(f: ScalarField, x: float) -> float:
    """Cubic 4-point interpolation of f at x.

    Exact on cubic polynomials, O(dx^4) on smooth fields; x must keep one
    node of clearance from each end so the stencil fits.
    """
    return float(interpolate_many(f, np.asarray([x], dtype=float))[0])


def interpolate_many(f: ScalarField, xs: np.ndarray) -> np.ndarray:
    """Vectorized cubic interpolation at every x in xs."""
    g = f.grid
    xs = np.asarray(xs, dtype=float)
    dx = g.dx
    eps = 1e-9 * dx
    if xs.size and (xs.min() < g.x_min + dx - eps or xs.max() > g.x_max - dx + eps):
        raise ValueError(
            f"interpolation points must stay in [{g.x_min + dx}, {g.x_max - dx}]"
        )
    s = (xs - g.x_min) / dx
    j = np.clip(np.floor(s).astype(int), 1, g.n - 2)
    th = s - j
    v = f.values
    # Lagrange weights for nodes at offsets -1, 0, 1, 2 from node j.
    w_m1 = -th * (th - 1.0) * (th - 2.0) / 6.0
    w_0 = (th + 1.0) * (th - 1.0) * (th - 2.0) / 2.0
    w_1 = -(th + 1.0) * th * (th - 2.0) / 2.0
    w_2 = (th + 1.0) * th * (th - 1.0) / 6.0
    return w_m1 * v[j - 1] + w_0 * v[j] + w_1 * v[j + 1] + w_2 * v[j + 2]


def shift_pullback(m: ConformalMetric, a: float) -> ConformalMetric:
    """Conformal factor of the metric pulled back by x -> x + a.

    The output grid is the largest subgrid on which x + a can be evaluated:
    exactly (index shift) when a is a multiple of dx, else through cubic
    interpolation with a one-node safety margin.
    """
    if not math.isfinite(a):
        raise ValueError("shift must be finite")
    g = m.grid
    dx = g.dx
    k = a / dx
    k_round = int(round(k))
    if abs(k - k_round) <= 1e-9:
        # Grid-aligned: pure index shift, no interpolation error.
        if abs(k_round) > g.n - 8:
            raise ValueError(f"shift a={a} leaves fewer than 9 nodes")
        if k_round >= 0:
            out = Grid1D(g.x_min, g.x_max - k_round * dx, g.n - k_round)
            vals = m.values[k_round:]
        else:
            out = Grid1D(g.x_min - k_round * dx, g.x_max, g.n + k_round)
            vals = m.values[: g.n + 1 + k_round]
        return ConformalMetric(ScalarField(out, vals))
    # General shift: keep nodes whose image stays in the interpolation range.
    lo_x = g.x_min + dx - a
    hi_x = g.x_max - dx - a
    i_lo = max(0, int(math.ceil((lo_x - g.x_min) / dx - 1e-9)))
    i_hi = min(g.n, int(math.floor((hi_x - g.x_min) / dx + 1e-9)))
    if i_hi - i_lo < 8:
        raise ValueError(f"shift a={a} leaves fewer than 9 interpolable nodes")
    out = Grid1D(g.nodes[i_lo], g.nodes[i_hi], i_hi - i_lo)
    vals = interpolate_many(m.u, out.nodes + a)
    return ConformalMetric(ScalarField(out, vals))


def volume(m: ConformalMetric, x_a: float, x_b: float) -> float:
    """Area 2 pi * integral of e^{2u} over [x_a, x_b] by trapezoidal quadrature.

    Partial end cells use linear interpolation of u at the cut points.
    """
    g = m.grid
    if not (g.x_min - 1e-12 <= x_a < x_b <= g.x_max + 1e-12):
        raise ValueError(f"[{x_a}, {x_b}] is degenerate or outside the grid")
    dx = g.dx
    w = np.exp(2.0 * m.values)

    def u_lin(x: float) -> float:
        s = min(max((x - g.x_min) / dx, 0.0), float(g.n))
        j = min(int(s), g.n - 1)
        th = s - j
        return (1.0 - th) * m.values[j] + th * m.values[j + 1]

    i_lo = int(math.ceil((x_a - g.x_min) / dx - 1e-12))
    i_hi = int(math.floor((x_b - g.x_min) / dx + 1e-12))
    total = 0.0
    if i_lo <= i_hi:
        if i_hi > i_lo:
            total += float(np.trapezoid(w[i_lo : i_hi + 1], dx=dx))
        xa_node = g.x_min + i_lo * dx
        xb_node = g.x_min + i_hi * dx
        if xa_node - x_a > 1e-12 * dx:
            total += 0.5 * (math.exp(2.0 * u_lin(x_a)) + w[i_lo]) * (xa_node - x_a)
        if x_b - xb_node > 1e-12 * dx:
            total += 0.5 * (w[i_hi] + math.exp(2.0 * u_lin(x_b))) * (x_b - xb_node)
    else:
        # Both endpoints inside one cell.
        total += 0.5 * (math.exp(2.0 * u_lin(x_a)) + math.exp(2.0 * u_lin(x_b))) * (
            x_b - x_a
        )
    return 2.0 * math.pi * total
