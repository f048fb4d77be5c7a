"""Profile of the expanding soliton flowing from the flat punctured plane.

On the cylinder the flow from u0(x) = x is self-similar,

    u(x, t) = log(2t)/2 + W(xi),    xi = x - log(2t)/2,

with the profile ODE  (1 - W') = e^{-2W} W''  obtained by substitution.
W interpolates between the flat cone (W(xi) -> xi as xi -> +inf, no offset,
so that u(x, 0) = x) and the hyperbolic cusp (W(xi) ~ -log|xi| as
xi -> -inf, where the metric has curvature -1/(2t)).

The profile is computed once by shooting from the cusp-side asymptotics

    W(xi) = -log(-xi) - log(-xi)/(3 xi) + O(log|xi|/xi^2)

and translating in xi to remove the cone-side offset; the ODE is
autonomous, so the translate is again a solution. The result is cached as
a spline and served through `soliton_profile_value`, which falls back to
the asymptotic forms outside the tabulated range.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

_XI_LEFT = -80.0
_XI_RIGHT = 8.0
_SPLINE = None
_SHIFT = None


def _cusp_side_seed(xi: float) -> tuple[float, float]:
    L = math.log(-xi)
    w = -L - L / (3.0 * xi)
    dw = -1.0 / xi - (1.0 - L) / (3.0 * xi * xi)
    return w, dw


def _rhs(xi, y):
    w, p = y
    return [p, (1.0 - p) * math.exp(2.0 * w)]


def _build():
    global _SPLINE, _SHIFT
    w0, dw0 = _cusp_side_seed(_XI_LEFT)
    xs = np.linspace(_XI_LEFT, _XI_RIGHT, 8801)
    sol = solve_ivp(
        _rhs, (_XI_LEFT, _XI_RIGHT), [w0, dw0],
        method="LSODA", t_eval=xs, rtol=1e-11, atol=1e-13,
    )
    if not sol.success:
        raise RuntimeError(f"soliton profile integration failed: {sol.message}")
    w = sol.y[0]
    # Cone-side offset: W(xi) - xi tends to a constant; the profile we want
    # has no offset, so translate the argument by it.
    offset = float(w[-1] - xs[-1])
    _SPLINE = CubicSpline(xs, w)
    _SHIFT = offset


def soliton_profile_value(xi: float) -> float:
    """W(xi) for the offset-free expanding-soliton profile."""
    if _SPLINE is None:
        _build()
    # The computed branch satisfies Wt(z) - z -> offset; the offset-free
    # profile is W(xi) = Wt(xi - offset).
    z = xi - _SHIFT
    if z < _XI_LEFT + 1.0:
        w, _ = _cusp_side_seed(z)
        return w
    if z > _XI_RIGHT - 0.5:
        return float(xi)
    return float(_SPLINE(z))
