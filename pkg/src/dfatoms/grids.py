r"""Exponential radial grids, quadrature weights, and high-order cumulative
integration.

The grid is uniform in t = ln r, which is the natural coordinate for atomic
radial problems: it resolves the nuclear region at small r and the density
tail at large r with the same relative spacing.  Three quadrature layers live
here:

* ``RadialGrid.weights`` -- interpolatory node weights, exact for piecewise
  cubics (hence exact for constants, which pins ``sum(weights)`` to
  ``r_max - r_min`` up to roundoff).
* node/midpoint trapezoidal weights in t (``node_weights``/``mid_weights``),
  used internally by the channel operators, where the staggered derivative
  pair needs the plain t-metric.
* Gregory-corrected (order 6) cumulative integrals in t, used by the
  screening functions, where absolute accuracies of 1e-8 and better are
  required on grids with M >= 1000.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

__all__ = [
    "RadialGrid",
    "build_grid",
    "cumulative_forward",
    "cumulative_backward",
    "cumulative_matrix",
    "midpoint_to_node_matrix",
    "interpolate_to_midpoints",
    "richardson",
]

# Gregory end-correction coefficients of orders h^2 .. h^6.
_GREGORY = np.array([1 / 12, 1 / 24, 19 / 720, 3 / 160, 863 / 60480])
_GREGORY_MIN_POINTS = 12


@dataclass(frozen=True)
class RadialGrid:
    """Strictly increasing radial nodes with quadrature weights.

    Attributes
    ----------
    nodes : ndarray
        Radii in Bohr, exponentially spaced, all > 0.
    weights : ndarray
        Interpolatory quadrature weights (Bohr); exact for piecewise cubics.
    kind : str
        Spacing tag; only ``"exponential"`` is supported.
    r_min, r_max : float
        First and last node.
    size : int
        Number of nodes M.
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    r_min: float
    r_max: float
    size: int
    # derived t-space quantities, filled by build_grid
    step: float = 0.0
    midpoints: np.ndarray = field(default=None, repr=False)
    node_weights: np.ndarray = field(default=None, repr=False)
    mid_weights: np.ndarray = field(default=None, repr=False)
    spacings: np.ndarray = field(default=None, repr=False)

    def integrate(self, f: np.ndarray) -> float:
        """Quadrature of node samples ``f`` over [r_min, r_max]."""
        return float(self.weights @ f)

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """Node-weight inner product <f, g>."""
        return float(self.weights @ (f * g))


def _interpolatory_weights(r: np.ndarray) -> np.ndarray:
    """Node weights from integrating the local cubic through 4 consecutive
    nodes over each interval; stencils clamped at the ends.

    Exact for cubics on arbitrary strictly increasing nodes.  Polynomials are
    handled in interval-local coordinates to avoid cancellation at large r.
    """
    M = len(r)
    w = np.zeros(M)
    if M < 4:
        # trapezoid fallback for degenerate sizes (M >= 16 enforced upstream)
        h = np.diff(r)
        w[:-1] += h / 2
        w[1:] += h / 2
        return w
    for i in range(M - 1):
        s = min(max(i - 1, 0), M - 4)
        xs = r[s : s + 4] - r[i]
        b = r[i + 1] - r[i]
        for t in range(4):
            others = np.delete(xs, t)
            coeffs = np.poly(others) / np.prod(xs[t] - others)
            prim = np.polyint(coeffs)
            w[s + t] += np.polyval(prim, b) - np.polyval(prim, 0.0)
    return w


def build_grid(kind: str, r_min: float, r_max: float, size: int) -> RadialGrid:
    """Build an exponential radial grid with M = ``size`` nodes.

    nodes[i] = r_min * (r_max/r_min)**(i/(M-1)); uniform in t = ln r with
    step dt.  Midpoints are the geometric means of consecutive nodes (the
    t-midpoints); the last midpoint extrapolates one half-step beyond r_max
    and carries the ghost interval used by the staggered channel operators.

    Raises
    ------
    ValueError
        For non-positive r_min, r_max <= r_min, or M < 16.
    """
    if kind != "exponential":
        raise ValueError(f"unsupported grid kind {kind!r}")
    if not (0.0 < r_min < r_max):
        raise ValueError(f"need 0 < r_min < r_max, got r_min={r_min}, r_max={r_max}")
    if size < 16:
        raise ValueError(f"grid needs at least 16 nodes, got {size}")
    M = int(size)
    dt = np.log(r_max / r_min) / (M - 1)
    nodes = r_min * np.exp(dt * np.arange(M))
    nodes[-1] = r_max  # kill roundoff drift at the endpoint
    midpoints = nodes * np.exp(dt / 2)
    spacings = np.empty(M)
    spacings[:-1] = np.diff(nodes)
    spacings[-1] = nodes[-1] * (np.exp(dt) - 1.0)  # ghost interval
    node_w = dt * nodes.copy()
    node_w[0] /= 2
    node_w[-1] /= 2
    mid_w = dt * midpoints
    return RadialGrid(
        nodes=nodes,
        weights=_interpolatory_weights(nodes),
        kind="exponential",
        r_min=float(r_min),
        r_max=float(r_max),
        size=M,
        step=float(dt),
        midpoints=midpoints,
        node_weights=node_w,
        mid_weights=mid_w,
        spacings=spacings,
    )


def cumulative_forward(g: np.ndarray, dt: float) -> np.ndarray:
    """Cumulative integral I_j = int_{t_0}^{t_j} g dt on a uniform t-grid.

    Trapezoidal prefix sums plus Gregory end corrections of order dt^6 at
    both the fixed lower end and the moving upper end.  The first few
    prefixes (j < 6) stay trapezoidal; in all uses here the integrand is
    negligible there.
    """
    n = len(g)
    out = np.empty(n)
    out[0] = 0.0
    np.cumsum((g[1:] + g[:-1]) * 0.5, out=out[1:])
    out *= dt
    if n < _GREGORY_MIN_POINTS:
        return out
    corr = np.zeros(n)
    d = g[:8].copy()
    for k in range(1, 6):
        d = np.diff(d)
        fwd0 = d[0]
        back = np.diff(g, n=k)  # back[i] = nabla^k g at j = i + k
        term = np.zeros(n)
        term[k:] = back
        corr += _GREGORY[k - 1] * (term + ((-1) ** k) * fwd0)
    corr[:6] = 0.0
    return out - dt * corr


def cumulative_backward(g: np.ndarray, dt: float) -> np.ndarray:
    """Cumulative integral I_j = int_{t_j}^{t_max} g dt (see cumulative_forward)."""
    return cumulative_forward(g[::-1], dt)[::-1]


def cumulative_matrix(size: int, dt: float, corrections: bool = True) -> np.ndarray:
    """Matrix L with (L g)_j = cumulative_forward(g, dt)_j.

    With corrections=False this is the plain trapezoidal prefix matrix; that
    variant makes the weighted Coulomb kernel symmetric exactly and keeps its
    pointwise action smooth at the grid ends (the end corrections are
    quadrature-exact as a bilinear form but contaminate pointwise values on
    the last few rows).
    """
    M = size
    L = np.tril(np.ones((M, M)), -1) + 0.5 * np.eye(M)
    L[:, 0] -= 0.5
    L[0, :] = 0.0
    if corrections and M >= _GREGORY_MIN_POINTS:
        rows = np.arange(6, M)
        for k in range(1, 6):
            cf = _GREGORY[k - 1]
            for m in range(k + 1):
                L[rows, rows - m] -= cf * ((-1) ** m) * comb(k, m)
                L[6:, m] -= cf * ((-1) ** k) * ((-1) ** (k - m)) * comb(k, m)
    return L * dt


def midpoint_to_node_matrix(size: int) -> np.ndarray:
    """Interpolation of midpoint samples to nodes (2-point average in t).

    Row 0 extrapolates linearly; rows sum to one, so constants map to
    constants exactly.
    """
    M = size
    J = np.zeros((M, M))
    idx = np.arange(1, M)
    J[idx, idx - 1] = 0.5
    J[idx, idx] = 0.5
    J[0, 0] = 1.5
    J[0, 1] = -0.5
    return J


def interpolate_to_midpoints(f: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Resample node values onto the midpoints with 4-point Lagrange stencils
    in t (uniform spacing; weights -1/16, 9/16, 9/16, -1/16)."""
    M = grid.size
    out = np.empty(M)
    if M >= 4:
        out[1 : M - 2] = (
            -f[: M - 3] + 9 * f[1 : M - 2] + 9 * f[2 : M - 1] - f[3:M]
        ) / 16
        # one-sided cubic stencils at the ends (offsets -1/2 .. and beyond)
        c_first = np.array([5, 15, -5, 1]) / 16.0
        out[0] = c_first @ f[:4]
        c_last = np.array([1, -5, 15, 5]) / 16.0
        out[M - 2] = c_last @ f[M - 4 : M]
        c_ghost = np.array([-5, 21, -35, 35]) / 16.0
        out[M - 1] = c_ghost @ f[M - 4 : M]
    else:
        out[:-1] = 0.5 * (f[:-1] + f[1:])
        out[-1] = f[-1]
    return out


def richardson(values, orders=(2, 3)):
    """Eliminate the leading error orders from values on grids M, 2M, 4M, ...

    ``values[i]`` is the quantity computed with (M0 * 2**i) nodes and an
    error expansion in powers of 1/M starting at ``orders[0]``.  Returns the
    extrapolated value after eliminating len(values)-1 leading orders.
    """
    vals = [float(v) for v in values]
    ords = list(orders)
    if len(vals) - 1 > len(ords):
        raise ValueError("need an error order for each elimination step")
    for step in range(len(vals) - 1):
        p = ords[step]
        fac = 2.0**p
        vals = [(fac * vals[i + 1] - vals[i]) / (fac - 1.0) for i in range(len(vals) - 1)]
    return vals[0]
