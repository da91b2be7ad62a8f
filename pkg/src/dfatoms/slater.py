r"""Radial screening functions and discrete Coulomb interaction kernels.

Y^k(f; r) = r * int f(s) min(r,s)^k / max(r,s)^(k+1) ds is the multipole-k
screening function: Y^k(f; r)/r is the potential generated by the radial
density f.  It splits into two cumulative integrals,

    Y^k(f; r) = r^(-k) A(r) + r^(k+1) B(r),
    A(r) = int_{r_min}^{r} f s^k ds,     B(r) = int_r^{r_max} f s^(-k-1) ds,

both evaluated in t = ln r with the Gregory-corrected rules from grids.

The same machinery, applied to unit vectors and symmetrized, yields a dense
symmetric kernel matrix C_k with f^T C_k g ~ intint f(r) v_k(r,s) g(s), which
every two-body energy and mean-field operator in the package shares.  Using
a single discrete kernel is what makes the energy/operator consistency
identities hold to roundoff rather than quadrature accuracy.
"""

from __future__ import annotations

import numpy as np

from .grids import RadialGrid, cumulative_backward, cumulative_forward, cumulative_matrix

__all__ = ["slater_y", "coulomb_kernel", "clear_kernel_cache"]

_KERNEL_CACHE: dict[tuple, np.ndarray] = {}


def slater_y(k: int, f: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Screening function samples Y^k(f; r) on the grid nodes.

    Y^0(f; r)/r tends to (int f)/r at large r when f decays (Gauss law);
    accuracy on decaying densities is ~1e-10 for M >= 1000.
    """
    if k < 0:
        raise ValueError(f"multipole order must be >= 0, got {k}")
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.size,):
        raise ValueError("f must be sampled on the grid nodes")
    r = grid.nodes
    dt = grid.step
    # integrands in t: f s^k ds = f s^(k+1) dt ; f s^(-k-1) ds = f s^(-k) dt
    A = cumulative_forward(f * r ** (k + 1.0), dt)
    B = cumulative_backward(f * r ** (-float(k)), dt)
    return r ** (-float(k)) * A + r ** (k + 1.0) * B


def coulomb_kernel(grid: RadialGrid, k: int) -> np.ndarray:
    """Symmetric M x M multipole-k interaction kernel on the grid nodes.

    C_k = (W Q_k + Q_k^T W)/2 with (Q_k g)_i = Y^k(g; r_i)/r_i built from the
    plain trapezoidal cumulatives in t; with the t-trapezoid node weights W
    the product W Q_k is symmetric already, so the kernel's pointwise action
    (the direct potential) stays smooth up to the grid ends.  Cached per
    (grid signature, k).
    """
    key = (grid.size, grid.r_min, grid.r_max, k)
    hit = _KERNEL_CACHE.get(key)
    if hit is not None:
        return hit
    r = grid.nodes
    M = grid.size
    L = cumulative_matrix(M, grid.step, corrections=False)
    rk1 = r ** (k + 1.0)
    rk = r ** float(k)
    A = (1.0 / rk1)[:, None] * L * rk1[None, :]
    Lback = L[-1:, :] - L
    B = rk[:, None] * Lback * (1.0 / rk)[None, :]
    Q = A + B
    WQ = grid.node_weights[:, None] * Q
    C = 0.5 * (WQ + WQ.T)
    _KERNEL_CACHE[key] = C
    return C


def clear_kernel_cache() -> None:
    _KERNEL_CACHE.clear()
