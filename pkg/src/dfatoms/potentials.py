"""Nuclear charge models and their electrostatic potentials."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import RadialGrid

__all__ = ["NuclearModel", "nuclear_potential", "nuclear_potential_at"]


@dataclass(frozen=True)
class NuclearModel:
    """Nuclear charge distribution.

    shape ``"point"`` is a point charge Z; ``"uniform_sphere"`` spreads Z
    uniformly over a ball of the given radius (Bohr).
    """

    Z: float
    shape: str = "point"
    radius: float | None = None

    def __post_init__(self):
        if self.Z <= 0:
            raise ValueError(f"nuclear charge must be positive, got Z={self.Z}")
        if self.shape not in ("point", "uniform_sphere"):
            raise ValueError(f"unknown nuclear shape {self.shape!r}")
        if self.shape == "uniform_sphere":
            if self.radius is None or self.radius <= 0:
                raise ValueError("uniform_sphere needs a positive radius")


def nuclear_potential_at(model: NuclearModel, r: np.ndarray) -> np.ndarray:
    """Potential V(r) in Hartree at arbitrary radii r > 0.

    point: V = -Z/r.  uniform_sphere of radius R:
    V = -(Z/2R)(3 - r^2/R^2) inside, -Z/r outside; continuous at R.
    """
    r = np.asarray(r, dtype=float)
    if model.shape == "point":
        return -model.Z / r
    R = model.radius
    inside = r <= R
    v = np.empty_like(r)
    v[inside] = -(model.Z / (2 * R)) * (3.0 - (r[inside] / R) ** 2)
    v[~inside] = -model.Z / r[~inside]
    return v


def nuclear_potential(model: NuclearModel, grid: RadialGrid) -> np.ndarray:
    """Potential samples on the grid nodes."""
    return nuclear_potential_at(model, grid.nodes)
