r"""Occupied-shell containers for the relativistic solvers.

A Shell is one occupied (n, kappa) level with its full degeneracy
w = 2|kappa| = 2j+1 (closed shell); the only exception is the one-electron
system, where a single shell with w = 1 is admitted and the two-body terms
cancel identically.  An ElectronicConfiguration is the orthonormal family of
occupied shells together with the problem data (Z, c, grid, nuclear model).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grids import RadialGrid, midpoint_to_node_matrix
from .potentials import NuclearModel

__all__ = ["Shell", "ElectronicConfiguration", "radial_density", "cross_density"]


@dataclass(frozen=True)
class Shell:
    """One occupied relativistic shell.

    P holds the large component on the nodes, Q the small component on the
    midpoints, both in plain (unweighted) samples, normalized so that
    int (P^2 + Q^2) dr = 1 under the channel quadrature.  eps is the orbital
    eigenvalue including the rest-mass term (converged shells sit in
    (0, c^2)).
    """

    n: int
    kappa: int
    w: float
    P: np.ndarray
    Q: np.ndarray
    eps: float = float("nan")

    @property
    def label(self) -> str:
        lsym = "spdfgh"[_l_of(self.kappa)] if _l_of(self.kappa) < 6 else f"l{_l_of(self.kappa)}"
        jtag = f"{2 * abs(self.kappa) - 1}/2"
        return f"{self.n}{lsym}({jtag})"


def _l_of(kappa: int) -> int:
    return kappa if kappa > 0 else -kappa - 1


@dataclass(frozen=True)
class ElectronicConfiguration:
    """Occupied shells plus problem data; houses the orthonormal N-frame."""

    shells: tuple[Shell, ...]
    Z: float
    c: float
    grid: RadialGrid
    nuclear: NuclearModel
    N: float = field(default=None)

    def __post_init__(self):
        n_elec = sum(s.w for s in self.shells)
        if self.N is None:
            object.__setattr__(self, "N", n_elec)
        elif abs(self.N - n_elec) > 1e-12:
            raise ValueError(f"N={self.N} does not match shell occupations {n_elec}")
        if self.N >= self.Z + 1:
            raise ValueError(f"need N < Z + 1, got N={self.N}, Z={self.Z}")
        for s in self.shells:
            if s.kappa == 0:
                raise ValueError("kappa must be nonzero")
            full = 2 * abs(s.kappa)
            single = len(self.shells) == 1 and abs(self.N - 1.0) < 1e-12
            if abs(s.w - full) > 1e-12 and not (single and abs(s.w - 1.0) < 1e-12):
                raise ValueError(
                    f"occupation must equal 2|kappa| (closed shell); got w={s.w} "
                    f"for kappa={s.kappa}"
                )

    def weighted(self, shell: Shell) -> np.ndarray:
        """Weighted channel vector of a shell."""
        g = self.grid
        return np.concatenate(
            [shell.P * np.sqrt(g.node_weights), shell.Q * np.sqrt(g.mid_weights)]
        )

    def channels(self) -> list[int]:
        """Distinct kappa values, in first-appearance order."""
        seen = []
        for s in self.shells:
            if s.kappa not in seen:
                seen.append(s.kappa)
        return seen

    def gram_matrix(self) -> np.ndarray:
        """Channel-blocked overlap matrix of the occupied shells.

        Shells in different channels are orthogonal by angular structure;
        their radial overlap is not meaningful, so those entries are exact
        zeros by construction.
        """
        n = len(self.shells)
        G = np.zeros((n, n))
        vecs = [self.weighted(s) for s in self.shells]
        for i in range(n):
            for j in range(n):
                if self.shells[i].kappa == self.shells[j].kappa:
                    G[i, j] = vecs[i] @ vecs[j]
        return G

    def is_single_electron(self) -> bool:
        return abs(self.N - 1.0) < 1e-12


def cross_density(a: Shell, b: Shell, grid: RadialGrid) -> np.ndarray:
    """Nodal cross density P_a P_b + J(Q_a Q_b), with J the midpoint-to-node
    interpolation; a == b gives the shell density."""
    J = midpoint_to_node_matrix(grid.size)
    return a.P * b.P + J @ (a.Q * b.Q)


def radial_density(config: ElectronicConfiguration) -> np.ndarray:
    """Total radial density D(r) = sum_a w_a (P_a^2 + Q_a^2) on the nodes.

    Nonnegative up to interpolation of the midpoint Q^2 samples; integrates
    to N exactly when the shells are quadrature-normalized.
    """
    D = np.zeros(config.grid.size)
    J = midpoint_to_node_matrix(config.grid.size)
    for s in config.shells:
        D += s.w * (s.P * s.P + J @ (s.Q * s.Q))
    return D
