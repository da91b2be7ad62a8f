r"""Spectral projectors, the free positive projector, epsilon-closeness, and
the negative-projection diagnostic.

A Projector stores the orthogonal projector onto the span of eigenvectors of
a channel operator above a threshold; the complement is 1 - P.  The
epsilon-closeness of a projector P to the free positive projector is the
operator norm of W (P - Lambda_free) W^{-1} with the kinetic weight
W = (c^2 K + c^4)^(1/4), K the per-component radial kinetic matrix built
with the channel boundary scheme.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import (
    ChannelOperator,
    channel_eigensystem,
    derivative_pair,
    free_channel_matrix,
)
from .configurations import ElectronicConfiguration
from .grids import RadialGrid
from .meanfield import mean_field_matrix

__all__ = [
    "Projector",
    "spectral_projector",
    "free_positive_projector",
    "epsilon_closeness",
    "lambda_minus_residual",
    "subspace_distance",
]


@dataclass(frozen=True)
class Projector:
    """Orthogonal projector on one channel's discretized space."""

    channel: int
    matrix: np.ndarray
    rank: int
    source: str = "free"
    basis: np.ndarray | None = None  # orthonormal columns spanning the range

    @property
    def complement(self) -> np.ndarray:
        return np.eye(self.matrix.shape[0]) - self.matrix

    def idempotency_defect(self) -> float:
        P = self.matrix
        return float(np.max(np.abs(P @ P - P)))


class ThresholdCollisionError(ValueError):
    """Threshold falls inside a too-small spectral gap."""


def spectral_projector(
    op: ChannelOperator, threshold: float, source: str = "free"
) -> Projector:
    """Projector onto the span of eigenvectors with eigenvalue >= threshold.

    Rejects thresholds within 1e-6 c^2 of an eigenvalue (the collision
    message carries the offending gap).  The complement (negative side) is
    available as ``.complement``.
    """
    vals, vecs = channel_eigensystem(op)
    guard = 1e-6 * (op.c**2 if op.c else max(1.0, np.max(np.abs(vals))))
    dist = np.abs(vals - threshold)
    j = int(np.argmin(dist))
    if dist[j] < guard:
        lo = vals[vals < threshold]
        hi = vals[vals >= threshold]
        gap = (
            float(lo[-1]) if len(lo) else -np.inf,
            float(hi[0]) if len(hi) else np.inf,
        )
        raise ThresholdCollisionError(
            f"threshold {threshold} collides with eigenvalue {vals[j]} "
            f"(gap {gap}, guard {guard})"
        )
    keep = vals >= threshold
    U = vecs[:, keep]
    P = U @ U.T
    return Projector(
        channel=op.channel, matrix=P, rank=int(keep.sum()), source=source, basis=U
    )


def free_positive_projector(kappa: int, c: float, grid: RadialGrid) -> Projector:
    """Positive spectral projector of the free Dirac channel at threshold 0."""
    return spectral_projector(free_channel_matrix(grid, kappa, c), 0.0, source="free")


def _kinetic_weight(kappa: int, c: float, grid: RadialGrid) -> tuple[np.ndarray, np.ndarray]:
    """W = (c^2 K + c^4)^(1/4) and its inverse, K = blockdiag of the
    per-component kinetic matrices of the channel (node and midpoint spaces)."""
    B, Bt = derivative_pair(grid, kappa)
    blocks = []
    for K in (Bt @ B, B @ Bt):
        w, V = np.linalg.eigh(K)
        if w.min() <= 0.0:
            raise ValueError(
                f"kinetic matrix not positive definite (min eigenvalue {w.min():.3e}); "
                "broken discretization"
            )
        blocks.append((V, (c * c * w + c**4) ** 0.25))
    M = grid.size
    W = np.zeros((2 * M, 2 * M))
    Winv = np.zeros((2 * M, 2 * M))
    for i, (V, s) in enumerate(blocks):
        sl = slice(i * M, (i + 1) * M)
        W[sl, sl] = (V * s) @ V.T
        Winv[sl, sl] = (V / s) @ V.T
    return W, Winv


def epsilon_closeness(P: Projector, kappa: int, c: float, grid: RadialGrid) -> float:
    """Smallest epsilon with ||W (P - Lambda_free) psi|| <= eps ||W psi||:
    the largest singular value of W (P - Lambda_free) W^{-1}."""
    if P.matrix.shape[0] != 2 * grid.size:
        raise ValueError("projector dimension does not match the channel space")
    free = free_positive_projector(kappa, c, grid)
    W, Winv = _kinetic_weight(kappa, c, grid)
    A = W @ (P.matrix - free.matrix) @ Winv
    return float(np.linalg.norm(A, 2))


def lambda_minus_residual(config: ElectronicConfiguration) -> np.ndarray:
    """Norms ||Lambda^-_psi psi_k|| of the occupied orbitals under their own
    mean field's negative spectral projector, one per shell."""
    neg = {}
    out = []
    for s in config.shells:
        if s.kappa not in neg:
            op = mean_field_matrix(config, s.kappa)
            pos = spectral_projector(op, 0.0, source="mean_field")
            neg[s.kappa] = pos.complement
        psi = config.weighted(s)
        out.append(float(np.linalg.norm(neg[s.kappa] @ psi)))
    return np.array(out)


def subspace_distance(P1: Projector | np.ndarray, P2: Projector | np.ndarray) -> float:
    """sin of the largest principal angle between two projector ranges,
    computed as ||P1 - P2||_2 (equal ranks assumed)."""
    A = P1.matrix if isinstance(P1, Projector) else P1
    B = P2.matrix if isinstance(P2, Projector) else P2
    return float(np.linalg.norm(A - B, 2))
