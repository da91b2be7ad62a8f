r"""Analytic validation oracles.

oracle_sommerfeld evaluates the point-Coulomb Dirac level in closed form;
sto_hartree_fock minimizes the closed-shell s-state Hartree-Fock energy over
a small even-tempered exponential basis with fully analytic integrals and
dense linear algebra, independent of every grid in the package.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import eigh

__all__ = ["oracle_sommerfeld", "sto_hartree_fock"]


def oracle_sommerfeld(Z: float, kappa: int, n: int, c: float) -> float:
    """Point-Coulomb Dirac eigenvalue (rest mass included):
    E = c^2 (1 + (Z alpha / (n - |kappa| + sqrt(kappa^2 - (Z alpha)^2)))^2)^(-1/2).

    n counts bound levels with n - |kappa| >= 0 (and n > |kappa| for
    kappa > 0); Z alpha >= |kappa| is a domain error (supercritical channel).
    """
    if kappa == 0:
        raise ValueError("kappa must be a nonzero integer")
    if c <= 0 or Z <= 0:
        raise ValueError("need Z > 0 and c > 0")
    za = Z / c
    if za >= abs(kappa):
        raise ValueError(f"supercritical channel: Z alpha = {za} >= |kappa| = {abs(kappa)}")
    if n < abs(kappa) or (kappa > 0 and n == abs(kappa)):
        raise ValueError(f"no bound level n={n} in channel kappa={kappa}")
    gamma = np.sqrt(kappa * kappa - za * za)
    return float(c * c * (1.0 + (za / (n - abs(kappa) + gamma)) ** 2) ** -0.5)


def _sto_f0(a: float, b: float) -> float:
    """F0 Slater integral of the radial densities r^2 e^(-a r), r^2 e^(-b r)."""
    q = a + b
    t1 = 2.0 / (a**3 * b**2)
    t2 = -(6.0 * a**2 / q**4 + 4.0 * a / q**3 + 2.0 / q**2) / a**3
    t3 = (6.0 * a / q**4 + 2.0 / q**3) / a**2
    return t1 + t2 + t3


def _sto_rhf(Z: float, n_occ: int, zetas) -> tuple[float, np.ndarray]:
    z = np.asarray(zetas, dtype=float)
    n = len(z)
    zi, zj = np.meshgrid(z, z, indexing="ij")
    p = zi + zj
    S = 2.0 / p**3
    T = -0.5 * (zj**2 * 2.0 / p**3 - 2.0 * zj / p**2)
    V = -Z / p**2
    h = T + V
    eri = np.empty((n, n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    eri[i, j, k, l] = _sto_f0(z[i] + z[j], z[k] + z[l])
    vals, C = eigh(h, S)
    Cocc = C[:, :n_occ]
    E = 0.0
    for _ in range(300):
        P = 2.0 * (Cocc @ Cocc.T)
        J = np.einsum("ijkl,kl->ij", eri, P)
        K = np.einsum("ikjl,kl->ij", eri, P)
        F = h + J - 0.5 * K
        vals, C = eigh(F, S)
        Cold = Cocc
        Cocc = C[:, :n_occ]
        E_new = 0.5 * float(np.einsum("ij,ij->", P, h + F))
        if abs(E_new - E) < 1e-13 and np.abs(
            np.abs(Cold.T @ S @ Cocc) - np.eye(n_occ)
        ).max() < 1e-11:
            E = E_new
            break
        E = E_new
    return E, vals[:n_occ]


def sto_hartree_fock(
    Z: float,
    n_occ: int,
    n_terms: int = 6,
    alphas=(0.2, 0.3, 0.4, 0.55, 0.7, 0.9),
    betas=(1.9, 2.1, 2.3, 2.6, 3.0),
) -> tuple[float, np.ndarray]:
    """Closed-shell s-only RHF energy minimized over even-tempered exponent
    ladders zeta_i = alpha beta^i; returns (E, occupied multipliers)."""
    best = None
    for a in alphas:
        for b in betas:
            zetas = [a * b**i for i in range(n_terms)]
            E, eps = _sto_rhf(Z, n_occ, zetas)
            if best is None or E < best[0]:
                best = (E, eps)
    return best
