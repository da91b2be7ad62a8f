r"""Mean-field operator assembly and the total-energy functional.

The closed-shell interaction energy is evaluated in the pair form

    E_2 = 1/2 sum_{a,b} w_a w_b [ F^0(a,b) - sum_k Lambda^k(a,b) G^k(a,b) ],

which (by Lambda^0(a,a) = 1/(2j_a+1)) is identical to the self-interaction-
free sum over distinct pairs plus intra-shell corrections.  The mean-field
operator is the exact functional derivative, (1/(2 w_a)) dE/dpsi_a: one
channel matrix per kappa, shared by every shell in the channel, so the
occupied shells of one channel are orthogonal eigenvectors of a single
symmetric matrix.

All two-body quantities route through the shared Coulomb kernels of
``slater``; the directional-derivative and double-counting identities then
hold to roundoff.

For the one-electron system the closed-shell average does not apply: the
exchange kernel of the lone orbital carries the bare k = 0 weight 1, making
direct and exchange cancel exactly on the occupied orbital.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .angular import (
    intra_shell_weights,
    kappa_to_j,
    kappa_to_l,
    relativistic_exchange_weights,
)
from .channels import (
    ChannelOperator,
    band_quadratic_form,
    dirac_channel_band,
    dirac_channel_matrix,
)
from .configurations import ElectronicConfiguration, Shell, cross_density, radial_density
from .grids import RadialGrid, midpoint_to_node_matrix
from .potentials import nuclear_potential_at
from .slater import coulomb_kernel

__all__ = [
    "EnergyBreakdown",
    "SUPPORTED_KAPPAS",
    "bare_channel",
    "bare_band",
    "one_body_integral",
    "two_body_matrix",
    "entry_two_body_matrix",
    "mean_field_matrix",
    "df_energy",
    "interaction_terms",
    "entry_interaction_terms",
    "exchange_weights_for",
]

SUPPORTED_KAPPAS = (-1, 1, -2)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Total energy and its pieces (Hartree).

    total = one_body + direct - exchange holds by construction;
    total = eigenvalue_sum - (direct - exchange) holds identically when the
    eigenvalue sum uses mean-field Rayleigh quotients, which it does.
    """

    total: float
    shifted: float
    one_body: float
    direct: float
    exchange: float
    eigenvalue_sum: float


def bare_channel(config: ElectronicConfiguration, kappa: int) -> ChannelOperator:
    """One-body Dirac channel H_kappa + V_nuclear on the configuration grid."""
    g = config.grid
    Vn = nuclear_potential_at(config.nuclear, g.nodes)
    Vm = nuclear_potential_at(config.nuclear, g.midpoints)
    return dirac_channel_matrix(g, kappa, config.c, Vn, Vm)


def bare_band(config: ElectronicConfiguration, kappa: int) -> np.ndarray:
    """Tridiagonal band of the bare channel (O(M), no dense matrix)."""
    g = config.grid
    Vn = nuclear_potential_at(config.nuclear, g.nodes)
    Vm = nuclear_potential_at(config.nuclear, g.midpoints)
    return dirac_channel_band(g, kappa, config.c, Vn, Vm)


def one_body_integral(config: ElectronicConfiguration, shell: Shell) -> float:
    """<psi | H_kappa + V | psi> via the band quadratic form."""
    return band_quadratic_form(bare_band(config, shell.kappa), config.weighted(shell))


def exchange_weights_for(
    config: ElectronicConfiguration, kappa_target: int, shell: Shell
) -> dict[int, float]:
    """Multipole exchange weights between the target channel and one occupied
    shell, including the shell occupation factor."""
    single = config.is_single_electron()
    return _entry_exchange_weights(kappa_target, shell.kappa, shell.w, single)


def _entry_exchange_weights(kappa_target, kappa_b, weight_b, single) -> dict[int, float]:
    if single:
        # single determinant of one orbital: exchange is the full k=0 kernel
        return {0: weight_b * 1.0} if kappa_b == kappa_target else {}
    lam = relativistic_exchange_weights(kappa_target, kappa_b)
    return {k: weight_b * v for k, v in lam.items()}


def _apply_J_right(C: np.ndarray) -> np.ndarray:
    """C @ J for the midpoint-to-node interpolation J, in O(M^2)."""
    M = C.shape[1]
    out = np.empty_like(C)
    out[:, 2 : M - 1] = 0.5 * (C[:, 2 : M - 1] + C[:, 3:M])
    out[:, 0] = 1.5 * C[:, 0] + 0.5 * C[:, 1]
    if M > 2:
        out[:, 1] = -0.5 * C[:, 0] + 0.5 * (C[:, 1] + C[:, 2])
    out[:, M - 1] = 0.5 * C[:, M - 1]
    return out


def _apply_Jt_left(C: np.ndarray) -> np.ndarray:
    """J^T @ C in O(M^2)."""
    return _apply_J_right(C.T).T


def entry_two_body_matrix(
    grid: RadialGrid, entries, kappa: int, single: bool
) -> np.ndarray:
    """Direct-plus-exchange channel block for generalized occupied entries.

    entries is a list of (kappa_b, weight_b, P_b, Q_b); weight_b is the full
    3D occupation carried by the radial orbital (2|kappa| for a closed shell,
    a fraction of it for density-matrix iterations).
    """
    g = grid
    M = g.size
    TB = np.zeros((2 * M, 2 * M))
    if not entries:
        return TB
    sa = np.sqrt(g.node_weights)
    sb = np.sqrt(g.mid_weights)
    J = midpoint_to_node_matrix(M)
    C0 = coulomb_kernel(g, 0)
    D = np.zeros(M)
    for kap_b, w_b, P_b, Q_b in entries:
        D += w_b * (P_b * P_b + J @ (Q_b * Q_b))
    U = C0 @ D
    TB[:M, :M] += np.diag(U / g.node_weights)
    TB[M:, M:] += np.diag((J.T @ U) / g.mid_weights)
    for kap_b, w_b, P_b, Q_b in entries:
        weights = _entry_exchange_weights(kappa, kap_b, w_b, single)
        if not weights:
            continue
        x = P_b / sa
        y = Q_b / sb
        for k, coeff in weights.items():
            Ck = coulomb_kernel(g, k)
            CkJ = _apply_J_right(Ck)
            JtCkJ = _apply_Jt_left(CkJ)
            TB[:M, :M] -= coeff * (x[:, None] * (Ck * x[None, :]))
            TB[:M, M:] -= coeff * (x[:, None] * (CkJ * y[None, :]))
            TB[M:, M:] -= coeff * (y[:, None] * (JtCkJ * y[None, :]))
    TB[M:, :M] = TB[:M, M:].T
    return TB


def two_body_matrix(config: ElectronicConfiguration, kappa: int) -> np.ndarray:
    """Direct-plus-exchange block of the mean-field channel matrix (2M x 2M,
    weighted coordinates).  Vanishes for the empty configuration."""
    entries = [(s.kappa, s.w, s.P, s.Q) for s in config.shells]
    return entry_two_body_matrix(
        config.grid, entries, kappa, config.is_single_electron()
    )


def mean_field_matrix(config: ElectronicConfiguration, kappa: int) -> ChannelOperator:
    """Mean-field Dirac channel matrix: bare channel + direct + exchange."""
    if kappa not in SUPPORTED_KAPPAS:
        raise ValueError(f"unsupported channel kappa={kappa}; v1 supports {SUPPORTED_KAPPAS}")
    H0 = bare_channel(config, kappa)
    H = H0.matrix + two_body_matrix(config, kappa)
    return ChannelOperator(
        channel=kappa, kind="mean_field_dirac", matrix=H, grid=config.grid, c=config.c
    )


def entry_interaction_terms(grid: RadialGrid, entries, single: bool) -> tuple[float, float]:
    """(direct, exchange) halves of the pair-form interaction energy for
    generalized occupied entries (see entry_two_body_matrix)."""
    if not entries:
        return 0.0, 0.0
    g = grid
    J = midpoint_to_node_matrix(g.size)
    C0 = coulomb_kernel(g, 0)

    def rho(i, j):
        _, _, Pi, Qi = entries[i]
        _, _, Pj, Qj = entries[j]
        return Pi * Pj + J @ (Qi * Qj)

    if single:
        r00 = rho(0, 0)
        half = 0.5 * float(r00 @ C0 @ r00)
        return half, half
    densities = [rho(i, i) for i in range(len(entries))]
    direct = 0.0
    exchange = 0.0
    for i, (kap_a, w_a, _, _) in enumerate(entries):
        for j, (kap_b, w_b, _, _) in enumerate(entries):
            direct += 0.5 * w_a * w_b * float(densities[i] @ C0 @ densities[j])
            lam = relativistic_exchange_weights(kap_a, kap_b)
            if lam:
                rho_ab = rho(i, j) if i != j else densities[i]
                for k, v in lam.items():
                    Ck = coulomb_kernel(g, k)
                    exchange += 0.5 * w_a * w_b * v * float(rho_ab @ Ck @ rho_ab)
    return direct, exchange


def interaction_terms(config: ElectronicConfiguration) -> tuple[float, float]:
    """(direct, exchange) halves of the pair-form interaction energy."""
    entries = [(s.kappa, s.w, s.P, s.Q) for s in config.shells]
    return entry_interaction_terms(config.grid, entries, config.is_single_electron())


def df_energy(config: ElectronicConfiguration) -> EnergyBreakdown:
    """Energy breakdown of a configuration (converged or not).

    eigenvalue_sum uses mean-field Rayleigh quotients, which coincide with
    the orbital eigenvalues at self-consistency.
    """
    if not config.shells:
        return EnergyBreakdown(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    one_body = 0.0
    eig_sum = 0.0
    band_cache: dict[int, np.ndarray] = {}
    mf_cache: dict[int, np.ndarray] = {}
    for s in config.shells:
        psi = config.weighted(s)
        if s.kappa not in band_cache:
            band_cache[s.kappa] = bare_band(config, s.kappa)
        one_body += s.w * band_quadratic_form(band_cache[s.kappa], psi)
        if config.is_single_electron():
            # direct and exchange cancel on the lone orbital
            eig_sum = one_body
            continue
        if s.kappa not in mf_cache:
            mf_cache[s.kappa] = mean_field_matrix(config, s.kappa).matrix
        eig_sum += s.w * float(psi @ (mf_cache[s.kappa] @ psi))
    direct, exchange = interaction_terms(config)
    total = one_body + direct - exchange
    return EnergyBreakdown(
        total=total,
        shifted=total - config.N * config.c**2,
        one_body=one_body,
        direct=direct,
        exchange=exchange,
        eigenvalue_sum=eig_sum,
    )
