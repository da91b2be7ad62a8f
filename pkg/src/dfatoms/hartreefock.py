r"""Nonrelativistic radial Hartree-Fock solver for closed-shell atoms.

Same fixed-point contract as the relativistic driver, with the Schroedinger
channel in place of the Dirac one.  The kinetic matrix is the exact
c -> infinity Schur limit of the Dirac discretization (see channels), so a
heavy-c relativistic run and this solver share their discretization error;
their energy difference is then pure relativistic physics, which is what
the limit diagnostics fit.

Closed nonrelativistic shells carry w = 2(2l+1) and the exchange weights
(1/2) 3j(l_a k l_b; 000)^2; the one-electron system again short-circuits to
the bare (banded) channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eig_banded

from .angular import nonrel_exchange_weights
from .channels import _inverse_iteration
from .configurations import ElectronicConfiguration
from .grids import RadialGrid
from .meanfield import EnergyBreakdown
from .potentials import NuclearModel, nuclear_potential_at
from .scf import SCFControls, SCFError, SCFReport, count_nodes
from .slater import coulomb_kernel

__all__ = [
    "NonrelShellSpec",
    "NonrelShell",
    "HFConfiguration",
    "hf_scf",
    "hf_mean_field_matrix",
    "hf_energy",
    "schrodinger_band",
    "default_nonrel_grid",
]


def default_nonrel_grid(Z: float, size: int = 2000, r_max: float = 40.0):
    """Grid for dense nonrelativistic solves.

    The nonrelativistic kinetic matrix norm grows like 1/h_min^2; float64
    dense eigensolvers lose the bound spectrum once eps * norm reaches the
    Hartree scale.  Nonrelativistic orbitals behave like r^(l+1) at the
    origin, so r_min = 2e-4/Z costs only ~(Z r_min)^3 in truncation while
    keeping the matrix numerically tame.
    """
    from .grids import build_grid

    return build_grid("exponential", 2e-4 / Z, r_max, size)


@dataclass(frozen=True)
class NonrelShellSpec:
    n: int
    l: int
    w: float


@dataclass(frozen=True)
class NonrelShell:
    """Occupied nonrelativistic shell: radial orbital u on the nodes,
    quadrature-normalized, with its (negative, at convergence) multiplier."""

    n: int
    l: int
    w: float
    u: np.ndarray
    eps: float = float("nan")


@dataclass(frozen=True)
class HFConfiguration:
    shells: tuple[NonrelShell, ...]
    Z: float
    grid: RadialGrid
    nuclear: NuclearModel
    N: float = field(default=None)

    def __post_init__(self):
        n_elec = sum(s.w for s in self.shells)
        if self.N is None:
            object.__setattr__(self, "N", n_elec)
        if self.N >= self.Z + 1:
            raise ValueError(f"need N < Z + 1, got N={self.N}, Z={self.Z}")

    def weighted(self, shell: NonrelShell) -> np.ndarray:
        return shell.u * np.sqrt(self.grid.node_weights)

    def is_single_electron(self) -> bool:
        return abs(self.N - 1.0) < 1e-12


def schrodinger_band(grid: RadialGrid, l: int, V: np.ndarray) -> np.ndarray:
    """Tridiagonal band of the radial Schroedinger channel, O(M) assembly."""
    from .channels import _derivative_arrays

    Bd, Bs = _derivative_arrays(grid, -(int(l) + 1))
    M = grid.size
    band = np.zeros((2, M))
    band[1] = 0.5 * Bd * Bd - 0.0
    band[1, 1:] += 0.5 * Bs * Bs
    band[1] += V
    band[0, 1:] = 0.5 * Bd[:-1] * Bs
    return band


def _band_qf(band: np.ndarray, x: np.ndarray) -> float:
    d, e = band[1], band[0, 1:]
    return float(d @ (x * x) + 2.0 * (e @ (x[:-1] * x[1:])))


def _band_apply(band: np.ndarray, x: np.ndarray) -> np.ndarray:
    d, e = band[1], band[0, 1:]
    out = d * x
    out[:-1] += e * x[1:]
    out[1:] += e * x[:-1]
    return out


def _density(config: HFConfiguration) -> np.ndarray:
    D = np.zeros(config.grid.size)
    for s in config.shells:
        D += s.w * s.u * s.u
    return D


def _exchange_weights(config: HFConfiguration, l_target: int, shell: NonrelShell):
    if config.is_single_electron():
        return {0: shell.w * 1.0} if shell.l == l_target else {}
    return {k: shell.w * v for k, v in nonrel_exchange_weights(l_target, shell.l).items()}


def hf_mean_field_matrix(config: HFConfiguration, l: int) -> np.ndarray:
    """Dense M x M Fock matrix of the l-channel (weighted coordinates)."""
    g = config.grid
    V = nuclear_potential_at(config.nuclear, g.nodes)
    H = np.zeros((g.size, g.size))
    band = schrodinger_band(g, l, V)
    np.fill_diagonal(H, band[1])
    idx = np.arange(g.size - 1)
    H[idx, idx + 1] = band[0, 1:]
    H[idx + 1, idx] = band[0, 1:]
    return H + hf_two_body_matrix(config, l)


def hf_two_body_matrix(config: HFConfiguration, l: int) -> np.ndarray:
    g = config.grid
    sa = np.sqrt(g.node_weights)
    TB = np.zeros((g.size, g.size))
    if not config.shells:
        return TB
    C0 = coulomb_kernel(g, 0)
    D = _density(config)
    TB[np.diag_indices(g.size)] += (C0 @ D) / g.node_weights
    for shell in config.shells:
        weights = _exchange_weights(config, l, shell)
        if not weights:
            continue
        x = shell.u / sa
        for k, coeff in weights.items():
            Ck = coulomb_kernel(g, k)
            TB -= coeff * (x[:, None] * (Ck * x[None, :]))
    return TB


def hf_energy(config: HFConfiguration) -> EnergyBreakdown:
    """Energy breakdown; ``shifted`` equals ``total`` (no rest-mass term)."""
    g = config.grid
    if not config.shells:
        return EnergyBreakdown(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    V = nuclear_potential_at(config.nuclear, g.nodes)
    one_body = 0.0
    for s in config.shells:
        band = schrodinger_band(g, s.l, V)
        one_body += s.w * _band_qf(band, config.weighted(s))
    direct, exchange = _hf_interaction(config)
    eig_sum = 0.0
    mf_cache = {}
    for s in config.shells:
        if config.is_single_electron():
            eig_sum = one_body
            break
        if s.l not in mf_cache:
            mf_cache[s.l] = hf_mean_field_matrix(config, s.l)
        x = config.weighted(s)
        eig_sum += s.w * float(x @ (mf_cache[s.l] @ x))
    total = one_body + direct - exchange
    return EnergyBreakdown(
        total=total,
        shifted=total,
        one_body=one_body,
        direct=direct,
        exchange=exchange,
        eigenvalue_sum=eig_sum,
    )


def _hf_interaction(config: HFConfiguration) -> tuple[float, float]:
    g = config.grid
    C0 = coulomb_kernel(g, 0)
    if config.is_single_electron():
        s = config.shells[0]
        rho = s.u * s.u
        half = 0.5 * float(rho @ C0 @ rho)
        return half, half
    direct = 0.0
    exchange = 0.0
    for a in config.shells:
        for b in config.shells:
            ra, rb = a.u * a.u, b.u * b.u
            direct += 0.5 * a.w * b.w * float(ra @ C0 @ rb)
            lam = nonrel_exchange_weights(a.l, b.l)
            if lam:
                rab = a.u * b.u
                for k, v in lam.items():
                    Ck = coulomb_kernel(g, k)
                    exchange += 0.5 * a.w * b.w * v * float(rab @ Ck @ rab)
    return direct, exchange


def _validate(shells, Z):
    if not shells:
        raise SCFError("at least one occupied shell is required")
    N = sum(s.w for s in shells)
    if N >= Z + 1:
        raise SCFError(f"need N < Z + 1, got N={N}, Z={Z}")
    single = len(shells) == 1 and abs(N - 1.0) < 1e-12
    for s in shells:
        full = 2 * (2 * s.l + 1)
        if abs(s.w - full) > 1e-12 and not (single and abs(s.w - 1.0) < 1e-12):
            raise SCFError(f"occupation must equal 2(2l+1), got w={s.w} for l={s.l}")
    if len({(s.n, s.l) for s in shells}) != len(shells):
        raise SCFError("duplicate (n, l) shells")
    return N


def _pick_lowest(vals, vec_of, n_needed, l):
    idx = list(range(n_needed))
    if len(vals) > n_needed and abs(vals[n_needed] - vals[n_needed - 1]) < 1e-12 * max(
        1.0, abs(vals[n_needed - 1])
    ):
        cand = [n_needed - 1, n_needed]
        nodes = [count_nodes(vec_of(i)) for i in cand]
        if nodes[0] == nodes[1]:
            raise SCFError(f"channel l={l}: unresolved degeneracy")
        idx[-1] = cand[int(np.argmin(nodes))]
    return idx


def _solve_banded(band, specs, grid, l):
    vals = eig_banded(band, lower=False, eigvals_only=True)
    idx = _pick_lowest(vals, lambda i: _inverse_iteration(band, vals[i]), len(specs), l)
    out = []
    sa = np.sqrt(grid.node_weights)
    for spec, i in zip(sorted(specs, key=lambda s: s.n), idx):
        x = _inverse_iteration(band, vals[i])
        if x[np.argmax(np.abs(x))] < 0:
            x = -x
        out.append(
            NonrelShell(n=spec.n, l=l, w=spec.w, u=x / sa, eps=_band_qf(band, x))
        )
    return out


def _solve_dense(H, specs, grid, l):
    from .channels import refine_eigenpair

    vals, vecs = np.linalg.eigh(H)
    refined = np.einsum("ij,ij->j", vecs, H @ vecs)
    order = np.argsort(refined, kind="stable")
    vals, vecs = refined[order], vecs[:, order]
    idx = _pick_lowest(vals, lambda i: vecs[:, i], len(specs), l)
    out = []
    sa = np.sqrt(grid.node_weights)
    kept = []
    for spec, i in zip(sorted(specs, key=lambda s: s.n), idx):
        lam, x = refine_eigenpair(H, vecs[:, i], float(vals[i]))
        for y in kept:
            x = x - y * (y @ x)
        x /= np.linalg.norm(x)
        kept.append(x)
        if x[np.argmax(np.abs(x))] < 0:
            x = -x
        out.append(
            NonrelShell(n=spec.n, l=l, w=spec.w, u=x / sa, eps=float(x @ (H @ x)))
        )
    return out


def hf_scf(
    nuclear: NuclearModel,
    shells: list[NonrelShellSpec],
    grid: RadialGrid,
    controls: SCFControls | None = None,
) -> SCFReport:
    """Nonrelativistic closed-shell SCF; returns the same report structure as
    the relativistic driver (lambda_minus diagnostics do not apply)."""
    controls = controls or SCFControls()
    Z = nuclear.Z
    N = _validate(shells, Z)
    channels = []
    for s in shells:
        if s.l not in channels:
            channels.append(s.l)
    specs_by_l = {l: [s for s in shells if s.l == l] for l in channels}
    single = len(shells) == 1 and abs(N - 1.0) < 1e-12

    Zeff = max(Z - (N - 1) / 2.0, 1.0)
    guess_nuc = NuclearModel(Z=Zeff, shape=nuclear.shape, radius=nuclear.radius)
    Vg = nuclear_potential_at(guess_nuc, grid.nodes)
    occ = []
    for l in channels:
        occ.extend(_solve_banded(schrodinger_band(grid, l, Vg), specs_by_l[l], grid, l))
    config = HFConfiguration(shells=tuple(occ), Z=Z, grid=grid, nuclear=nuclear)

    V = nuclear_potential_at(nuclear, grid.nodes)
    bands = {l: schrodinger_band(grid, l, V) for l in channels}
    bare = {}
    if not single:
        for l in channels:
            H = np.zeros((grid.size, grid.size))
            np.fill_diagonal(H, bands[l][1])
            idx = np.arange(grid.size - 1)
            H[idx, idx + 1] = bands[l][0, 1:]
            H[idx + 1, idx] = bands[l][0, 1:]
            bare[l] = H

    TB_mixed = {}
    history, residuals = [], []
    floor, E_prev = 0.0, None
    converged = False
    iterations = 0
    for it in range(1, controls.max_iter + 1):
        iterations = it
        TB_new = None if single else {l: hf_two_body_matrix(config, l) for l in channels}
        H_self = {} if single else {l: bare[l] + TB_new[l] for l in channels}
        absH = {} if single else {l: np.abs(H_self[l]) for l in channels}
        residuals = []
        floor = 0.0
        one_body = 0.0
        for s in config.shells:
            x = config.weighted(s)
            one_body += s.w * _band_qf(bands[s.l], x)
            if single:
                Hx = _band_apply(bands[s.l], x)
                scale = float(np.linalg.norm(_band_apply(np.abs(bands[s.l]), np.abs(x))))
            else:
                Hx = H_self[s.l] @ x
                scale = float(np.linalg.norm(absH[s.l] @ np.abs(x)))
            floor = max(floor, 32.0 * np.finfo(float).eps * scale)
            eps = float(x @ Hx)
            residuals.append(float(np.linalg.norm(Hx - eps * x)))
        tol_orb = max(controls.tol_orbital, 4.0 * floor)
        direct, exchange = _hf_interaction(config)
        E = one_body + direct - exchange
        history.append(E)
        if E_prev is not None:
            if abs(E - E_prev) < controls.tol_energy * max(1.0, abs(E)) and max(
                residuals
            ) < tol_orb:
                converged = True
                break
        E_prev = E
        occ = []
        for l in channels:
            if single:
                occ.extend(_solve_banded(bands[l], specs_by_l[l], grid, l))
                continue
            if l in TB_mixed:
                TB_mixed[l] = (
                    controls.mixing * TB_new[l] + (1 - controls.mixing) * TB_mixed[l]
                )
            else:
                TB_mixed[l] = TB_new[l]
            occ.extend(_solve_dense(bare[l] + TB_mixed[l], specs_by_l[l], grid, l))
        config = HFConfiguration(shells=tuple(occ), Z=Z, grid=grid, nuclear=nuclear)

    if converged:
        bad = [s.eps for s in config.shells if s.eps >= 0]
        if bad:
            raise SCFError(f"converged with nonnegative multipliers {bad}")
    return SCFReport(
        configuration=config,
        energy=hf_energy(config),
        iterations=iterations,
        energy_history=history,
        orbital_residuals=residuals,
        lambda_minus_residuals=[],
        converged=converged,
        effective_tol_orbital=max(controls.tol_orbital, 4.0 * floor),
        controls=controls,
    )
