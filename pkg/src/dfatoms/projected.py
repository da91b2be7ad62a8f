r"""Projector-constrained self-consistent field.

Solves the compressed eigenproblem P+ H P+ restricted to range(P+) per
channel, with the projector taken from the free channel, recomputed
self-consistently from the current mean field, or loaded from file.  With
the self-consistent source the occupied subspace coincides with the plain
SCF solution: mean-field solutions with positive multipliers solve their own
projected equations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelOperator, channel_eigensystem, nodal_components
from .configurations import ElectronicConfiguration, Shell
from .grids import RadialGrid
from .meanfield import bare_channel, df_energy, interaction_terms, two_body_matrix
from .potentials import NuclearModel
from .projectors import Projector, free_positive_projector, spectral_projector
from .scf import (
    SCFControls,
    SCFError,
    SCFReport,
    _orbital_floor,
    _validate_shells,
    count_nodes,
)

__all__ = ["ProjectedSCFReport", "projected_scf"]


@dataclass
class ProjectedSCFReport(SCFReport):
    projectors: dict = field(default_factory=dict)
    range_defects: list = field(default_factory=list)
    projector_source: str = "free"


def _positive_basis(H: np.ndarray, grid: RadialGrid, kappa: int, c: float) -> np.ndarray:
    op = ChannelOperator(channel=kappa, kind="mean_field_dirac", matrix=H, grid=grid, c=c)
    vals, vecs = channel_eigensystem(op)
    return vecs[:, vals >= 0.0]


def _compressed_solve(H, U, specs, grid, c, kappa):
    """Occupied shells from the compressed operator U^T H U, embedded back."""
    Hc = U.T @ (H @ U)
    Hc = 0.5 * (Hc + Hc.T)
    vals, vecs = np.linalg.eigh(Hc)
    refined = np.einsum("ij,ij->j", vecs, Hc @ vecs)
    order = np.argsort(refined, kind="stable")
    vals, vecs = refined[order], vecs[:, order]
    gap = np.where((vals > 0.0) & (vals < c * c))[0]
    if len(gap) < len(specs):
        raise SCFError(
            f"channel kappa={kappa}: only {len(gap)} compressed levels in "
            f"(0, c^2) but {len(specs)} shells requested"
        )
    out = []
    M = grid.size
    for spec, i in zip(sorted(specs, key=lambda s: s.n), gap[: len(specs)]):
        psi = U @ vecs[:, i]
        jmax = np.argmax(np.abs(psi[:M]))
        if psi[jmax] < 0:
            psi = -psi
        P, Q = nodal_components(psi, grid)
        out.append(Shell(n=spec.n, kappa=spec.kappa, w=spec.w, P=P, Q=Q, eps=float(vals[i])))
    return out


def projected_scf(
    nuclear: NuclearModel,
    shells,
    c: float,
    grid: RadialGrid,
    source: str = "free",
    projectors: dict[int, Projector] | None = None,
    controls: SCFControls | None = None,
) -> ProjectedSCFReport:
    """SCF on the compressed operators P+ H P+.

    source is one of "free" (fixed free positive projectors), "mean_field"
    (P+ recomputed from the current mean field each iteration; converges to
    the plain SCF solution), or "file" (projectors supplied by the caller,
    one per channel).
    """
    controls = controls or SCFControls()
    Z = nuclear.Z
    N = _validate_shells(shells, Z)
    channels = []
    for s in shells:
        if s.kappa not in channels:
            channels.append(s.kappa)
    specs_by_channel = {k: [s for s in shells if s.kappa == k] for k in channels}

    if source == "file":
        if not projectors:
            raise SCFError("source='file' needs projectors per channel")
        for k in channels:
            if k not in projectors:
                raise SCFError(f"no projector supplied for channel kappa={k}")
            if projectors[k].matrix.shape[0] != 2 * grid.size:
                raise SCFError(
                    f"projector for kappa={k} has dimension "
                    f"{projectors[k].matrix.shape[0]}, channel space needs {2 * grid.size}"
                )
    elif source == "free":
        projectors = {k: free_positive_projector(k, c, grid) for k in channels}
    elif source != "mean_field":
        raise SCFError(f"unknown projector source {source!r}")

    def basis_of(k, H):
        if source == "mean_field":
            return _positive_basis(H, grid, k, c)
        P = projectors[k]
        if P.basis is not None:
            return P.basis
        vals, vecs = np.linalg.eigh(P.matrix)
        return vecs[:, vals > 0.5]

    # screened guess via the projected bare problem
    Zeff = max(Z - (N - 1) / 2.0, 1.0)
    guess_nuc = NuclearModel(Z=Zeff, shape=nuclear.shape, radius=nuclear.radius)
    guess_cfg = ElectronicConfiguration(
        shells=(), Z=Zeff, c=c, grid=grid, nuclear=guess_nuc, N=0.0
    )
    occ = []
    for kappa in channels:
        H0 = bare_channel(guess_cfg, kappa).matrix
        U = basis_of(kappa, H0)
        occ.extend(_compressed_solve(H0, U, specs_by_channel[kappa], grid, c, kappa))
    config = ElectronicConfiguration(
        shells=tuple(occ), Z=Z, c=c, grid=grid, nuclear=nuclear
    )

    bare = {k: bare_channel(config, k).matrix for k in channels}
    TB_mixed: dict[int, np.ndarray] = {}
    bases: dict[int, np.ndarray] = {}
    history, residuals = [], []
    floor, E_prev = 0.0, None
    converged = False
    iterations = 0
    for it in range(1, controls.max_iter + 1):
        iterations = it
        TB_new = {k: two_body_matrix(config, k) for k in channels}
        residuals = []
        for s in config.shells:
            psi = config.weighted(s)
            H = bare[s.kappa] + TB_new[s.kappa]
            U = bases.get(s.kappa)
            if U is None:
                U = basis_of(s.kappa, H)
            Hpsi = U @ (U.T @ (H @ (U @ (U.T @ psi))))
            eps = float(psi @ Hpsi)
            residuals.append(float(np.linalg.norm(Hpsi - eps * psi)))
            floor = max(floor, _orbital_floor(H))
        tol_orb = max(controls.tol_orbital, floor)
        energy = df_energy(config)
        history.append(energy.total)
        if E_prev is not None:
            if (
                abs(energy.total - E_prev) < controls.tol_energy * max(1.0, abs(energy.shifted))
                and max(residuals) < tol_orb
            ):
                converged = True
                break
        E_prev = energy.total

        occ = []
        for kappa in channels:
            if kappa in TB_mixed:
                TB_mixed[kappa] = (
                    controls.mixing * TB_new[kappa]
                    + (1 - controls.mixing) * TB_mixed[kappa]
                )
            else:
                TB_mixed[kappa] = TB_new[kappa]
            H = bare[kappa] + TB_mixed[kappa]
            U = basis_of(kappa, H)
            bases[kappa] = U
            occ.extend(_compressed_solve(H, U, specs_by_channel[kappa], grid, c, kappa))
        config = ElectronicConfiguration(
            shells=tuple(occ), Z=Z, c=c, grid=grid, nuclear=nuclear
        )

    # final projectors and range confinement
    final_projectors = {}
    for kappa in channels:
        if source == "mean_field":
            from .meanfield import mean_field_matrix

            op = mean_field_matrix(config, kappa)
            final_projectors[kappa] = spectral_projector(op, 0.0, source="mean_field")
        else:
            final_projectors[kappa] = projectors[kappa]
    defects = []
    for s in config.shells:
        psi = config.weighted(s)
        P = final_projectors[s.kappa].matrix
        defects.append(float(np.linalg.norm(psi - P @ psi)))

    energy = df_energy(config)
    return ProjectedSCFReport(
        configuration=config,
        energy=energy,
        iterations=iterations,
        energy_history=history,
        orbital_residuals=residuals,
        lambda_minus_residuals=[],
        converged=converged,
        effective_tol_orbital=max(controls.tol_orbital, floor),
        controls=controls,
        projectors=final_projectors,
        range_defects=defects,
        projector_source=source,
    )
