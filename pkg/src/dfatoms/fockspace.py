r"""Density-matrix model: the constrained set at fixed positive projector,
its energy functional, minimization by damped Aufbau fixed point, and the
max-min projector iteration with the closed-shell fixed-point certificate.

A density matrix is stored as per-channel radial blocks gamma_kappa on the
2M channel space; each radial eigenvalue n in [0, 1] carries the full
angular multiplicity 2|kappa| (one-electron runs carry multiplicity 1, as
in the orbital model).  The constraints at projector P+ are: hermiticity,
0 <= P+ gamma P+ <= 1, -(1) <= (1-P+) gamma (1-P+) <= 0, vanishing
cross-blocks, and 3D trace <= N.

The energy uses the rest-mass-shifted one-body trace tr((H - c^2) gamma)
plus the same direct/exchange machinery as the orbital functional, applied
to gamma's spectral orbitals weighted by occupation; on an idempotent
closed-shell gamma it reproduces the orbital energy minus N c^2 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import channel_eigensystem
from .configurations import ElectronicConfiguration, Shell
from .grids import RadialGrid
from .meanfield import (
    bare_band,
    bare_channel,
    entry_interaction_terms,
    entry_two_body_matrix,
    mean_field_matrix,
)
from .channels import band_quadratic_form, nodal_components
from .potentials import NuclearModel
from .projectors import Projector, spectral_projector, subspace_distance
from .scf import SCFControls, SCFError, ShellSpec, _validate_shells, scf_solve

__all__ = [
    "DensityMatrix",
    "ConstraintViolation",
    "check_constraints",
    "fc_energy",
    "configuration_density_matrix",
    "FixedProjectorResult",
    "minimize_fc_fixed_projector",
    "ProjectorIterationResult",
    "maxmin_projector_iteration",
]

_OCC_TOL = 1e-10


@dataclass(frozen=True)
class DensityMatrix:
    """Per-channel radial blocks with their multiplicities and projectors."""

    blocks: dict[int, np.ndarray]
    multiplicities: dict[int, float]
    projectors: dict[int, Projector]
    grid: RadialGrid

    @property
    def trace(self) -> float:
        return sum(
            self.multiplicities[k] * float(np.trace(B)) for k, B in self.blocks.items()
        )

    def spectral(self):
        """(kappa, occupation, weighted orbital) triples with occupation
        above the numerical floor."""
        out = []
        for k, B in self.blocks.items():
            vals, vecs = np.linalg.eigh(0.5 * (B + B.T))
            for i in range(len(vals)):
                if vals[i] > _OCC_TOL:
                    out.append((k, float(vals[i]), vecs[:, i]))
        return out

    def idempotency_defect(self) -> float:
        return max(
            float(np.max(np.abs(B @ B - B))) for B in self.blocks.values()
        )


class ConstraintViolation(ValueError):
    """A density matrix left the constrained set."""


def check_constraints(dm: DensityMatrix, N: float, tol: float = 1e-10) -> dict:
    """Evaluate the constraint residuals; raise ConstraintViolation beyond tol."""
    herm = 0.0
    pos_lo, pos_hi = 0.0, 0.0
    neg_lo, neg_hi = 0.0, 0.0
    cross = 0.0
    for k, B in dm.blocks.items():
        herm = max(herm, float(np.max(np.abs(B - B.T))))
        P = dm.projectors[k].matrix
        Q = np.eye(P.shape[0]) - P
        pos_block = P @ B @ P
        neg_block = Q @ B @ Q
        pv = np.linalg.eigvalsh(0.5 * (pos_block + pos_block.T))
        nv = np.linalg.eigvalsh(0.5 * (neg_block + neg_block.T))
        pos_lo = min(pos_lo, float(pv.min()))
        pos_hi = max(pos_hi, float(pv.max()))
        neg_lo = min(neg_lo, float(nv.min()))
        neg_hi = max(neg_hi, float(nv.max()))
        cross = max(cross, float(np.linalg.norm(P @ B @ Q)))
    trace_excess = dm.trace - N
    report = {
        "hermiticity": herm,
        "positive_block_min": pos_lo,
        "positive_block_max": pos_hi,
        "negative_block_min": neg_lo,
        "negative_block_max": neg_hi,
        "cross_block": cross,
        "trace": dm.trace,
        "trace_excess": trace_excess,
    }
    problems = []
    if herm > 1e-12:
        problems.append(f"hermiticity defect {herm:.2e}")
    if pos_lo < -tol or pos_hi > 1.0 + tol:
        problems.append(f"positive block spectrum [{pos_lo:.2e}, {pos_hi:.2e}]")
    if neg_hi > tol or neg_lo < -1.0 - tol:
        problems.append(f"negative block spectrum [{neg_lo:.2e}, {neg_hi:.2e}]")
    if cross > tol:
        problems.append(f"cross block norm {cross:.2e}")
    if trace_excess > tol:
        problems.append(f"trace {dm.trace} exceeds N={N}")
    if problems:
        raise ConstraintViolation("; ".join(problems))
    return report


def _entries_from_dm(dm: DensityMatrix):
    entries = []
    for k, occ, psi in dm.spectral():
        P, Q = nodal_components(psi, dm.grid)
        entries.append((k, dm.multiplicities[k] * occ, P, Q))
    return entries


def fc_energy(
    dm: DensityMatrix,
    nuclear: NuclearModel,
    c: float,
    validate: bool = True,
    N: float | None = None,
) -> float:
    """Rest-mass-shifted total energy of a density matrix."""
    if validate:
        if N is None:
            N = dm.trace + 1e-9
        check_constraints(dm, N)
    g = dm.grid
    entries = _entries_from_dm(dm)
    if not entries:
        return 0.0
    single = abs(dm.trace - 1.0) < 1e-9 and len(entries) == 1
    cfg = ElectronicConfiguration(
        shells=(), Z=nuclear.Z, c=c, grid=g, nuclear=nuclear, N=0.0
    )
    one_body = 0.0
    for k, w, P, Q in entries:
        band = bare_band(cfg, k)
        psi = np.concatenate(
            [P * np.sqrt(g.node_weights), Q * np.sqrt(g.mid_weights)]
        )
        one_body += w * (band_quadratic_form(band, psi) - c * c)
    direct, exchange = entry_interaction_terms(g, entries, single)
    return one_body + direct - exchange


def configuration_density_matrix(
    config: ElectronicConfiguration, projectors: dict[int, Projector]
) -> DensityMatrix:
    """Recast an orbital configuration as an idempotent density matrix."""
    blocks: dict[int, np.ndarray] = {}
    mult: dict[int, float] = {}
    for s in config.shells:
        psi = config.weighted(s)
        m = 1.0 if config.is_single_electron() else 2.0 * abs(s.kappa)
        mult[s.kappa] = m
        blocks.setdefault(s.kappa, np.zeros((len(psi), len(psi))))
        blocks[s.kappa] += np.outer(psi, psi)
    return DensityMatrix(
        blocks=blocks, multiplicities=mult, projectors=projectors, grid=config.grid
    )


@dataclass
class FixedProjectorResult:
    density_matrix: DensityMatrix
    energy: float
    energy_history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    certificate: dict = field(default_factory=dict)


def minimize_fc_fixed_projector(
    nuclear: NuclearModel,
    shells: list[ShellSpec],
    c: float,
    grid: RadialGrid,
    projectors: dict[int, Projector],
    controls: SCFControls | None = None,
) -> FixedProjectorResult:
    """Minimize the density-matrix energy over the constrained set at fixed
    per-channel projectors, by the damped Aufbau fixed point.

    Each step builds the mean field of the current gamma, compresses it by
    P+, fills the requested shells from the lowest positive compressed
    levels, and mixes.  The returned certificate records the idempotency
    defect, 3D rank and trace, the negative-block norm, the no-pair flag,
    and the binding test (removing the top occupied level must raise the
    energy).
    """
    controls = controls or SCFControls()
    N = _validate_shells(shells, nuclear.Z)
    channels = []
    for s in shells:
        if s.kappa not in channels:
            channels.append(s.kappa)
    specs = {k: sorted([s for s in shells if s.kappa == k], key=lambda x: x.n)
             for k in channels}
    single = len(shells) == 1 and abs(N - 1.0) < 1e-12
    mult = {k: (1.0 if single else 2.0 * abs(k)) for k in channels}
    for k in channels:
        if k not in projectors:
            raise SCFError(f"no projector for channel kappa={k}")

    bases = {}
    for k in channels:
        P = projectors[k]
        if P.basis is not None:
            bases[k] = P.basis
        else:
            vals, vecs = np.linalg.eigh(P.matrix)
            bases[k] = vecs[:, vals > 0.5]

    cfg0 = ElectronicConfiguration(
        shells=(), Z=nuclear.Z, c=c, grid=grid, nuclear=nuclear, N=0.0
    )
    bare = {k: bare_channel(cfg0, k).matrix for k in channels}
    sa = np.sqrt(grid.node_weights)
    sb = np.sqrt(grid.mid_weights)
    M = grid.size

    def aufbau(blocks):
        entries = []
        for k in channels:
            B = blocks[k]
            vals, vecs = np.linalg.eigh(0.5 * (B + B.T))
            for i in range(len(vals)):
                if vals[i] > _OCC_TOL:
                    entries.append(
                        (k, mult[k] * float(vals[i]),
                         vecs[:M, i] / sa, vecs[M:, i] / sb)
                    )
        new_blocks = {}
        for k in channels:
            H = bare[k] + entry_two_body_matrix(grid, entries, k, single)
            U = bases[k]
            Hc = U.T @ (H @ U)
            vals, vecs = np.linalg.eigh(0.5 * (Hc + Hc.T))
            pos = np.where(vals > 0.0)[0]
            if len(pos) < len(specs[k]):
                raise SCFError(
                    f"channel kappa={k}: only {len(pos)} positive compressed "
                    f"levels, {len(specs[k])} shells requested (box too small)"
                )
            Bk = np.zeros((2 * M, 2 * M))
            for i in pos[: len(specs[k])]:
                psi = U @ vecs[:, i]
                Bk += np.outer(psi, psi)
            new_blocks[k] = Bk
        return new_blocks

    blocks = {k: np.zeros((2 * M, 2 * M)) for k in channels}
    blocks = aufbau(blocks)  # first fill from the bare compressed operator
    history = []
    converged = False
    iterations = 0
    theta = controls.mixing
    for it in range(1, controls.max_iter + 1):
        iterations = it
        dm = DensityMatrix(blocks=blocks, multiplicities=mult,
                           projectors=projectors, grid=grid)
        check_constraints(dm, N, tol=1e-9)
        F = fc_energy(dm, nuclear, c, validate=False)
        history.append(F)
        new_blocks = aufbau(blocks)
        delta = max(float(np.max(np.abs(new_blocks[k] - blocks[k]))) for k in channels)
        if delta < 1e-11 and len(history) > 1 and abs(history[-1] - history[-2]) < controls.tol_energy * max(1.0, abs(F)):
            converged = True
            break
        blocks = {
            k: theta * new_blocks[k] + (1 - theta) * blocks[k] for k in channels
        }

    dm = DensityMatrix(blocks=blocks, multiplicities=mult,
                       projectors=projectors, grid=grid)
    F = fc_energy(dm, nuclear, c, validate=False)

    # certificate
    idem = dm.idempotency_defect()
    rank3d = 0.0
    neg_norm = 0.0
    for k, B in dm.blocks.items():
        vals = np.linalg.eigvalsh(0.5 * (B + B.T))
        rank3d += mult[k] * int(np.sum(vals > 0.5))
        P = dm.projectors[k].matrix
        Q = np.eye(P.shape[0]) - P
        neg_norm = max(neg_norm, float(np.linalg.norm(Q @ B @ Q)))
    # binding test: removing the top occupied level must raise the energy
    spectral = dm.spectral()
    binding_ok = True
    if spectral:
        cfg_entries = _entries_from_dm(dm)
        eps_top = None
        top_idx = None
        for i, (k, w, P_, Q_) in enumerate(cfg_entries):
            H = bare[k] + entry_two_body_matrix(grid, cfg_entries, k, single)
            psi = np.concatenate([P_ * sa, Q_ * sb])
            lam = float(psi @ (H @ psi))
            if eps_top is None or lam > eps_top:
                eps_top, top_idx = lam, i
        reduced = [e for i, e in enumerate(cfg_entries) if i != top_idx]
        one_body = 0.0
        for k, w, P_, Q_ in reduced:
            band = bare_band(cfg0, k)
            psi = np.concatenate([P_ * sa, Q_ * sb])
            one_body += w * (band_quadratic_form(band, psi) - c * c)
        d_, x_ = entry_interaction_terms(grid, reduced, single=False)
        F_reduced = one_body + d_ - x_
        binding_ok = F_reduced > F
    certificate = {
        "idempotency_defect": idem,
        "rank": rank3d,
        "trace": dm.trace,
        "negative_block_norm": neg_norm,
        "no_pair": bool(idem < 1e-8 and abs(rank3d - N) < 1e-9 and neg_norm < 1e-10),
        "binding_test": bool(binding_ok),
    }
    return FixedProjectorResult(
        density_matrix=dm,
        energy=F,
        energy_history=history,
        iterations=iterations,
        converged=converged,
        certificate=certificate,
    )


@dataclass
class ProjectorIterationResult:
    converged: bool
    oscillation: bool
    iterations: int
    distances: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    final: FixedProjectorResult = None
    certificate_distance: float = float("nan")
    certified: bool = False
    configuration: ElectronicConfiguration = None


def maxmin_projector_iteration(
    nuclear: NuclearModel,
    shells: list[ShellSpec],
    c: float,
    grid: RadialGrid,
    controls: SCFControls | None = None,
    max_updates: int = 40,
    distance_tol: float = 1e-8,
) -> ProjectorIterationResult:
    """Alternate projector updates with constrained minimizations.

    Psi_t -> P+_t = positive spectral projector of the mean field of Psi_t
    -> gamma_(t+1) = minimizer at fixed P+_t -> Psi_(t+1) = occupied
    orbitals.  Stops when successive projectors agree to distance_tol; the
    certificate then checks that the final projector is the spectral
    projector of the final mean field.  An oscillation (distances not
    decreasing over 10 updates) is reported without a certificate.
    """
    controls = controls or SCFControls()
    N = _validate_shells(shells, nuclear.Z)
    channels = []
    for s in shells:
        if s.kappa not in channels:
            channels.append(s.kappa)
    single = len(shells) == 1 and abs(N - 1.0) < 1e-12

    # start from the screened linear configuration (same guess as scf_solve)
    guess = scf_solve(
        nuclear, shells, c, grid=grid,
        controls=SCFControls(max_iter=1, projector_diagnostics=False),
    )
    config = guess.configuration

    def projectors_of(cfg):
        return {
            k: spectral_projector(mean_field_matrix(cfg, k), 0.0, source="mean_field")
            for k in channels
        }

    projs = projectors_of(config)
    distances, energies = [], []
    oscillation = False
    converged = False
    result = None
    for it in range(1, max_updates + 1):
        result = minimize_fc_fixed_projector(
            nuclear, shells, c, grid, projs, controls=controls
        )
        energies.append(result.energy)
        # occupied orbitals of gamma become the next configuration, labeled
        # in ascending mean-field energy per channel
        occ = []
        for k in channels:
            B = result.density_matrix.blocks[k]
            vals, vecs = np.linalg.eigh(0.5 * (B + B.T))
            filled = np.where(vals > 0.5)[0]
            ch_specs = sorted([s for s in shells if s.kappa == k], key=lambda s: s.n)
            H = mean_field_matrix(config, k).matrix
            energies_k = [float(vecs[:, i] @ (H @ vecs[:, i])) for i in filled]
            order = np.argsort(energies_k)
            M = grid.size
            for spec, j in zip(ch_specs, order):
                psi = vecs[:, filled[j]]
                if psi[np.argmax(np.abs(psi[:M]))] < 0:
                    psi = -psi
                P, Q = nodal_components(psi, grid)
                occ.append(Shell(n=spec.n, kappa=k, w=spec.w, P=P, Q=Q,
                                 eps=float(energies_k[j])))
        config = ElectronicConfiguration(
            shells=tuple(occ), Z=nuclear.Z, c=c, grid=grid, nuclear=nuclear
        )
        new_projs = projectors_of(config)
        d = max(subspace_distance(projs[k], new_projs[k]) for k in channels)
        distances.append(d)
        projs = new_projs
        if d < distance_tol:
            converged = True
            break
        if len(distances) >= 10 and all(
            distances[-i] >= distances[-i - 1] * (1 - 1e-12) for i in range(1, 10)
        ):
            oscillation = True
            break

    # certificate: the projector the last minimization ran at equals the
    # spectral projector of the resulting mean field
    cert_dist = float("nan")
    certified = False
    if converged:
        cert_dist = distances[-1]
        certified = cert_dist < distance_tol
    return ProjectorIterationResult(
        converged=converged,
        oscillation=oscillation,
        iterations=len(distances),
        distances=distances,
        energies=energies,
        final=result,
        certificate_distance=cert_dist,
        certified=certified,
        configuration=config,
    )
