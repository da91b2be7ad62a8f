r"""Self-consistent-field driver for the relativistic closed-shell problem.

Fixed-point iteration with linear mixing of the two-body operator block
(direct potential and exchange kernel together), Aufbau selection of the
occupied orbitals inside the gap (0, c^2), and an optional level shift on
the unoccupied space.  Convergence requires both a relative energy change
below tol_energy and a self-consistency residual ||(H[psi] - eps) psi||
below the orbital tolerance; that tolerance is floored at the attainable
float64 level, which scales with the matrix norm ~ c/h_min.

The one-electron system is linear: direct and exchange cancel identically
on the occupied orbital, so the bare channel is solved with the banded
fast path (values by QR, vectors by inverse iteration) and the loop
terminates after verifying stationarity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import (
    ChannelOperator,
    _inverse_iteration,
    _unpermute_dirac,
    band_apply,
    band_quadratic_form,
    channel_eigensystem,
    nodal_components,
    refine_eigenpair,
)
from .configurations import ElectronicConfiguration, Shell
from .grids import RadialGrid, build_grid
from .meanfield import (
    SUPPORTED_KAPPAS,
    bare_band,
    bare_channel,
    df_energy,
    interaction_terms,
    two_body_matrix,
)
from .potentials import NuclearModel
from scipy.linalg import eig_banded

__all__ = [
    "ShellSpec",
    "SCFControls",
    "SCFReport",
    "SCFError",
    "scf_solve",
    "default_grid",
    "count_nodes",
]


class SCFError(RuntimeError):
    """Raised for unsatisfiable problem specs (occupation, missing gap states)."""


@dataclass(frozen=True)
class ShellSpec:
    """Requested occupied shell: principal label n, channel kappa, occupation w."""

    n: int
    kappa: int
    w: float


@dataclass(frozen=True)
class SCFControls:
    mixing: float = 0.5
    tol_energy: float = 1e-10
    tol_orbital: float = 1e-8
    max_iter: int = 200
    level_shift: float = 0.0
    projector_diagnostics: bool = True


@dataclass
class SCFReport:
    configuration: ElectronicConfiguration
    energy: object
    iterations: int
    energy_history: list = field(default_factory=list)
    orbital_residuals: list = field(default_factory=list)
    lambda_minus_residuals: list = field(default_factory=list)
    converged: bool = False
    effective_tol_orbital: float = 0.0
    controls: SCFControls = None


def default_grid(Z: float, size: int = 2000, r_max: float = 40.0) -> RadialGrid:
    """Default grid: r_min = 1e-6/Z resolves the relativistic inner region."""
    return build_grid("exponential", 1e-6 / Z, r_max, size)


def count_nodes(P: np.ndarray) -> int:
    """Sign changes of the large component, ignoring the tiny tails."""
    thresh = 1e-7 * np.max(np.abs(P))
    sig = P[np.abs(P) > thresh]
    if len(sig) < 2:
        return 0
    return int(np.sum(np.signbit(sig[1:]) != np.signbit(sig[:-1])))


def _validate_shells(shells, Z):
    if not shells:
        raise SCFError("at least one occupied shell is required")
    N = sum(s.w for s in shells)
    if N >= Z + 1:
        raise SCFError(f"need N < Z + 1, got N={N}, Z={Z}")
    single = len(shells) == 1 and abs(N - 1.0) < 1e-12
    for s in shells:
        if s.kappa not in SUPPORTED_KAPPAS:
            raise SCFError(f"unsupported kappa={s.kappa}; v1 supports {SUPPORTED_KAPPAS}")
        if abs(s.w - 2 * abs(s.kappa)) > 1e-12 and not (single and abs(s.w - 1.0) < 1e-12):
            raise SCFError(
                f"occupation must equal 2|kappa|, got w={s.w} for kappa={s.kappa}"
            )
    keys = {(s.n, s.kappa) for s in shells}
    if len(keys) != len(shells):
        raise SCFError("duplicate (n, kappa) shells in the occupation list")
    return N


def _pick_occupied(vals, vec_of, n_needed, c, kappa, M):
    """Aufbau: lowest n_needed eigenpairs in (0, c^2); boundary degeneracies
    resolved by node count of the large component, deeper ties are an error.

    vec_of(i) lazily materializes the i-th eigenvector in block layout.
    """
    gap = np.where((vals > 0.0) & (vals < c * c))[0]
    if len(gap) < n_needed:
        raise SCFError(
            f"channel kappa={kappa}: only {len(gap)} bound levels in (0, c^2) "
            f"but {n_needed} shells requested; enlarge the box or grid"
        )
    idx = list(gap[:n_needed])
    if len(gap) > n_needed:
        nxt = gap[n_needed]
        if abs(vals[nxt] - vals[idx[-1]]) < 1e-9 * c * c:
            cand = [idx[-1], int(nxt)]
            nodes = []
            for i in cand:
                P = vec_of(i)[:M]
                nodes.append(count_nodes(P))
            if nodes[0] == nodes[1]:
                raise SCFError(
                    f"channel kappa={kappa}: degenerate levels with equal node "
                    "count; diagonalization did not converge"
                )
            idx[-1] = cand[int(np.argmin(nodes))]
    return [(float(vals[i]), vec_of(i)) for i in idx]


def _shells_from_pairs(specs, grid, pairs):
    out = []
    M = grid.size
    for spec, (eps, psi) in zip(sorted(specs, key=lambda s: s.n), pairs):
        jmax = np.argmax(np.abs(psi[:M]))
        if psi[jmax] < 0:
            psi = -psi
        P, Q = nodal_components(psi, grid)
        out.append(Shell(n=spec.n, kappa=spec.kappa, w=spec.w, P=P, Q=Q, eps=eps))
    return out


def _solve_channel_banded(band, specs, grid, c, kappa):
    vals = eig_banded(band, lower=False, eigvals_only=True)
    d, e = band[1], band[0, 1:]

    def vec_of(i):
        x = _inverse_iteration(band, vals[i])
        return _unpermute_dirac(x)

    pairs = _pick_occupied(vals, vec_of, len(specs), c, kappa, grid.size)
    # Rayleigh-refine the eigenvalues through the band quadratic form
    refined = []
    for eps, psi in pairs:
        y = np.empty(2 * grid.size)
        y[0::2] = psi[: grid.size]
        y[1::2] = psi[grid.size :]
        refined.append((float(d @ (y * y) + 2.0 * (e @ (y[:-1] * y[1:]))), psi))
    return _shells_from_pairs(specs, grid, refined)


def _solve_channel_dense(H, specs, grid, c, kappa):
    op = ChannelOperator(channel=kappa, kind="mean_field_dirac", matrix=H, grid=grid, c=c)
    vals, vecs = channel_eigensystem(op)
    pairs = _pick_occupied(vals, lambda i: vecs[:, i], len(specs), c, kappa, grid.size)
    # polish away the dense-solver backward error, re-orthonormalizing the
    # refined set (modified Gram-Schmidt preserves the Aufbau order)
    refined = []
    for eps, psi in pairs:
        lam, x = refine_eigenpair(H, psi, eps)
        for _, y in refined:
            x = x - y * (y @ x)
        x /= np.linalg.norm(x)
        refined.append((float(x @ (H @ x)), x))
    return _shells_from_pairs(specs, grid, refined)


def _band_floor(band: np.ndarray, psi_block: np.ndarray) -> float:
    """Attainable float64 residual for this band and this vector."""
    y = np.empty(band.shape[1])
    M = band.shape[1] // 2
    y[0::2] = np.abs(psi_block[:M])
    y[1::2] = np.abs(psi_block[M:])
    d, e = np.abs(band[1]), np.abs(band[0, 1:])
    out = d * y
    out[:-1] += e * y[1:]
    out[1:] += e * y[:-1]
    return 32.0 * np.finfo(float).eps * float(np.linalg.norm(out))


def _orbital_floor(absH: np.ndarray, psi: np.ndarray) -> float:
    """Attainable float64 residual for |H| and this vector."""
    return 32.0 * np.finfo(float).eps * float(np.linalg.norm(absH @ np.abs(psi)))


def scf_solve(
    nuclear: NuclearModel,
    shells: list[ShellSpec],
    c: float,
    grid: RadialGrid | None = None,
    controls: SCFControls | None = None,
) -> SCFReport:
    """Solve the closed-shell mean-field equations on one atom.

    Returns an SCFReport whether or not the iteration converged; inspect
    ``converged``.  Raises SCFError for invalid occupations or when a
    required bound level is missing from the gap.
    """
    controls = controls or SCFControls()
    Z = nuclear.Z
    N = _validate_shells(shells, Z)
    if grid is None:
        grid = default_grid(Z)
    channels = []
    for s in shells:
        if s.kappa not in channels:
            channels.append(s.kappa)
    specs_by_channel = {k: [s for s in shells if s.kappa == k] for k in channels}
    single = len(shells) == 1 and abs(N - 1.0) < 1e-12

    def make_config(occ):
        return ElectronicConfiguration(
            shells=tuple(occ), Z=Z, c=c, grid=grid, nuclear=nuclear
        )

    # screened hydrogenic initial guess (linear problem per channel)
    Zeff = max(Z - (N - 1) / 2.0, 1.0)
    guess_nuc = NuclearModel(Z=Zeff, shape=nuclear.shape, radius=nuclear.radius)
    guess_cfg = ElectronicConfiguration(
        shells=(), Z=Zeff, c=c, grid=grid, nuclear=guess_nuc, N=0.0
    )
    occ = []
    for kappa in channels:
        occ.extend(
            _solve_channel_banded(
                bare_band(guess_cfg, kappa), specs_by_channel[kappa], grid, c, kappa
            )
        )
    config = make_config(occ)

    bands = {k: bare_band(config, k) for k in channels}
    bare = {} if single else {k: bare_channel(config, k).matrix for k in channels}
    TB_mixed: dict[int, np.ndarray] = {}
    history: list[float] = []
    residuals: list[float] = []
    floor = 0.0
    E_prev = None
    converged = False
    iterations = 0

    for it in range(1, controls.max_iter + 1):
        iterations = it
        TB_new = None if single else {k: two_body_matrix(config, k) for k in channels}
        H_self = {} if single else {k: bare[k] + TB_new[k] for k in channels}
        absH = {} if single else {k: np.abs(H_self[k]) for k in channels}
        residuals = []
        floor = 0.0
        one_body = 0.0
        for s in config.shells:
            psi = config.weighted(s)
            one_body += s.w * band_quadratic_form(bands[s.kappa], psi)
            if single:
                Hpsi = band_apply(bands[s.kappa], psi)
                floor = max(floor, _band_floor(bands[s.kappa], psi))
            else:
                Hpsi = H_self[s.kappa] @ psi
                floor = max(floor, _orbital_floor(absH[s.kappa], psi))
            eps = float(psi @ Hpsi)
            residuals.append(float(np.linalg.norm(Hpsi - eps * psi)))
        tol_orb = max(controls.tol_orbital, 4.0 * floor)
        direct, exchange = interaction_terms(config)
        E = one_body + direct - exchange
        history.append(E)
        if E_prev is not None:
            if (
                abs(E - E_prev) < controls.tol_energy * max(1.0, abs(E - N * c * c))
                and max(residuals) < tol_orb
            ):
                converged = True
                break
        E_prev = E

        occ = []
        for kappa in channels:
            if single:
                occ.extend(
                    _solve_channel_banded(
                        bands[kappa], specs_by_channel[kappa], grid, c, kappa
                    )
                )
                continue
            if kappa in TB_mixed:
                TB_mixed[kappa] = (
                    controls.mixing * TB_new[kappa]
                    + (1 - controls.mixing) * TB_mixed[kappa]
                )
            else:
                TB_mixed[kappa] = TB_new[kappa]
            H = bare[kappa] + TB_mixed[kappa]
            if controls.level_shift:
                Pocc = np.zeros_like(H)
                for s in config.shells:
                    if s.kappa == kappa:
                        psi = config.weighted(s)
                        Pocc += np.outer(psi, psi)
                H = H + controls.level_shift * (np.eye(H.shape[0]) - Pocc)
            occ.extend(_solve_channel_dense(H, specs_by_channel[kappa], grid, c, kappa))
        config = make_config(occ)

    energy = df_energy(config)
    lam_res = []
    if controls.projector_diagnostics and not single:
        from .projectors import lambda_minus_residual

        lam_res = list(lambda_minus_residual(config))
    return SCFReport(
        configuration=config,
        energy=energy,
        iterations=iterations,
        energy_history=history,
        orbital_residuals=residuals,
        lambda_minus_residuals=lam_res,
        converged=converged,
        effective_tol_orbital=max(controls.tol_orbital, 4.0 * floor),
        controls=controls,
    )
