r"""Heavy-c limit study: pairing the relativistic and nonrelativistic
solvers on one grid and fitting the approach rates.

Per-shell pairing maps kappa = -1 to l = 0 and kappa in (+1, -2) to l = 1.
Running both solvers with the same discretization (the Schroedinger kinetic
is the exact Schur limit of the Dirac channel) makes the energy differences
pure relativistic physics:

    |E_rel - N c^2 - E_nonrel|  ~ c^-2,
    |eps_k - c^2 - lambda_k|    ~ c^-2,
    ||Q + small-component defect|| ~ c^-3   (kinetic-balance residual),
    ||Q||                        ~ c^-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .angular import kappa_to_l
from .channels import _derivative_arrays
from .configurations import ElectronicConfiguration
from .grids import RadialGrid
from .hartreefock import NonrelShellSpec, hf_scf
from .potentials import NuclearModel
from .scf import SCFControls, SCFError, ShellSpec, scf_solve

__all__ = [
    "LimitRow",
    "LimitTable",
    "kinetic_balance_residual",
    "limit_study",
    "pair_shells",
]


@dataclass(frozen=True)
class LimitRow:
    c: float
    E_shifted: float
    eps_shifted: tuple
    kb_residuals: tuple
    small_norms: tuple
    large_distances: tuple
    E_hf: float
    hf_multipliers: tuple


@dataclass
class LimitTable:
    rows: list[LimitRow] = field(default_factory=list)
    shell_labels: list[str] = field(default_factory=list)
    energy_slope: float = float("nan")
    multiplier_slopes: list = field(default_factory=list)
    kb_slopes: list = field(default_factory=list)
    small_norm_slopes: list = field(default_factory=list)

    def csv_rows(self):
        header = ["c", "E_minus_Nc2", "E_hf"]
        for lab in self.shell_labels:
            header += [f"eps_minus_c2[{lab}]", f"lambda_hf[{lab}]",
                       f"kb_residual[{lab}]", f"small_norm[{lab}]",
                       f"large_distance[{lab}]"]
        out = [header]
        for r in self.rows:
            row = [r.c, r.E_shifted, r.E_hf]
            for i in range(len(self.shell_labels)):
                row += [r.eps_shifted[i], r.hf_multipliers[i], r.kb_residuals[i],
                        r.small_norms[i], r.large_distances[i]]
            out.append(row)
        return out


def kinetic_balance_residual(config: ElectronicConfiguration) -> np.ndarray:
    """Per-shell L2 norm of the small-component defect
    Q - (1/2c)(d/dr + kappa/r) P (our spinor sign convention makes the
    leading balance Q = +(1/2c)(d/dr + kappa/r)P; the defect is O(c^-3))."""
    g = config.grid
    out = []
    for s in config.shells:
        diag, sup = _derivative_arrays(g, s.kappa)
        Pt = s.P * np.sqrt(g.node_weights)
        BP = diag * Pt
        BP[:-1] += sup * Pt[1:]
        Qt = s.Q * np.sqrt(g.mid_weights)
        out.append(float(np.linalg.norm(Qt - BP / (2.0 * config.c))))
    return np.array(out)


def pair_shells(rel_shells: list[ShellSpec]) -> list[NonrelShellSpec]:
    """Nonrelativistic partners of the relativistic shells: same n, with
    l from kappa; shells mapping to the same (n, l) merge occupations."""
    merged: dict[tuple, float] = {}
    for s in rel_shells:
        key = (s.n, kappa_to_l(s.kappa))
        merged[key] = merged.get(key, 0.0) + s.w
    out = []
    for (n, l), w in sorted(merged.items()):
        full = 2 * (2 * l + 1)
        if abs(w - full) > 1e-12 and not (len(merged) == 1 and abs(w - 1.0) < 1e-12):
            raise SCFError(
                f"relativistic shells pairing to (n={n}, l={l}) carry w={w}, "
                f"but the nonrelativistic closed shell needs {full}"
            )
        out.append(NonrelShellSpec(n=n, l=l, w=w))
    return out


def _loglog_slope(x, y):
    y = np.abs(np.asarray(y, dtype=float))
    if np.any(y <= 0):
        return float("nan")
    return float(np.polyfit(np.log(np.asarray(x)), np.log(y), 1)[0])


def limit_study(
    nuclear: NuclearModel,
    rel_shells: list[ShellSpec],
    c0: float,
    factors,
    grid: RadialGrid,
    controls: SCFControls | None = None,
) -> LimitTable:
    """Run the relativistic solver at c = c0 * factor for each factor and the
    nonrelativistic solver once, on the same grid; abort (no partial table)
    if any member run fails to converge."""
    factors = sorted(float(f) for f in factors)
    if not factors or factors[0] < 1.0:
        raise ValueError("c_factors must be >= 1, ascending")
    controls = controls or SCFControls(projector_diagnostics=False)
    nrel = pair_shells(rel_shells)
    hf_rep = hf_scf(nuclear, nrel, grid, controls=controls)
    if not hf_rep.converged:
        raise SCFError("nonrelativistic reference run did not converge")
    hf_shells = {(s.n, s.l): s for s in hf_rep.configuration.shells}

    order = sorted(rel_shells, key=lambda s: (s.n, s.kappa))
    labels = [f"n{s.n}k{s.kappa}" for s in order]
    rows = []
    for f in factors:
        c = c0 * f
        rep = scf_solve(nuclear, rel_shells, c, grid=grid, controls=controls)
        if not rep.converged:
            raise SCFError(f"relativistic run at c factor {f} did not converge")
        cfg = rep.configuration
        kb = kinetic_balance_residual(cfg)
        by_key = {(s.n, s.kappa): i for i, s in enumerate(cfg.shells)}
        eps, kbr, smalls, dists, lams = [], [], [], [], []
        for s in order:
            i = by_key[(s.n, s.kappa)]
            sh = cfg.shells[i]
            eps.append(sh.eps - c * c)
            kbr.append(kb[i])
            qn = float(np.sqrt(np.sum(grid.mid_weights * sh.Q**2)))
            smalls.append(qn)
            partner = hf_shells[(s.n, kappa_to_l(s.kappa))]
            Pn = sh.P / np.sqrt(np.sum(grid.node_weights * sh.P**2))
            sgn = 1.0 if float(np.sum(grid.node_weights * Pn * partner.u)) >= 0 else -1.0
            dists.append(
                float(np.sqrt(np.sum(grid.node_weights * (sgn * Pn - partner.u) ** 2)))
            )
            lams.append(partner.eps)
        rows.append(
            LimitRow(
                c=c,
                E_shifted=rep.energy.shifted,
                eps_shifted=tuple(eps),
                kb_residuals=tuple(kbr),
                small_norms=tuple(smalls),
                large_distances=tuple(dists),
                E_hf=hf_rep.energy.total,
                hf_multipliers=tuple(lams),
            )
        )

    cs = [r.c for r in rows]
    table = LimitTable(rows=rows, shell_labels=labels)
    table.energy_slope = _loglog_slope(cs, [r.E_shifted - r.E_hf for r in rows])
    nsh = len(labels)
    table.multiplier_slopes = [
        _loglog_slope(cs, [r.eps_shifted[i] - r.hf_multipliers[i] for r in rows])
        for i in range(nsh)
    ]
    table.kb_slopes = [
        _loglog_slope(cs, [r.kb_residuals[i] for r in rows]) for i in range(nsh)
    ]
    table.small_norm_slopes = [
        _loglog_slope(cs, [r.small_norms[i] for r in rows]) for i in range(nsh)
    ]
    return table
