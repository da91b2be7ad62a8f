r"""Mode dispatch and report serialization.

Every run emits one JSON document tagged "dfatoms-report/1" containing the
config echo (defaults applied), the hypothesis flags, the mode's results
with convergence histories, and the wall clock.  Numbers are written with
17 significant digits (float64 round-trip); writes are atomic (temp file +
rename).  Limit tables can additionally be written as CSV sidecars.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time

import numpy as np

from .conditions import validate_conditions
from .configurations import ElectronicConfiguration
from .fockspace import maxmin_projector_iteration, minimize_fc_fixed_projector
from .grids import build_grid
from .hartreefock import NonrelShellSpec, default_nonrel_grid, hf_scf
from .limits import limit_study
from .minmax import maxmin_energy
from .oracles import oracle_sommerfeld
from .potentials import NuclearModel
from .projected import projected_scf
from .projectors import Projector, free_positive_projector, spectral_projector
from .runconfig import RunConfig, serialize_config
from .scf import SCFControls, ShellSpec, scf_solve

__all__ = [
    "REPORT_FORMAT",
    "run",
    "dump_json",
    "write_report",
    "write_csv",
    "save_projectors",
    "load_projectors",
    "density_matrix_document",
]

REPORT_FORMAT = "dfatoms-report/1"


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x) or math.isinf(x):
            return "null"
        return format(x, ".17g")
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    raise TypeError(f"unsupported scalar {type(x)}")


def dump_json(obj, indent: int = 0) -> str:
    """Serialize with 17-significant-digit floats (nan/inf become null)."""
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for k, v in obj.items():
            items.append(f'{pad}  {json.dumps(str(k))}: {dump_json(v, indent + 2)}')
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        scalars = all(
            isinstance(v, (int, float, bool, np.integer, np.floating)) for v in seq
        )
        if scalars:
            return "[" + ", ".join(_fmt(float(v) if isinstance(v, (float, np.floating)) else v) for v in seq) + "]"
        items = [f"{pad}  {dump_json(v, indent + 2)}" for v in seq]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (np.floating,)):
        return _fmt(float(obj))
    return _fmt(obj)


def write_report(document: dict, path: str) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    text = dump_json(document) + "\n"
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".dfatoms-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(rows, path: str) -> None:
    import csv

    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".dfatoms-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            for row in rows:
                writer.writerow(
                    [format(v, ".17g") if isinstance(v, float) else v for v in row]
                )
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_projectors(projectors: dict[int, Projector], path: str) -> None:
    """Spectral-basis export in the report container format."""
    doc = {
        "format": REPORT_FORMAT,
        "kind": "projectors",
        "projectors": [
            {
                "kappa": int(k),
                "rank": int(P.rank),
                "source": P.source,
                "basis": P.basis if P.basis is not None else _basis_of(P),
            }
            for k, P in sorted(projectors.items())
        ],
    }
    write_report(doc, path)


def _basis_of(P: Projector) -> np.ndarray:
    vals, vecs = np.linalg.eigh(P.matrix)
    return vecs[:, vals > 0.5]


def load_projectors(path: str) -> dict[int, Projector]:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("kind") != "projectors":
        raise ValueError(f"{path}: not a projector container")
    out = {}
    for item in doc["projectors"]:
        U = np.array(item["basis"], dtype=float)
        out[int(item["kappa"])] = Projector(
            channel=int(item["kappa"]),
            matrix=U @ U.T,
            rank=int(item["rank"]),
            source="file",
            basis=U,
        )
    return out


def density_matrix_document(dm) -> dict:
    """Spectral form: per-channel occupations and orbitals."""
    channels = []
    for k in sorted(dm.blocks):
        vals, vecs = np.linalg.eigh(0.5 * (dm.blocks[k] + dm.blocks[k].T))
        keep = vals > 1e-10
        channels.append(
            {
                "kappa": int(k),
                "multiplicity": dm.multiplicities[k],
                "occupations": vals[keep],
                "orbitals": vecs[:, keep].T,
            }
        )
    return {"trace": dm.trace, "channels": channels}


def _grid_for(config: RunConfig):
    r_min = config.grid.r_min if config.grid.r_min is not None else 1e-6 / config.Z
    return build_grid("exponential", r_min, config.grid.r_max, config.grid.size)


def _controls_for(config: RunConfig) -> SCFControls:
    s = config.scf
    return SCFControls(
        mixing=s.mixing,
        tol_energy=s.tol_energy,
        tol_orbital=s.tol_orbital,
        max_iter=s.max_iter,
        level_shift=s.level_shift,
    )


def _shell_specs(config: RunConfig):
    return [ShellSpec(n=s["n"], kappa=s["kappa"], w=s["w"]) for s in config.shells]


def _nonrel_specs(config: RunConfig):
    return [NonrelShellSpec(n=s["n"], l=s["l"], w=s["w"]) for s in config.nonrel_shells]


def _energy_block(energy) -> dict:
    return {
        "total": energy.total,
        "shifted": energy.shifted,
        "one_body": energy.one_body,
        "direct": energy.direct,
        "exchange": energy.exchange,
        "eigenvalue_sum": energy.eigenvalue_sum,
    }


def _scf_block(rep, c: float | None = None) -> dict:
    shells = []
    for s in rep.configuration.shells:
        entry = {"n": s.n, "w": s.w, "eps": s.eps}
        if hasattr(s, "kappa"):
            entry["kappa"] = s.kappa
            entry["label"] = s.label
            if c is not None:
                entry["eps_shifted"] = s.eps - c * c
        else:
            entry["l"] = s.l
        shells.append(entry)
    return {
        "converged": rep.converged,
        "iterations": rep.iterations,
        "energy": _energy_block(rep.energy),
        "shells": shells,
        "energy_history": rep.energy_history,
        "orbital_residuals": rep.orbital_residuals,
        "lambda_minus_residuals": rep.lambda_minus_residuals,
        "effective_tol_orbital": rep.effective_tol_orbital,
    }


def run(config: RunConfig) -> dict:
    """Dispatch one configured run and assemble the report document."""
    t0 = time.perf_counter()
    nuclear = NuclearModel(
        Z=config.Z, shape=config.nuclear.shape, radius=config.nuclear.radius
    )
    results: dict = {}
    csv_rows = None
    N = config.N
    hypotheses = None
    if N:
        hypotheses = validate_conditions(config.Z, N, config.c).as_dict()

    if config.mode == "solve":
        rep = scf_solve(
            nuclear, _shell_specs(config), config.c,
            grid=_grid_for(config), controls=_controls_for(config),
        )
        results = _scf_block(rep, config.c)
    elif config.mode == "hf-solve":
        grid = (
            _grid_for(config)
            if config.grid.r_min is not None
            else default_nonrel_grid(config.Z, config.grid.size, config.grid.r_max)
        )
        rep = hf_scf(nuclear, _nonrel_specs(config), grid, controls=_controls_for(config))
        results = _scf_block(rep)
    elif config.mode == "limit-study":
        grid = (
            _grid_for(config)
            if config.grid.r_min is not None
            else default_nonrel_grid(config.Z, config.grid.size, config.grid.r_max)
        )
        table = limit_study(
            nuclear, _shell_specs(config), config.c, config.c_factors, grid,
            controls=_controls_for(config),
        )
        results = {
            "converged": True,
            "shell_labels": table.shell_labels,
            "rows": [
                {
                    "c": r.c,
                    "E_minus_Nc2": r.E_shifted,
                    "eps_minus_c2": r.eps_shifted,
                    "kb_residuals": r.kb_residuals,
                    "small_norms": r.small_norms,
                    "large_distances": r.large_distances,
                    "E_hf": r.E_hf,
                    "hf_multipliers": r.hf_multipliers,
                }
                for r in table.rows
            ],
            "energy_slope": table.energy_slope,
            "multiplier_slopes": table.multiplier_slopes,
            "kb_slopes": table.kb_slopes,
            "small_norm_slopes": table.small_norm_slopes,
        }
        csv_rows = table.csv_rows()
    elif config.mode == "projected-solve":
        grid = _grid_for(config)
        projectors = None
        if config.projector.source == "file":
            projectors = load_projectors(config.projector.path)
        rep = projected_scf(
            nuclear, _shell_specs(config), config.c, grid,
            source=config.projector.source, projectors=projectors,
            controls=_controls_for(config),
        )
        results = _scf_block(rep, config.c)
        results["projector_source"] = rep.projector_source
        results["range_defects"] = rep.range_defects
    elif config.mode == "maxmin-energy":
        grid = build_grid(
            "exponential", config.minmax.r_min, config.minmax.r_max,
            config.minmax.grid_size,
        )
        projectors = None
        if config.projector.source == "file":
            projectors = load_projectors(config.projector.path)
        rep = maxmin_energy(
            nuclear, _shell_specs(config), config.c, grid,
            source=config.projector.source, projectors=projectors,
        )
        results = {
            "converged": rep.converged,
            "E_outer": rep.E_outer,
            "E_outer_shifted": rep.E_outer - N * config.c**2,
            "E_scf": rep.E_scf,
            "gap_to_scf": rep.gap_to_scf,
            "projector_source": rep.projector_source,
            "outer_iterates": rep.outer_iterates,
            "inner_sup_values": rep.inner_sup_values,
            "restarts": rep.restarts,
        }
    elif config.mode == "fock-minimize":
        grid = _grid_for(config)
        specs = _shell_specs(config)
        channels = sorted({s.kappa for s in specs})
        if config.projector.source == "file":
            projs = load_projectors(config.projector.path)
        elif config.projector.source == "free":
            projs = {k: free_positive_projector(k, config.c, grid) for k in channels}
        else:
            from .meanfield import mean_field_matrix

            base = scf_solve(nuclear, specs, config.c, grid=grid,
                             controls=_controls_for(config))
            projs = {
                k: spectral_projector(
                    mean_field_matrix(base.configuration, k), 0.0, "mean_field"
                )
                for k in channels
            }
        res = minimize_fc_fixed_projector(
            nuclear, specs, config.c, grid, projs, controls=_controls_for(config)
        )
        results = {
            "converged": res.converged,
            "energy": res.energy,
            "iterations": res.iterations,
            "energy_history": res.energy_history,
            "certificate": res.certificate,
            "projector_source": config.projector.source,
            "density_matrix": density_matrix_document(res.density_matrix),
        }
    elif config.mode == "projector-iteration":
        grid = _grid_for(config)
        res = maxmin_projector_iteration(
            nuclear, _shell_specs(config), config.c, grid,
            controls=_controls_for(config),
        )
        results = {
            "converged": res.converged,
            "oscillation": res.oscillation,
            "iterations": res.iterations,
            "distances": res.distances,
            "energies": res.energies,
            "certified": res.certified,
            "certificate_distance": res.certificate_distance,
            "certificate": res.final.certificate if res.final else {},
        }
    elif config.mode == "oracle-sommerfeld":
        o = config.oracle
        E = oracle_sommerfeld(o.Z, o.kappa, o.n, config.c)
        results = {
            "converged": True,
            "E": E,
            "E_minus_c2": E - config.c**2,
            "Z": o.Z,
            "kappa": o.kappa,
            "n": o.n,
        }
    else:  # pragma: no cover - parse_config restricts modes
        raise ValueError(f"unknown mode {config.mode!r}")

    document = {
        "format": REPORT_FORMAT,
        "config": serialize_config(config),
        "hypotheses": hypotheses,
        "results": results,
        "wall_clock_seconds": time.perf_counter() - t0,
    }
    if csv_rows is not None:
        # sidecar data; the CLI pops this before writing the JSON document
        document["_csv_rows"] = csv_rows
    return document
