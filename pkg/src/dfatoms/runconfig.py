r"""Run-configuration schema: strict parsing with path-precise errors.

The document is UTF-8 JSON, schema tag "dfatoms-config/1".  Unknown keys are
rejected anywhere in the tree (silent typos in physics parameters are the
dominant user error).  Defaults are applied at parse time and echoed into
the output report, so a report always carries the exact numbers that ran.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .conditions import NeutralityError

__all__ = ["ConfigError", "RunConfig", "parse_config", "serialize_config", "C_DEFAULT"]

C_DEFAULT = 137.035999084
SCHEMA = "dfatoms-config/1"

MODES = (
    "solve",
    "hf-solve",
    "limit-study",
    "projected-solve",
    "maxmin-energy",
    "fock-minimize",
    "projector-iteration",
    "oracle-sommerfeld",
)


class ConfigError(ValueError):
    """Schema violation, with the JSON path of the offending entry."""


@dataclass(frozen=True)
class GridSpec:
    r_min: float | None = None  # None -> 1e-6/Z
    r_max: float = 40.0
    size: int = 2000


@dataclass(frozen=True)
class ScfSpec:
    mixing: float = 0.5
    tol_energy: float = 1e-10
    tol_orbital: float = 1e-8
    max_iter: int = 200
    level_shift: float = 0.0


@dataclass(frozen=True)
class NuclearSpec:
    shape: str = "point"
    radius: float | None = None


@dataclass(frozen=True)
class ProjectorSpec:
    source: str = "free"
    path: str | None = None


@dataclass(frozen=True)
class MinmaxSpec:
    grid_size: int = 80
    r_min: float = 5e-4
    r_max: float = 30.0


@dataclass(frozen=True)
class OracleSpec:
    Z: float = 1.0
    kappa: int = -1
    n: int = 1


@dataclass(frozen=True)
class OutputSpec:
    format: str = "json"
    path: str | None = None


@dataclass(frozen=True)
class RunConfig:
    mode: str
    Z: float
    shells: tuple = ()
    nonrel_shells: tuple = ()
    c: float = C_DEFAULT
    c_factors: tuple = (1.0, 2.0, 4.0, 8.0)
    nuclear: NuclearSpec = field(default_factory=NuclearSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    scf: ScfSpec = field(default_factory=ScfSpec)
    projector: ProjectorSpec = field(default_factory=ProjectorSpec)
    minmax: MinmaxSpec = field(default_factory=MinmaxSpec)
    oracle: OracleSpec = field(default_factory=OracleSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    @property
    def N(self) -> float:
        return sum(s["w"] for s in self.shells) or sum(
            s["w"] for s in self.nonrel_shells
        )


def _want(d, path, allowed):
    for key in d:
        if key not in allowed:
            raise ConfigError(f"{path}: unknown key {key!r} (allowed: {sorted(allowed)})")


def _num(d, key, path, default=None, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}: required")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {type(v).__name__}")
    return float(v)


def _int(d, key, path, default=None, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}: required")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key}: expected an integer, got {type(v).__name__}")
    return int(v)


def _str(d, key, path, default=None, choices=None):
    if key not in d:
        return default
    v = d[key]
    if not isinstance(v, str):
        raise ConfigError(f"{path}.{key}: expected a string")
    if choices and v not in choices:
        raise ConfigError(f"{path}.{key}: {v!r} not one of {choices}")
    return v


def _parse_shell(item, i, relativistic):
    path = f"shells[{i}]" if relativistic else f"nonrel_shells[{i}]"
    if not isinstance(item, dict):
        raise ConfigError(f"{path}: expected an object")
    if relativistic:
        _want(item, path, {"n", "kappa", "w"})
        n = _int(item, "n", path, required=True)
        kappa = _int(item, "kappa", path, required=True)
        w = _num(item, "w", path, required=True)
        if kappa == 0:
            raise ConfigError(f"{path}.kappa: must be nonzero")
        if n < abs(kappa) or (kappa > 0 and n == kappa):
            raise ConfigError(f"{path}: no shell n={n} in channel kappa={kappa}")
        return {"n": n, "kappa": kappa, "w": w}
    _want(item, path, {"n", "l", "w"})
    n = _int(item, "n", path, required=True)
    l = _int(item, "l", path, required=True)
    w = _num(item, "w", path, required=True)
    if l < 0 or n < l + 1:
        raise ConfigError(f"{path}: invalid (n={n}, l={l})")
    return {"n": n, "l": l, "w": w}


def parse_config(document) -> RunConfig:
    """Parse and validate a configuration document (JSON text or dict)."""
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    else:
        doc = document
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected an object")
    allowed = {
        "schema", "mode", "Z", "shells", "nonrel_shells", "c", "c_factors",
        "nuclear", "grid", "scf", "projector", "minmax", "oracle", "output",
    }
    _want(doc, "top level", allowed)
    schema = _str(doc, "schema", "top level", default=SCHEMA)
    if schema != SCHEMA:
        raise ConfigError(f"schema: expected {SCHEMA!r}, got {schema!r}")
    mode = _str(doc, "mode", "top level", choices=MODES)
    if mode is None:
        raise ConfigError("mode: required")
    Z = _num(doc, "Z", "top level", required=True)
    if Z <= 0:
        raise ConfigError("Z: must be positive")

    shells = tuple(
        _parse_shell(item, i, True) for i, item in enumerate(doc.get("shells", []))
    )
    nonrel = tuple(
        _parse_shell(item, i, False)
        for i, item in enumerate(doc.get("nonrel_shells", []))
    )
    single = len(shells) == 1 and abs(shells[0]["w"] - 1.0) < 1e-12
    for i, s in enumerate(shells):
        if abs(s["w"] - 2 * abs(s["kappa"])) > 1e-12 and not single:
            raise ConfigError(
                f"shells[{i}].w: occupation must equal 2|kappa| "
                f"(= {2 * abs(s['kappa'])}), got {s['w']}"
            )
    single_nr = len(nonrel) == 1 and abs(nonrel[0]["w"] - 1.0) < 1e-12
    for i, s in enumerate(nonrel):
        if abs(s["w"] - 2 * (2 * s["l"] + 1)) > 1e-12 and not single_nr:
            raise ConfigError(
                f"nonrel_shells[{i}].w: occupation must equal 2(2l+1) "
                f"(= {2 * (2 * s['l'] + 1)}), got {s['w']}"
            )
    N = sum(s["w"] for s in shells) or sum(s["w"] for s in nonrel)
    if N and N >= Z + 1:
        raise NeutralityError(f"N={N} electrons with Z={Z}: need N < Z + 1")

    c = _num(doc, "c", "top level", default=C_DEFAULT)
    if c <= 0:
        raise ConfigError("c: must be positive")
    cf = doc.get("c_factors", [1.0, 2.0, 4.0, 8.0])
    if not isinstance(cf, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in cf
    ):
        raise ConfigError("c_factors: expected a list of numbers")
    cf = tuple(float(x) for x in cf)
    if cf and (sorted(cf) != list(cf) or cf[0] < 1.0):
        raise ConfigError("c_factors: must be ascending and >= 1")

    nuc = doc.get("nuclear", {})
    _want(nuc, "nuclear", {"shape", "radius"})
    shape = _str(nuc, "shape", "nuclear", default="point",
                 choices=("point", "uniform_sphere"))
    radius = _num(nuc, "radius", "nuclear")
    if shape == "uniform_sphere" and (radius is None or radius <= 0):
        raise ConfigError("nuclear.radius: required and positive for uniform_sphere")

    gd = doc.get("grid", {})
    _want(gd, "grid", {"r_min", "r_max", "size"})
    grid = GridSpec(
        r_min=_num(gd, "r_min", "grid"),
        r_max=_num(gd, "r_max", "grid", default=40.0),
        size=_int(gd, "size", "grid", default=2000),
    )
    if grid.size < 16:
        raise ConfigError("grid.size: need at least 16 nodes")

    sd = doc.get("scf", {})
    _want(sd, "scf", {"mixing", "tol_energy", "tol_orbital", "max_iter", "level_shift"})
    scf = ScfSpec(
        mixing=_num(sd, "mixing", "scf", default=0.5),
        tol_energy=_num(sd, "tol_energy", "scf", default=1e-10),
        tol_orbital=_num(sd, "tol_orbital", "scf", default=1e-8),
        max_iter=_int(sd, "max_iter", "scf", default=200),
        level_shift=_num(sd, "level_shift", "scf", default=0.0),
    )
    if not (0 < scf.mixing <= 1):
        raise ConfigError("scf.mixing: must be in (0, 1]")

    pd = doc.get("projector", {})
    _want(pd, "projector", {"source", "path"})
    projector = ProjectorSpec(
        source=_str(pd, "source", "projector", default="free",
                    choices=("free", "mean_field", "file")),
        path=_str(pd, "path", "projector"),
    )
    if projector.source == "file" and not projector.path:
        raise ConfigError("projector.path: required for source='file'")

    md = doc.get("minmax", {})
    _want(md, "minmax", {"grid_size", "r_min", "r_max"})
    minmax = MinmaxSpec(
        grid_size=_int(md, "grid_size", "minmax", default=80),
        r_min=_num(md, "r_min", "minmax", default=5e-4),
        r_max=_num(md, "r_max", "minmax", default=30.0),
    )
    if minmax.grid_size > 120:
        raise ConfigError("minmax.grid_size: coarse-grid tool, need size <= 120")

    od = doc.get("oracle", {})
    _want(od, "oracle", {"Z", "kappa", "n"})
    oracle = OracleSpec(
        Z=_num(od, "Z", "oracle", default=Z),
        kappa=_int(od, "kappa", "oracle", default=-1),
        n=_int(od, "n", "oracle", default=1),
    )

    out = doc.get("output", {})
    _want(out, "output", {"format", "path"})
    output = OutputSpec(
        format=_str(out, "format", "output", default="json", choices=("json", "csv")),
        path=_str(out, "path", "output"),
    )

    # per-mode requirements
    if mode in ("solve", "projected-solve", "maxmin-energy", "fock-minimize",
                "projector-iteration", "limit-study") and not shells:
        raise ConfigError(f"shells: required for mode {mode!r}")
    if mode == "hf-solve" and not nonrel:
        raise ConfigError("nonrel_shells: required for mode 'hf-solve'")

    return RunConfig(
        mode=mode,
        Z=Z,
        shells=shells,
        nonrel_shells=nonrel,
        c=c,
        c_factors=cf,
        nuclear=NuclearSpec(shape=shape, radius=radius),
        grid=grid,
        scf=scf,
        projector=projector,
        minmax=minmax,
        oracle=oracle,
        output=output,
    )


def serialize_config(config: RunConfig) -> dict:
    """Round-trippable document with all defaults made explicit."""
    return {
        "schema": SCHEMA,
        "mode": config.mode,
        "Z": config.Z,
        "shells": [dict(s) for s in config.shells],
        "nonrel_shells": [dict(s) for s in config.nonrel_shells],
        "c": config.c,
        "c_factors": list(config.c_factors),
        "nuclear": asdict(config.nuclear),
        "grid": asdict(config.grid),
        "scf": asdict(config.scf),
        "projector": asdict(config.projector),
        "minmax": asdict(config.minmax),
        "oracle": asdict(config.oracle),
        "output": asdict(config.output),
    }
