r"""Command-line entry point.

    df-atoms <mode> --config <path> [--out <path>] [--format json|csv]
             [--c-factors 1,2,4,8]

Exit codes: 0 converged, 2 not converged, 3 invalid config, 4 solver domain
error.
"""

from __future__ import annotations

import argparse
import sys

from .conditions import NeutralityError
from .minmax import MinMaxDivergence
from .projectors import ThresholdCollisionError
from .runconfig import MODES, ConfigError, parse_config
from .scf import SCFError

__all__ = ["main"]


def _build_parser():
    p = argparse.ArgumentParser(
        prog="df-atoms",
        description="Radial solvers for relativistic and nonrelativistic "
        "closed-shell atoms, with projector diagnostics and density-matrix "
        "models.",
    )
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", required=True, help="path to the JSON run configuration")
    p.add_argument("--out", default=None, help="report path (default: stdout)")
    p.add_argument(
        "--format", dest="fmt", choices=("json", "csv"), default=None,
        help="report format override",
    )
    p.add_argument(
        "--c-factors", default=None,
        help="comma-separated ascending factors for limit studies",
    )
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 3
    try:
        import json

        from .runconfig import serialize_config

        doc = json.loads(text)
        if not isinstance(doc, dict):
            raise ConfigError("top level: expected an object")
        doc["mode"] = args.mode
        if args.c_factors:
            doc["c_factors"] = [float(x) for x in args.c_factors.split(",")]
        if args.fmt:
            doc.setdefault("output", {})["format"] = args.fmt
        config = parse_config(doc)
    except (ConfigError, NeutralityError, ValueError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 3
    except json.JSONDecodeError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 3

    from .reports import run, write_csv, write_report, dump_json

    try:
        document = run(config)
    except (ConfigError, NeutralityError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 3
    except (SCFError, MinMaxDivergence, ThresholdCollisionError, ValueError) as exc:
        print(f"error: solver domain error: {exc}", file=sys.stderr)
        return 4

    csv_rows = document.pop("_csv_rows", None)
    out_path = args.out or config.output.path
    fmt = args.fmt or config.output.format
    if out_path:
        write_report(document, out_path)
        if csv_rows is not None and (fmt == "csv" or config.mode == "limit-study"):
            write_csv(csv_rows, out_path + ".csv")
        print(out_path)
    else:
        print(dump_json(document))

    converged = bool(document["results"].get("converged", True))
    return 0 if converged else 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
