"""``ncwave`` command line.

Exit codes: 0 all assertions pass, 1 some assertion fails, 2 invalid
configuration, 3 numerical divergence (series outside its radius, pole hit,
unresolved quadrature).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .born import PoleError, SeriesDivergenceError
from .config import SUBCOMMANDS, ConfigError, load_config, schema_document
from .experiments import run_experiment
from .green import BoundaryContaminationError
from .io import write_json, write_table
from .kernels import UnresolvedQuadratureError

__all__ = ["main", "build_parser", "run"]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DIVERGENCE = 0, 1, 2, 3

log = logging.getLogger("ncwave")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ncwave", description="Experiments for wave equations with non-local kernel potentials.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, default=None, help="TOML file merged over the shipped default")
        s.add_argument("--out", type=Path, default=None, help="output directory (default ./ncwave-out/<command>)")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--jobs", type=int, default=1)
        s.add_argument("--tolerance-scale", type=float, default=1.0)
        s.add_argument("-q", "--quiet", action="store_true")
    sub.add_parser("schema", help="print the config and report schema as JSON")
    return p


def _error(out: Path, kind: str, payload: dict, code: int) -> int:
    body = {"error": kind, **payload}
    write_json(out / "error.json", body)
    print(json.dumps(body, sort_keys=True), file=sys.stderr)
    return code


def run(command: str, config=None, out=None, seed=None, jobs=1, tolerance_scale=1.0) -> int:
    out = Path(out) if out is not None else Path("ncwave-out") / command
    if tolerance_scale <= 0:
        return _error(out, "config", {"field": "--tolerance-scale", "message": "must be positive"}, EXIT_CONFIG)
    if jobs < 1:
        return _error(out, "config", {"field": "--jobs", "message": "must be >= 1"}, EXIT_CONFIG)
    try:
        cfg = load_config(command, config, seed)
        result = run_experiment(cfg, jobs=jobs)
    except ConfigError as e:
        return _error(out, "config", {"field": e.field, "message": e.message}, EXIT_CONFIG)
    except BoundaryContaminationError as e:
        return _error(out, "config", {"field": "grid", "message": f"grid too small for the geometry: {e}"},
                      EXIT_CONFIG)
    except (SeriesDivergenceError, PoleError, UnresolvedQuadratureError) as e:
        return _error(out, "divergence", {"message": str(e)}, EXIT_DIVERGENCE)
    except ValueError as e:
        # geometry rejected by a constructor after field validation
        return _error(out, "config", {"field": None, "message": str(e)}, EXIT_CONFIG)

    for name, (header, rows, meta) in result.tables.items():
        write_table(out / name, header, rows, meta)
    report = {
        "experiment": result.experiment,
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "tolerance_scale": tolerance_scale,
        "assertions": [a.to_dict(tolerance_scale) for a in result.assertions],
        "summary": result.summary,
        "config": cfg.data,
    }
    write_json(out / "report.json", report)
    for a in report["assertions"]:
        log.info("%-4s %-40s %.3e %s %.3e", "PASS" if a["pass"] else "FAIL", a["name"], a["measured"],
                 a["relation"], a["tolerance"])
    return EXIT_OK if result.all_pass(tolerance_scale) else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        print(json.dumps(schema_document(), indent=2, sort_keys=True))
        return EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    return run(args.command, args.config, args.out, args.seed, args.jobs, args.tolerance_scale)


if __name__ == "__main__":
    sys.exit(main())
