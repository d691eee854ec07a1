"""Command-line entry point: ``dediscover {simulate,discover,uq,symbolic}``.

Every run reads one JSON config.  Only ``--config``, ``--output`` and
``--seed`` are accepted as flags.  Exit codes: 0 success, 1 config or
schema error, 2 simulation or stability error, 3 numeric failure.  On
failure a JSON object describing the error is written to stderr.
"""
import argparse
import json
import os
import sys
import tempfile
import warnings

import numpy as np

from .data import save_csv
from .errors import DiscoveryError, SchemaError
from .pipeline import RunConfig, run_discover, run_simulate, run_symbolic, run_uq

COMMANDS = ("simulate", "discover", "uq", "symbolic")
OUTPUT_FILES = {"discover": "report.json", "uq": "uq_report.json",
                "symbolic": "symbolic_report.json"}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def dumps(obj):
    return json.dumps(_jsonable(obj), indent=2, ensure_ascii=False) + "\n"


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_parser():
    parser = argparse.ArgumentParser(prog="dediscover",
                                     description="Discover differential equations from data.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, metavar="PATH", help="JSON run configuration")
        p.add_argument("--output", metavar="DIR", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, metavar="N", help="master seed (overrides config)")
    return parser


def execute(command, cfg):
    """Run ``command`` and write its outputs; returns the written paths."""
    out = cfg.output_dir
    if command == "simulate":
        data, truth = run_simulate(cfg)
        os.makedirs(out, exist_ok=True)
        csv_path = os.path.join(out, "data.csv")
        truth_path = os.path.join(out, "ground_truth.json")
        save_csv(data, csv_path)
        write_atomic(truth_path, dumps(truth))
        return [csv_path, truth_path]
    runner = {"discover": run_discover, "uq": run_uq, "symbolic": run_symbolic}[command]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = runner(cfg)
    extra = sorted({str(w.message) for w in caught})
    if extra:
        report.setdefault("warnings", [])
        report["warnings"] = report["warnings"] + [m for m in extra if m not in report["warnings"]]
    path = os.path.join(out, OUTPUT_FILES[command])
    write_atomic(path, dumps(report))
    if command == "discover":
        text = "".join(eq["text"] + "\n" for eq in report["equations"])
        write_atomic(os.path.join(out, "equations.txt"), text)
    return [path]


def _fail(exc, code):
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc),
                                 "exit_code": code}) + "\n")
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config, seed=args.seed, output_dir=args.output)
        paths = execute(args.command, cfg)
    except DiscoveryError as exc:
        return _fail(exc, exc.exit_code)
    except (KeyError, TypeError, ValueError) as exc:
        # malformed config values that slipped past validation
        return _fail(SchemaError(str(exc)), 1)
    except (np.linalg.LinAlgError, FloatingPointError, OverflowError) as exc:
        return _fail(exc, 3)
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
