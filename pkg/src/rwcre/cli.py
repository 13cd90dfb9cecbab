"""Command-line runner.

    rwcre run CONFIG.json [--workers N] [--out DIR]
    rwcre preset NAME --emit [PATH]
    rwcre presets
    rwcre version

Exit codes: 0 success, 2 config error, 3 runtime estimator error.
``RWCRE_WORKERS`` overrides the default worker count.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import __version__
from .config import load
from .errors import ConfigError, RwcreError
from .estimators import rows_to_csv
from .presets import list_presets, resolve
from .runner import run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def run(config_path: str, workers: int | None = None, out_dir: str | None = None) -> tuple[int, list[str]]:
    """Run one config file; returns the exit code and the written files."""
    try:
        cfg = load(config_path)
    except ConfigError as exc:
        print(f"config error [{type(exc).__name__}] {exc}", file=sys.stderr)
        return EXIT_CONFIG, []
    out_dir = out_dir or os.path.dirname(os.path.abspath(config_path))
    start = time.perf_counter()
    try:
        rows = run_experiment(cfg, workers)
    except ConfigError as exc:
        print(f"config error [{type(exc).__name__}] {exc}", file=sys.stderr)
        return EXIT_CONFIG, []
    except RwcreError as exc:
        print(f"estimator error [{type(exc).__name__}] {exc}", file=sys.stderr)
        return EXIT_RUNTIME, []
    elapsed = time.perf_counter() - start
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{cfg.output}.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows))
    manifest = {
        "config_sha256": cfg.hash,
        "version": __version__,
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "wall_clock_seconds": round(elapsed, 6),
        "outputs": [os.path.basename(csv_path)],
    }
    man_path = os.path.join(out_dir, f"{cfg.output}.manifest.json")
    with open(man_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK, [csv_path, man_path]


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rwcre", description="Random walks in cooling random environments.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--workers", type=int, default=None, help="worker threads (default: RWCRE_WORKERS or CPU count)")
    r.add_argument("--out", default=None, help="output directory (default: the config's directory)")
    pr = sub.add_parser("preset", help="emit a built-in scenario config")
    pr.add_argument("name")
    pr.add_argument("--emit", nargs="?", const="-", default=None, metavar="PATH",
                    help="write the config JSON to PATH (stdout when omitted)")
    sub.add_parser("presets", help="list built-in scenarios")
    sub.add_parser("version", help="print the library version")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    if args.command == "presets":
        for name, desc in list_presets():
            print(f"{name:<20} {desc}")
        return EXIT_OK
    if args.command == "preset":
        try:
            cfg = resolve(args.name)
        except ConfigError as exc:
            print(f"config error {exc}", file=sys.stderr)
            return EXIT_CONFIG
        text = json.dumps(cfg, indent=2, sort_keys=True) + "\n"
        if args.emit in (None, "-"):
            sys.stdout.write(text)
        else:
            with open(args.emit, "w", encoding="utf-8") as fh:
                fh.write(text)
        return EXIT_OK
    code, files = run(args.config, args.workers, args.out)
    for f in files:
        print(f)
    return code


if __name__ == "__main__":
    sys.exit(main())
