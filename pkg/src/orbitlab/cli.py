"""orbitlab command line: ``orbitlab <experiment> --config <path> [--emit-rows] [--workers N]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError, OrbitLabError
from .experiments import RUNNERS, catalog_listing, exit_code, load_config, run


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orbitlab", description="Certified experiments on diagonal and toral orbits.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--emit-rows", action="store_true", help="also write per-item CSV rows")
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--no-timing", action="store_true", help="omit the timing field from the report")
    cat = sub.add_parser("catalog", aliases=["list-catalog"], help="show built-in fields and defaults")
    cat.add_argument("--json", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command in ("catalog", "list-catalog"):
        print(catalog_listing(args.json))
        return 0
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        config = load_config(args.config)
        rec = run(args.command, config, workers=args.workers, emit_rows=args.emit_rows)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OrbitLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    out = config.get("output", {})
    text = rec.to_json(with_timing=not args.no_timing) + "\n"
    if "report" in out:
        Path(out["report"]).write_text(text)
    else:
        sys.stdout.write(text)
    if args.emit_rows:
        csv_text = rec.to_csv()
        if "rows" in out:
            Path(out["rows"]).write_text(csv_text)
        else:
            sys.stdout.write(csv_text)
    code = exit_code(rec)
    if code:
        print(f"{args.command}: certified check failed", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
