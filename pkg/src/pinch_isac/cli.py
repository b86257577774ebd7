"""Command-line entry point ``pinch-isac``.

Exit status: 0 when every row succeeded, 2 when some rows carry an error,
1 on configuration or argument errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ParseError, PinchIsacError
from .harness import MODES, SweepSpec, run_sweep, sweep_configs
from .scenario import SystemConfig, config_from_mapping, load_config, parse_override

log = logging.getLogger("pinch_isac")


def _parse_sweep(text: str):
    if "=" not in text:
        raise ParseError(f"--sweep {text!r} is not of the form name=v1,v2,...")
    name, raw = text.split("=", 1)
    try:
        values = tuple(float(v) for v in raw.split(",") if v.strip())
    except ValueError as exc:
        raise ParseError(f"--sweep {text!r}: {exc}") from exc
    return name.strip(), values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pinch-isac", description=__doc__.splitlines()[0])
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", help="TOML file with key = value settings")
    p.add_argument("--sweep", help="name=v1,v2,... (config key or 'alpha')")
    p.add_argument("--realizations", type=int, help="overrides num_realizations")
    p.add_argument("--seed", type=int, help="overrides rng_seed")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key; repeatable")
    p.add_argument("--out", required=True, help="result file path")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args) -> SystemConfig:
    cfg = load_config(args.config) if args.config else SystemConfig()
    overrides = dict(parse_override(s) for s in args.set)
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    if args.realizations is not None:
        overrides["num_realizations"] = args.realizations
    return config_from_mapping(overrides, cfg) if overrides else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        spec = SweepSpec(
            mode=args.mode,
            sweep_variable=_parse_sweep(args.sweep) if args.sweep else None,
            num_realizations=cfg.num_realizations,
            output_path=args.out,
            seed=cfg.rng_seed,
            output_format=args.format,
            workers=args.workers,
        )
        for _ in sweep_configs(spec, cfg):
            pass  # validates every sweep point before any work starts
    except PinchIsacError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    rows = run_sweep(spec, cfg)
    failed = sum(1 for r in rows if r.error)
    print(f"{len(rows)} rows written to {args.out}" + (f" ({failed} with errors)" if failed else ""))
    return 2 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
