"""Command line: ``attnlab <experiment> --config <path.json> [--out DIR] [--seed U64]``,
``attnlab list`` and ``attnlab validate --config <path>``."""
from __future__ import annotations

import argparse
import sys

from attnlab.errors import AttnlabError
from attnlab.lab.config import U64_MAX, load_config
from attnlab.lab.runner import REGISTRY, get_experiment, registry_listing, resolve, run_experiment


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v <= U64_MAX:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {v}")
    return v


def _parser(prog="attnlab") -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog=prog,
        description="Run attention / manifold / clustering experiments from JSON configs.",
        epilog="experiments: " + ", ".join(REGISTRY),
    )
    p.add_argument("command", help="experiment name, 'list' or 'validate'")
    p.add_argument("--config", help="experiment config (or a previous report.json)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=_u64, help="root seed (overrides the config)")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "list":
            print(registry_listing())
            return 0
        if args.command == "validate":
            if not args.config:
                raise AttnlabError("validate needs --config")
            cfg = load_config(args.config)
            resolve(cfg)
            print(f"{args.config}: valid {cfg.experiment} config")
            return 0
        get_experiment(args.command)
        if not args.config:
            raise AttnlabError("--config is required")
        cfg = load_config(args.config)
        if cfg.experiment != args.command:
            raise AttnlabError(f"config is for {cfg.experiment!r}, not {args.command!r}")
        code, report = run_experiment(cfg, out=args.out, seed=args.seed)
    except (AttnlabError, OSError) as exc:
        print(f"attnlab: error: {exc}", file=sys.stderr)
        return 2
    for c in report["checks"]:
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['name']}: {c['value']} {c['op']} {c['threshold']}")
    print(f"{report['experiment']}: {report['verdict']} -> {report['config']['out']}")
    return code


if __name__ == "__main__":
    sys.exit(main())
