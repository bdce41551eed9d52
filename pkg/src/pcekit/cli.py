"""Command-line entry point: ``pcekit --config study.json --stage all``.

Exit codes: 0 success, 2 configuration error, 3 undersampling,
4 ensemble failure, 5 fit failure.
"""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
from importlib import resources
from pathlib import Path

from .errors import PCEError
from .study import STAGES, load_config, run_stages


def _u64(text):
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser():
    p = argparse.ArgumentParser(prog="pcekit", description=__doc__.splitlines()[0])
    p.add_argument("--config", type=Path, help="study JSON document")
    p.add_argument("--stage", default="all", choices=STAGES + ("all",))
    p.add_argument("--parallelism", type=_positive, default=1, help="concurrent simulator processes")
    p.add_argument("--seed", type=_u64, help="override the config seed")
    p.add_argument("--force", action="store_true", help="ignore cached simulator runs")
    p.add_argument("--init-example", type=Path, metavar="DIR",
                   help="copy the bundled mock fuel-pin study into DIR and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def init_example(target: Path):
    target.mkdir(parents=True, exist_ok=True)
    src = resources.files("pcekit") / "data" / "example_study"
    for item in src.iterdir():
        if item.is_file() and not item.name.startswith("__"):
            with resources.as_file(item) as path:
                shutil.copy(path, target / item.name)
    print(f"example study written to {target}; run: pcekit --config {target / 'config.json'}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.init_example is not None:
        init_example(args.init_example)
        return 0
    if args.config is None:
        print("pcekit: error: --config is required", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, seed=args.seed)
        run_stages(cfg, args.stage, parallelism=args.parallelism, force=args.force)
    except PCEError as exc:
        print(f"pcekit: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
