"""``fdmimo rmse|sumrate|flops --config FILE --out CSV [--seed N] [--trials N] [--threads N]``.

Exit codes: 0 success, 2 invalid configuration, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, load_config
from .experiments import ExperimentResult, run_experiment
from .numerics import DomainError, NumericError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("fdmimo")


def _format(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(result: ExperimentResult, path: str | Path) -> None:
    """UTF-8 CSV: one ``#`` metadata line (config echo, version, column docs), a header, then rows."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# " + json.dumps(result.metadata(), sort_keys=True, separators=(",", ":")) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(result.columns)
        for row in result.rows:
            writer.writerow([_format(x) for x in row])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fdmimo", description="FD-MIMO DoA estimation and precoding experiments")
    p.add_argument("kind", choices=("rmse", "sumrate", "flops"))
    p.add_argument("--config", required=True, help="YAML or JSON experiment config")
    p.add_argument("--out", help="output CSV (defaults to the config's 'output')")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, seed=args.seed, trials=args.trials)
        if cfg.kind != args.kind:
            cfg = replace(cfg, kind=args.kind)
        out = args.out or cfg.output
        if not out:
            raise ConfigError("no output path: pass --out or set 'output' in the config")
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg.validate()
        log.info("running %s with %d trial(s) on %d worker(s)", cfg.kind, cfg.trials, args.threads)
        result = run_experiment(cfg, threads=args.threads)
        write_csv(result, out)
    except (ConfigError, OSError) as exc:
        print(f"fdmimo: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"fdmimo: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"fdmimo: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
