"""``floodtrend`` command line: one subcommand per stage, plus ``run`` and ``fixture``."""
from __future__ import annotations

import argparse
import logging
import sys

from .pipeline import STAGES, MissingInputError, PipelineConfig, PipelineError, run

EXIT_OK, EXIT_STAGE, EXIT_MISSING = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="floodtrend", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="pipeline .ini file")
        p.add_argument("--seed", type=int, help="override the configured master seed")
        p.add_argument("--workers", type=int, help="threads for Monte Carlo replicates")
        p.add_argument("--force", action="store_true", help="rerun even if inputs are unchanged")

    p = sub.add_parser("run", help="run several stages in order")
    common(p)
    p.add_argument("--stages", default=",".join(STAGES),
                   help="comma-separated subset of: " + ",".join(STAGES))
    for stage in STAGES:
        common(sub.add_parser(stage, help=f"run the {stage} stage"))
    p = sub.add_parser("fixture", help="write a small synthetic input set")
    p.add_argument("outdir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--events", type=int, default=360)
    p.add_argument("--replicates", type=int, default=1000)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "fixture":
        from .fixture import write_fixture
        cfg = write_fixture(args.outdir, seed=args.seed, n_events=args.events,
                            replicates=args.replicates)
        print(cfg)
        return EXIT_OK
    if args.command == "run":
        stages = [s.strip() for s in args.stages.split(",") if s.strip()]
    else:
        stages = [args.command]
    try:
        cfg = PipelineConfig.from_file(args.config, seed=args.seed)
        if args.workers:
            cfg.workers = args.workers
        for outcome in run(cfg, stages, force=args.force):
            print(f"{outcome.stage}: {'up to date' if outcome.skipped else 'done'}")
    except MissingInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (PipelineError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
