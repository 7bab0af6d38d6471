"""Command-line front end.

Three subcommands: ``check`` validates a model file, ``states`` exports
the exhaustive CTMC, and ``simulate`` runs replications and writes the
measure statistics as CSV.  ``simulate --plot`` additionally renders one
trajectory figure per measure next to the CSV.

Exit codes: 0 on success, 1 on model or input errors, 2 on usage errors.
The ``CARMA_LOG`` environment variable (error, warn, info, debug) sets
the logging level.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .dsl import parse_model
from .errors import CarmaError
from .semantics.system import exhaustive_ctmc, export_ctmc
from .simulator import simulate, write_csv, write_raw_csv

log = logging.getLogger("carma.cli")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def _configure_logging():
    raw = os.environ.get("CARMA_LOG", "").strip().lower()
    level = _LOG_LEVELS.get(raw)
    if raw and level is None:
        print(f"warning: unknown CARMA_LOG level '{raw}'", file=sys.stderr)
    logging.basicConfig(
        level=level if level is not None else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _load(path: str):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            source = handle.read()
    except OSError as exc:
        raise CarmaError(f"cannot read '{path}': {exc.strerror or exc}") from exc
    return parse_model(source)


def _open_out(path: str):
    if path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def cmd_check(args) -> int:
    model = _load(args.model)
    print(
        f"{args.model}: ok "
        f"({len(model.definitions)} definitions, "
        f"{len(model.components)} component types, "
        f"{len(model.measures)} measures)"
    )
    return 0


def cmd_states(args) -> int:
    model = _load(args.model)
    ctmc = exhaustive_ctmc(model.initial_state(), model.definitions,
                           max_states=args.max_states)
    out, close = _open_out(args.out)
    try:
        out.write(export_ctmc(ctmc))
    finally:
        if close:
            out.close()
    if ctmc.truncated:
        print(
            f"warning: state space truncated at {args.max_states} states",
            file=sys.stderr,
        )
    log.info("exported %d states, %d transitions",
             len(ctmc.states), len(ctmc.transitions))
    return 0


def cmd_simulate(args) -> int:
    model = _load(args.model)
    if not model.measures:
        raise CarmaError("model declares no measures; nothing to simulate")
    result = simulate(
        model,
        seed=args.seed,
        replications=args.replications,
        stop_time=args.stop_time,
        keep_raw=args.raw is not None,
    )
    out, close = _open_out(args.out)
    try:
        write_csv(result, out)
    finally:
        if close:
            out.close()
    if args.raw is not None:
        with open(args.raw, "w", encoding="utf-8", newline="") as handle:
            write_raw_csv(result, handle)
    if args.plot is not None:
        _render_plots(result, args.plot)
    return 0


def _render_plots(result, path: str):
    """One figure per measure: mean trajectory with a +-1 sd band."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    names = result.measures
    fig, axes = plt.subplots(
        len(names), 1, figsize=(8, 2.6 * len(names)), squeeze=False
    )
    for i, (axis, name) in enumerate(zip(axes[:, 0], names)):
        mean = result.mean[:, i]
        sd = np.sqrt(result.variance[:, i])
        axis.plot(result.times, mean, lw=1.5, label="mean")
        axis.fill_between(result.times, mean - sd, mean + sd, alpha=0.25,
                          label="+-1 sd")
        axis.set_ylabel(name)
        axis.legend(loc="best", fontsize="small")
    axes[-1, 0].set_xlabel("time")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    log.info("wrote figure %s", path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carma",
        description="Validate, explore, and simulate CARMA models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="parse and validate a model file")
    check.add_argument("model", help="path to a .carma model file")
    check.set_defaults(run=cmd_check)

    states = sub.add_parser("states", help="export the reachable CTMC")
    states.add_argument("model", help="path to a .carma model file")
    states.add_argument("--max-states", type=int, default=10000,
                        help="state-space cap (default 10000)")
    states.add_argument("--out", default="-",
                        help="output path, '-' for stdout (default)")
    states.set_defaults(run=cmd_states)

    sim = sub.add_parser("simulate", help="run replications and emit CSV")
    sim.add_argument("model", help="path to a .carma model file")
    sim.add_argument("--seed", type=int, default=0,
                     help="root random seed (default 0)")
    sim.add_argument("--replications", type=int, default=1,
                     help="independent runs to average (default 1)")
    sim.add_argument("--stop-time", type=float, default=None,
                     help="simulated time horizon (default: end of the "
                          "measure grid)")
    sim.add_argument("--out", default="-",
                     help="CSV output path, '-' for stdout (default)")
    sim.add_argument("--raw", default=None, metavar="PATH",
                     help="also write per-replication samples to PATH")
    sim.add_argument("--plot", default=None, metavar="PATH",
                     help="render measure trajectories to an image at PATH")
    sim.add_argument("--jobs", type=int, default=1,
                     help="replication concurrency cap (output is "
                          "independent of this value)")
    sim.set_defaults(run=cmd_simulate)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "replications", 1) is not None and \
            getattr(args, "replications", 1) < 1:
        parser.error("--replications must be at least 1")
    if getattr(args, "max_states", 1) < 1:
        parser.error("--max-states must be at least 1")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    try:
        return args.run(args)
    except CarmaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
