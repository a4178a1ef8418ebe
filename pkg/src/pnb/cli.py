"""Command-line entry point.

``pnb solve`` runs one instance end to end and writes the delimited
result row, the bound time-series, and a rendered bounds figure into the
output directory.  ``pnb report`` re-renders the figure for an existing
time-series file.  Exit codes: 0 when the instance closed, 2 on hitting
the time limit, 1 on any error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .models import Objective, SopModel, TsptwModel
from .parsing import ParseError, parse_sop, parse_tsptw
from .peel import PeelChoice
from .reporting import (ResultRecord, emit_results, emit_timeline,
                        render_timeline_figure)
from .search import Mode, SolveConfig, solve

log = logging.getLogger("pnb")

_LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO,
               "trace": logging.DEBUG}


def _setup_logging() -> None:
    level = _LOG_LEVELS.get(os.environ.get("PNB_LOG", "info"), logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")


def _build_model(kind: str, path: Path):
    data = path.read_bytes()
    if kind == "sop":
        return SopModel(parse_sop(data, name=path.stem))
    objective = Objective.MAKESPAN if kind == "makespan" else Objective.TRAVEL
    return TsptwModel(parse_tsptw(data, name=path.stem), objective)


def _parse_args(argv):
    parser = argparse.ArgumentParser(prog="pnb")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("solve", help="solve one instance")
    run.add_argument("--problem", required=True,
                     choices=["sop", "tsptw", "makespan"])
    run.add_argument("--instance", required=True, type=Path)
    run.add_argument("--width", type=int, default=2048)
    run.add_argument("--mode", choices=[m.value for m in Mode], default="pnb")
    run.add_argument("--heuristic", choices=[c.value for c in PeelChoice],
                     default="last-exact")
    run.add_argument("--seed", type=float, default=None,
                     help="known solution value to start from")
    run.add_argument("--diversify-k", type=int, default=5)
    run.add_argument("--diversify-width", type=int, default=100)
    run.add_argument("--time-limit", type=float, default=3600.0)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--no-plot", action="store_true",
                     help="skip rendering the bounds figure")

    rep = sub.add_parser("report", help="render a figure from a time-series csv")
    rep.add_argument("--timeline", type=Path, required=True)
    rep.add_argument("--out", type=Path, default=None,
                     help="output image path (default: alongside the csv)")
    rep.add_argument("--title", default="")
    return parser.parse_args(argv)


def _cmd_solve(args) -> int:
    model = _build_model(args.problem, args.instance)
    seed = None
    if args.seed is not None:
        seed = round(args.seed * model.scale)
    config = SolveConfig(
        width=args.width,
        mode=Mode(args.mode),
        peel_choice=PeelChoice(args.heuristic),
        seed_value=seed,
        diversify_k=args.diversify_k,
        diversify_width=args.diversify_width,
        time_limit=args.time_limit,
        workers=args.workers,
    )
    log.info("solving %s (%s) width=%d mode=%s heuristic=%s",
             args.instance.name, args.problem, args.width, args.mode,
             args.heuristic)
    result = solve(model, config)
    record = ResultRecord.from_result(
        result,
        set_name=args.instance.parent.name or "-",
        name=args.instance.name,
        mode=args.mode,
        width=args.width,
        heuristic=args.heuristic,
        seeded=seed is not None,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    stem = f"{args.instance.stem}.{args.mode}.w{args.width}"
    (args.out / "results.csv").write_text(emit_results([record]))
    (args.out / f"{stem}.timeline.csv").write_text(
        emit_timeline(result.timeline, model.scale))
    if not args.no_plot:
        render_timeline_figure(result.timeline,
                               args.out / f"{stem}.png",
                               title=args.instance.stem,
                               scale=model.scale)
    log.info("LB=%s UB=%s gap=%.2f%% closed=%s in %.2fs",
             record.lower, record.upper, record.gap, record.closed,
             record.time_s)
    return 0 if result.closed else 2


def _cmd_report(args) -> int:
    rows = []
    text = args.timeline.read_text().splitlines()
    for line in text[1:]:
        elapsed, lb, ub, qlen = line.split(",")
        rows.append((
            float(elapsed),
            None if lb == "-" else float(lb),
            None if ub == "-" else float(ub),
            int(qlen),
        ))
    out = args.out or args.timeline.with_suffix(".png")
    render_timeline_figure(rows, out, title=args.title, scale=1)
    log.info("wrote %s", out)
    return 0


def main(argv=None) -> int:
    _setup_logging()
    args = _parse_args(argv if argv is not None else sys.argv[1:])
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        return _cmd_report(args)
    except (ParseError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
