import logging
import sys

from config import DEFAULT_JOBS, LOG_FORMAT, LOG_LEVEL

# Configure logging BEFORE any other project imports; stdout is reserved for data
logging.basicConfig(
    level=LOG_LEVEL,
    format=LOG_FORMAT,
    handlers=[
        logging.StreamHandler(sys.stderr)
    ],
    force=True  # Force reconfiguration even if already configured
)

import argparse
import asyncio
import csv
import io
import json
import math
import os
import tempfile
from typing import Dict, List, Optional, Sequence

from error_handler import ErrorHandler, ParameterError
from expansions import coefficients_for, domain_report
from figures import FIGURE_NAMES, assemble_panels, curve_requests
from schema import (
    DomainReport,
    FigurePanel,
    ForwardHorizon,
    OutputFormat,
    QuadratureConfig,
    Regime,
    RunConfig,
    SmileCurve,
    SmilePoint,
)
from smile import smile_point

SMILE_COLUMNS = ["k", "strike", "v0", "v1", "v2", "sigma0", "sigma1", "sigma2"]
REFERENCE_COLUMNS = ["sigma_ref", "err0", "err1", "err2"]


# Pipeline

async def build_curve(
    model,
    regime: Regime,
    h: ForwardHorizon,
    grid: Sequence[float],
    order: int,
    with_reference: bool,
    quadrature: Optional[QuadratureConfig],
    semaphore: asyncio.Semaphore,
) -> SmileCurve:
    """Compute a smile strike by strike on worker threads, keeping grid order."""
    curve = SmileCurve(regime=regime, horizon=h, order=order)
    if not grid:
        return curve
    coeffs = await asyncio.to_thread(coefficients_for, model, regime, h)

    async def one(k: float) -> SmilePoint:
        async with semaphore:
            return await asyncio.to_thread(smile_point, coeffs, model, h, k, order, with_reference, quadrature)

    points = await asyncio.gather(*(one(k) for k in grid))
    logging.info(f"Assembled {regime.value}-maturity smile with {len(points)} strikes")
    return curve.model_copy(update={"points": list(points)})


async def run_smile(config: RunConfig, jobs: int, with_reference: bool) -> SmileCurve:
    return await build_curve(
        config.model_spec(),
        config.regime,
        config.horizon,
        config.strikes.values(),
        config.order,
        with_reference,
        config.oracle.quadrature(),
        asyncio.Semaphore(jobs),
    )


async def run_figure(name: str, jobs: int) -> List[FigurePanel]:
    requests = curve_requests(name)
    semaphore = asyncio.Semaphore(jobs)
    curves = []
    for request in requests:
        curves.append(await build_curve(
            request.model, request.regime, request.horizon, request.grid,
            request.order, request.reference, None, semaphore,
        ))
    return await asyncio.to_thread(assemble_panels, name, requests, curves)


# Formatting

def _cell(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def _csv_text(columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buffer.getvalue()


def smile_csv(curve: SmileCurve, with_reference: bool) -> str:
    columns = SMILE_COLUMNS + (REFERENCE_COLUMNS if with_reference else []) + ["flags"]
    rows = []
    for point in curve.points:
        values = [getattr(point, name) for name in columns[:-1]]
        rows.append([_cell(v) for v in values] + [";".join(point.flags)])
    return _csv_text(columns, rows)


def panel_csv(panel: FigurePanel) -> str:
    return _csv_text(panel.columns, [[_cell(v) for v in row] for row in panel.rows])


def domain_csv(report: DomainReport) -> str:
    rows = []
    for key, value in report.model_dump(mode="json").items():
        if isinstance(value, dict):
            rows += [[f"{key}.{inner}", _flat(item)] for inner, item in value.items()]
        else:
            rows.append([key, _flat(value)])
    return _csv_text(["field", "value"], rows)


def _flat(value) -> str:
    if value is None:
        return ""
    if isinstance(value, list):
        return ";".join(_flat(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def error_summary(curve: SmileCurve) -> Dict[str, dict]:
    """Sup and mean absolute vol error per order over the strikes with a reference."""
    summary = {}
    for order in range(curve.order + 1):
        errors = [p.error(order) for p in curve.points if p.error(order) is not None]
        summary[f"order{order}"] = {
            "sup": max(errors) if errors else None,
            "mean": math.fsum(errors) / len(errors) if errors else None,
            "count": len(errors),
        }
    return summary


# Output

def write_output(text: str, path: Optional[str]) -> None:
    """Write to stdout, or atomically to a file so an error never leaves a partial one."""
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    handle, temp_path = tempfile.mkstemp(dir=directory, prefix=".fwdsmile-", suffix=".tmp")
    try:
        with os.fdopen(handle, "w", newline="") as stream:
            stream.write(text)
        os.replace(temp_path, path)
    except OSError:
        if os.path.exists(temp_path):
            os.remove(temp_path)
        raise
    logging.info(f"Wrote {path}")


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as stream:
        text = stream.read()
    config = RunConfig.model_validate_json(text)
    logging.info(f"Loaded {config.regime.value}-maturity run configuration from {path}")
    return config


def _resolve(args, config: RunConfig):
    fmt = OutputFormat(args.format) if args.format else config.output.format
    return fmt, args.out or config.output.path


def _check_jobs(jobs: int) -> int:
    if jobs < 1:
        raise ParameterError(f"--jobs must be at least 1, got {jobs}")
    return jobs


# Commands

def cmd_smile(args) -> int:
    config = load_config(args.config)
    fmt, path = _resolve(args, config)
    with_reference = config.oracle.enabled
    curve = asyncio.run(run_smile(config, _check_jobs(args.jobs), with_reference))
    if fmt == OutputFormat.JSON:
        text = curve.model_dump_json(indent=2) + "\n"
    else:
        text = smile_csv(curve, with_reference)
    write_output(text, path)
    return 0


def cmd_compare(args) -> int:
    config = load_config(args.config)
    fmt, path = _resolve(args, config)
    curve = asyncio.run(run_smile(config, _check_jobs(args.jobs), with_reference=True))
    summary = error_summary(curve)
    if fmt == OutputFormat.JSON:
        text = json.dumps({"curve": curve.model_dump(mode="json"), "summary": summary}, indent=2) + "\n"
    else:
        text = smile_csv(curve, with_reference=True)
    write_output(text, path)

    for order, stats in summary.items():
        print(f"{order}: sup={_flat(stats['sup'])} mean={_flat(stats['mean'])}", file=sys.stderr)
    failed = sum(1 for p in curve.points if "oracle-failed" in p.flags)
    if failed:
        logging.warning(f"Fourier reference failed at {failed} of {len(curve.points)} strikes")
    return 0


def cmd_domain(args) -> int:
    config = load_config(args.config)
    fmt, path = _resolve(args, config)
    report = domain_report(config.model_spec(), config.regime, config.horizon)
    text = report.model_dump_json(indent=2) + "\n" if fmt == OutputFormat.JSON else domain_csv(report)
    write_output(text, path)
    return 0


def _figure_name(args) -> str:
    if args.name and args.name_option and args.name != args.name_option:
        raise ParameterError(f"conflicting figure names {args.name!r} and {args.name_option!r}")
    name = args.name or args.name_option
    if name is None:
        raise ParameterError(f"figure name required, expected one of {', '.join(FIGURE_NAMES)}")
    return name


def cmd_figure(args) -> int:
    name = _figure_name(args)
    panels = asyncio.run(run_figure(name, _check_jobs(args.jobs)))
    fmt = OutputFormat(args.format) if args.format else OutputFormat.CSV
    out_dir = args.out or "."
    for panel in panels:
        target = os.path.join(out_dir, f"{panel.figure}_{panel.panel}.{fmt.value}")
        text = panel.model_dump_json(indent=2) + "\n" if fmt == OutputFormat.JSON else panel_csv(panel)
        write_output(text, target)
    logging.info(f"Figure {name}: wrote {len(panels)} panels to {out_dir}")
    return 0


COMMANDS = {
    "smile": cmd_smile,
    "compare": cmd_compare,
    "domain": cmd_domain,
    "figure": cmd_figure,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fwdsmile",
        description="Forward-start option and forward smile asymptotics, with a Fourier reference.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("smile", "compute the forward smile expansion over a strike grid"),
        ("compare", "compare the expansion against the Fourier reference"),
        ("domain", "print the limiting domain and singular strikes"),
    ):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", required=True, help="JSON run configuration")
        sub.add_argument("--out", default=None, help="output file (default: config output path, else stdout)")
        sub.add_argument("--format", choices=[f.value for f in OutputFormat], default=None)
        sub.add_argument("--jobs", type=int, default=DEFAULT_JOBS, help="worker threads for strike-level work")

    figure = commands.add_parser("figure", help="emit the dataset behind a published figure")
    figure.add_argument("name", nargs="?", choices=FIGURE_NAMES, default=None)
    figure.add_argument("--name", dest="name_option", choices=FIGURE_NAMES, default=None, help="figure name (alternative to the positional)")
    figure.add_argument("--out", default=None, help="output directory (default: current directory)")
    figure.add_argument("--format", choices=[f.value for f in OutputFormat], default=None)
    figure.add_argument("--jobs", type=int, default=DEFAULT_JOBS)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one CLI command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        return COMMANDS[args.command](args)
    except Exception as e:
        return ErrorHandler.handle_error(e, f"{args.command} command", show_details=isinstance(e, ValueError))


if __name__ == "__main__":
    sys.exit(main())
