"""Command line interface."""

from __future__ import annotations

import argparse
import asyncio
from dataclasses import replace
import json
import logging
import os
from pathlib import Path
import sys
from typing import Any

import colorlog
import numpy as np

from . import __version__
from .const import (
    DEFAULT_EPS,
    DEFAULT_FLOW_GAP,
    DEFAULT_FLOW_STEPS,
    ENV_SEED,
    HomotopyPath,
)
from .fileio import (
    FileFormatError,
    async_read_body,
    async_read_campaign,
    async_read_graph,
    async_read_packing,
    async_write_body,
    async_write_json,
    async_write_packing,
)
from .geometry.body import BodyError
from .geometry.packer import (
    ContinuationConfig,
    PackingError,
    PinnedTriangle,
    body_pack,
    subgraph_flow,
)
from .geometry.profile import ProfileError
from .geometry.rigidity import RigidityError
from .geometry.sparsity import GraphError
from .harness import (
    DensifyConfig,
    HarnessError,
    analyze_packing,
    async_run_theorem_trials,
    densify_independent,
    square_counterexample,
    stress_report,
)
from .render import async_render_svg

_LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2

LOG_FORMAT = "%(log_color)s%(levelname)-8s%(reset)s %(name)s: %(message)s"


class UsageError(Exception):
    """Command line arguments are inconsistent."""


def setup_logging(verbose: bool, levels: dict[str, Any] | None = None) -> None:
    """Install a colored handler on the root logger."""
    handler = colorlog.StreamHandler()
    handler.setFormatter(colorlog.ColoredFormatter(LOG_FORMAT))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    levels = levels or {}
    default = "debug" if verbose else levels.get("default", "info")
    root.setLevel(default.upper())
    for name, level in levels.get("logs", {}).items():
        logging.getLogger(name).setLevel(level.upper())


def env_seed(default: int | None) -> int | None:
    """Return the seed from the environment, falling back to default."""
    value = os.environ.get(ENV_SEED)
    if value is None:
        return default
    try:
        return int(value)
    except ValueError as exc:
        raise UsageError(f"{ENV_SEED} must be an integer, got {value!r}") from exc


def parse_pins(text: str, graph) -> PinnedTriangle:
    """Parse "a b c x1 y1 x2 y2 x3 y3" into a pinned triangle."""
    tokens = text.split()
    if len(tokens) != 9:
        raise UsageError("--pin needs 'a b c x1 y1 x2 y2 x3 y3'")
    try:
        vertices = tuple(int(token) for token in tokens[:3])
        positions = np.array([float(token) for token in tokens[3:]]).reshape(3, 2)
    except ValueError as exc:
        raise UsageError(f"--pin has a malformed value: {exc}") from exc
    pins = PinnedTriangle(vertices, positions)
    pins.check(graph)
    return pins


def _continuation(args: argparse.Namespace) -> ContinuationConfig:
    return ContinuationConfig(homotopy_path=HomotopyPath(args.homotopy))


async def _pack(args: argparse.Namespace) -> int:
    graph = await async_read_graph(args.graph)
    body = await async_read_body(args.body)
    if args.pin:
        pins = parse_pins(args.pin, graph)
        if graph.outer is None:
            graph = graph.with_outer(pins.vertices)
    else:
        pins = PinnedTriangle.default(graph)
    packing = body_pack(body, graph, pins, _continuation(args))
    await async_write_packing(args.out, packing)
    if args.svg:
        await async_render_svg(packing, args.svg)
    _LOGGER.info("Packed %s, max residual %.3e", graph, packing.max_residual())
    return EXIT_OK


async def _open(args: argparse.Namespace) -> int:
    packing = await async_read_packing(args.packing)
    keep = await async_read_graph(args.keep_edges)
    opened = subgraph_flow(packing, keep, args.t_end, args.steps, _continuation(args))
    await async_write_packing(args.out, opened)
    _LOGGER.info("Opened %d contacts", packing.graph.m - opened.graph.m)
    return EXIT_OK


async def _analyze(args: argparse.Namespace) -> int:
    packing = await async_read_packing(args.packing)
    report = analyze_packing(packing)
    checks = {"valid": report["valid"], "rank_stable": not report["rank_ambiguous"]}
    if args.expect_independent:
        checks["independent"] = report["independent"]
    if args.expect_rigid:
        checks["rigid"] = report["rigidity"] == "rigid"
    report["checks"] = checks
    await _emit(report, args.out)
    return EXIT_OK if all(checks.values()) else EXIT_CHECK_FAILED


async def _stress(args: argparse.Namespace) -> int:
    packing = await async_read_packing(args.packing)
    report = stress_report(packing)
    await _emit(report, args.out)
    if args.expect_stress and report["framework_stress"] is None:
        return EXIT_CHECK_FAILED
    return EXIT_OK


async def _trials(args: argparse.Namespace) -> int:
    cfg, levels = await async_read_campaign(args.config)
    setup_logging(args.verbose, levels)
    seed = env_seed(cfg.master_seed)
    changes = {"master_seed": seed}
    if args.trials:
        changes["trials"] = args.trials
    if args.workers:
        changes["workers"] = args.workers
    cfg = replace(cfg, **changes)
    report = await async_run_theorem_trials(cfg)
    await async_write_json(args.out, report.as_dict())
    print(report.summary_table())
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


async def _densify(args: argparse.Namespace) -> int:
    graph = await async_read_graph(args.graph)
    body = await async_read_body(args.body)
    seed = env_seed(args.seed)
    cfg = DensifyConfig(eps=args.eps, continuation=_continuation(args))
    try:
        new_body, packing = densify_independent(body, graph, seed, cfg=cfg)
    except HarnessError as exc:
        _LOGGER.error("Densification failed: %s", exc)
        return EXIT_CHECK_FAILED
    await async_write_body(args.out_body, new_body)
    await async_write_packing(args.out, packing)
    return EXIT_OK


async def _render(args: argparse.Namespace) -> int:
    packing = await async_read_packing(args.packing)
    await async_render_svg(packing, args.out)
    return EXIT_OK


async def _counterexample(args: argparse.Namespace) -> int:
    packing = square_counterexample(args.t)
    await async_write_packing(args.out, packing)
    if args.svg:
        await async_render_svg(packing, args.svg)
    return EXIT_OK


async def _emit(report: dict[str, Any], out: Path | None) -> None:
    if out is None:
        print(json.dumps(report, indent=2))
    else:
        await async_write_json(out, report)


def build_parser() -> argparse.ArgumentParser:
    """Return the argument parser with one subcommand per pipeline."""
    parser = argparse.ArgumentParser(
        prog="packrigid", description="Convex body packings and their rigidity."
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    def homotopy(sub: argparse.ArgumentParser) -> None:
        sub.add_argument(
            "--homotopy",
            choices=[item.value for item in HomotopyPath],
            default=HomotopyPath.Gauge.value,
        )

    sub = commands.add_parser("pack", help="pack a triangulation with a body")
    sub.add_argument("--graph", type=Path, required=True)
    sub.add_argument("--body", type=Path, required=True)
    sub.add_argument("--pin", help="a b c x1 y1 x2 y2 x3 y3")
    sub.add_argument("--out", type=Path, required=True)
    sub.add_argument("--svg", type=Path)
    homotopy(sub)
    sub.set_defaults(handler=_pack)

    sub = commands.add_parser("open", help="open contacts not in a subgraph")
    sub.add_argument("--packing", type=Path, required=True)
    sub.add_argument("--keep-edges", type=Path, required=True)
    sub.add_argument("--out", type=Path, required=True)
    sub.add_argument("--t-end", type=float, default=DEFAULT_FLOW_GAP)
    sub.add_argument("--steps", type=int, default=DEFAULT_FLOW_STEPS)
    homotopy(sub)
    sub.set_defaults(handler=_open)

    sub = commands.add_parser("analyze", help="rank, sparsity and planarity report")
    sub.add_argument("--packing", type=Path, required=True)
    sub.add_argument("--out", type=Path)
    sub.add_argument("--expect-independent", action="store_true")
    sub.add_argument("--expect-rigid", action="store_true")
    sub.set_defaults(handler=_analyze)

    sub = commands.add_parser("stress", help="equilibrium and edge-length stresses")
    sub.add_argument("--packing", type=Path, required=True)
    sub.add_argument("--out", type=Path)
    sub.add_argument("--expect-stress", action="store_true")
    sub.set_defaults(handler=_stress)

    sub = commands.add_parser("trials", help="run a randomized campaign")
    sub.add_argument("--config", type=Path, required=True)
    sub.add_argument("--out", type=Path, required=True)
    sub.add_argument("--trials", type=int)
    sub.add_argument("--workers", type=int)
    sub.set_defaults(handler=_trials)

    sub = commands.add_parser(
        "densify", help="find a nearby body with an independent packing"
    )
    sub.add_argument("--graph", type=Path, required=True)
    sub.add_argument("--body", type=Path, required=True)
    sub.add_argument("--out", type=Path, required=True)
    sub.add_argument("--out-body", type=Path, required=True)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--eps", type=float, default=DEFAULT_EPS)
    homotopy(sub)
    sub.set_defaults(handler=_densify)

    sub = commands.add_parser("render", help="draw a packing as SVG")
    sub.add_argument("--packing", type=Path, required=True)
    sub.add_argument("--out", type=Path, required=True)
    sub.set_defaults(handler=_render)

    sub = commands.add_parser("counterexample", help="write the square 4-cycle packing")
    sub.add_argument("--t", type=float, default=2.0)
    sub.add_argument("--out", type=Path, required=True)
    sub.add_argument("--svg", type=Path)
    sub.set_defaults(handler=_counterexample)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Run the command line and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    setup_logging(args.verbose)
    try:
        return asyncio.run(args.handler(args))
    except (UsageError, FileFormatError, GraphError, OSError) as exc:
        _LOGGER.error("%s", exc)
        return EXIT_USAGE
    except (BodyError, ProfileError, PackingError, RigidityError, HarnessError) as exc:
        _LOGGER.error("%s failed: %s", args.command, exc)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
