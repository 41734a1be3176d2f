"""Packing, graph, body, report and campaign files."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import aiofiles
import voluptuous as vol
import yaml

from .const import (
    CONF_BODY,
    CONF_EDGES,
    CONF_N,
    CONF_OUTER,
    CONF_P,
    CONF_PINNED,
    CONF_R,
)
from .geometry.body import ConvexBody, body_from_descriptor
from .geometry.packer import ContinuationConfig
from .geometry.rigidity import InvalidPackingError, Packing
from .geometry.sparsity import ContactGraph, GraphError
from .harness import TrialConfig

_LOGGER = logging.getLogger(__name__)

CONF_CONTINUATION = "continuation"
CONF_LOGGER = "logger"
CONF_LOGGER_DEFAULT = "default"
CONF_LOGGER_LOGS = "logs"
OUTER_KEYWORD = "outer"

_POINT = vol.All([vol.Coerce(float)], vol.Length(min=2, max=2))

PACKING_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_BODY): dict,
        vol.Required(CONF_N): vol.All(int, vol.Range(min=1)),
        vol.Required(CONF_EDGES): [vol.All([int], vol.Length(min=2, max=2))],
        vol.Required(CONF_P): [_POINT],
        vol.Required(CONF_R): [vol.Coerce(float)],
        vol.Optional(CONF_PINNED, default=list): [int],
        vol.Optional(CONF_OUTER): vol.Any(None, vol.All([int], vol.Length(min=3, max=3))),
    }
)

LOGGER_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_LOGGER_DEFAULT, default="info"): vol.In(
            ["debug", "info", "warning", "error", "critical"]
        ),
        vol.Optional(CONF_LOGGER_LOGS, default=dict): {str: str},
    }
)


class FileFormatError(Exception):
    """File content does not match its format."""

    def __init__(
        self, message: str, source: str | None = None, line: int | None = None
    ) -> None:
        where = source or "<input>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}")
        self.source = source
        self.line = line


def _invalid_message(exc: vol.Invalid) -> str:
    path = ".".join(str(key) for key in exc.path)
    return f"{exc.msg} at '{path}'" if path else exc.msg


def packing_to_dict(packing: Packing) -> dict[str, Any]:
    """Return the JSON document of a packing."""
    data = {
        CONF_BODY: packing.body.descriptor(),
        CONF_N: packing.n,
        CONF_EDGES: [list(edge) for edge in packing.graph.edges],
        CONF_P: packing.p.tolist(),
        CONF_R: packing.r.tolist(),
        CONF_PINNED: list(packing.pinned),
    }
    if packing.graph.outer is not None:
        data[CONF_OUTER] = list(packing.graph.outer)
    return data


def packing_from_dict(data: dict, source: str | None = None) -> Packing:
    """Build a packing from its JSON document, validating edges and shapes."""
    try:
        data = PACKING_SCHEMA(data)
        body = body_from_descriptor(data[CONF_BODY])
    except vol.Invalid as exc:
        raise FileFormatError(_invalid_message(exc), source) from exc
    n = data[CONF_N]
    for position, (u, v) in enumerate(data[CONF_EDGES]):
        if not (0 <= u < n and 0 <= v < n):
            raise FileFormatError(
                f"edge {position} [{u}, {v}] references a vertex outside 0..{n - 1}",
                source,
            )
    try:
        graph = ContactGraph(n, data[CONF_EDGES], outer=data.get(CONF_OUTER))
        return Packing(graph, body, data[CONF_P], data[CONF_R], data[CONF_PINNED])
    except (GraphError, InvalidPackingError) as exc:
        raise FileFormatError(str(exc), source) from exc


def format_graph(graph: ContactGraph) -> str:
    """Return the edge-list text of a graph."""
    lines = [f"{graph.n} {graph.m}"]
    lines.extend(f"{u} {v}" for u, v in graph.edges)
    if graph.outer is not None:
        lines.append(f"{OUTER_KEYWORD} {' '.join(str(v) for v in graph.outer)}")
    return "\n".join(lines) + "\n"


def _ints(tokens: list[str], source: str | None, line: int) -> list[int]:
    try:
        return [int(token) for token in tokens]
    except ValueError as exc:
        raise FileFormatError(
            f"expected integers, got {' '.join(tokens)!r}", source, line
        ) from exc


def parse_graph_text(text: str, source: str | None = None) -> ContactGraph:
    """Parse "n m", then m lines "u v", then an optional "outer a b c" line.

    Blank lines and lines starting with # are skipped.
    """
    rows = [
        (number, raw.split())
        for number, raw in enumerate(text.splitlines(), start=1)
        if raw.strip() and not raw.lstrip().startswith("#")
    ]
    if not rows:
        raise FileFormatError("empty graph file", source)
    number, header = rows[0]
    if len(header) != 2:
        raise FileFormatError("header must be 'n m'", source, number)
    n, m = _ints(header, source, number)
    edges, outer = [], None
    for number, tokens in rows[1:]:
        if tokens[0] == OUTER_KEYWORD:
            if outer is not None or len(tokens) != 4:
                raise FileFormatError("expected one 'outer a b c' line", source, number)
            outer = _ints(tokens[1:], source, number)
            continue
        if outer is not None:
            raise FileFormatError("edges after the 'outer' line", source, number)
        if len(tokens) != 2:
            raise FileFormatError("edge lines must be 'u v'", source, number)
        u, v = _ints(tokens, source, number)
        if not (0 <= u < n and 0 <= v < n):
            raise FileFormatError(
                f"edge {len(edges)} ({u}, {v}) references a vertex outside 0..{n - 1}",
                source,
                number,
            )
        edges.append((u, v))
    if len(edges) != m:
        raise FileFormatError(f"header declares {m} edges, found {len(edges)}", source)
    try:
        return ContactGraph(n, edges, outer=outer)
    except GraphError as exc:
        raise FileFormatError(str(exc), source) from exc


def parse_campaign(
    text: str, source: str | None = None
) -> tuple[TrialConfig, dict[str, Any]]:
    """Parse a YAML campaign into its trial config and logger section."""
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise FileFormatError(f"invalid YAML: {exc}", source) from exc
    if not isinstance(data, dict):
        raise FileFormatError("campaign must be a mapping", source)
    try:
        continuation = ContinuationConfig.from_dict(data.get(CONF_CONTINUATION) or {})
        logger = LOGGER_SCHEMA(data.get(CONF_LOGGER) or {})
        config = TrialConfig.from_dict(data, continuation)
    except vol.Invalid as exc:
        raise FileFormatError(_invalid_message(exc), source) from exc
    except ValueError as exc:
        raise FileFormatError(str(exc), source) from exc
    return config, logger


async def _async_read_text(path: Path | str) -> str:
    async with aiofiles.open(path, mode="r", encoding="utf-8") as file:
        return await file.read()


async def _async_write_text(path: Path | str, text: str) -> None:
    async with aiofiles.open(path, mode="w", encoding="utf-8") as file:
        await file.write(text)
    _LOGGER.debug("Wrote %s", path)


async def _async_read_json(path: Path | str) -> Any:
    text = await _async_read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(exc.msg, str(path), exc.lineno) from exc


async def async_write_json(path: Path | str, data: Any) -> None:
    """Write a JSON document; floats keep their shortest round-trip repr."""
    await _async_write_text(path, json.dumps(data, indent=2) + "\n")


async def async_read_packing(path: Path | str) -> Packing:
    return packing_from_dict(await _async_read_json(path), str(path))


async def async_write_packing(path: Path | str, packing: Packing) -> None:
    await async_write_json(path, packing_to_dict(packing))


async def async_read_graph(path: Path | str) -> ContactGraph:
    return parse_graph_text(await _async_read_text(path), str(path))


async def async_write_graph(path: Path | str, graph: ContactGraph) -> None:
    await _async_write_text(path, format_graph(graph))


async def async_read_body(path: Path | str) -> ConvexBody:
    data = await _async_read_json(path)
    try:
        return body_from_descriptor(data)
    except vol.Invalid as exc:
        raise FileFormatError(_invalid_message(exc), str(path)) from exc


async def async_write_body(path: Path | str, body: ConvexBody) -> None:
    await async_write_json(path, body.descriptor())


async def async_read_campaign(path: Path | str) -> tuple[TrialConfig, dict[str, Any]]:
    return parse_campaign(await _async_read_text(path), str(path))
