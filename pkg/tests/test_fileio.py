"""Tests for packing, graph, body and campaign files."""
import json
from pathlib import Path

import numpy as np
import pytest

from packrigid.const import DEFAULT_TRIALS, BodyFamily, HomotopyPath
from packrigid.fileio import (
    FileFormatError,
    async_read_body,
    async_read_campaign,
    async_read_graph,
    async_read_packing,
    async_write_body,
    async_write_graph,
    async_write_packing,
    format_graph,
    packing_from_dict,
    packing_to_dict,
    parse_campaign,
    parse_graph_text,
)
from packrigid.geometry.body import PNormBody

CONFIG_DIR = Path(__file__).parent.parent / "config"


def test_packing_document(disc_k4):
    data = packing_to_dict(disc_k4)
    assert data["body"] == {"kind": "disc"}
    assert data["outer"] == [0, 1, 2]
    assert data["pinned"] == [0, 1, 2]
    packing = packing_from_dict(json.loads(json.dumps(data)))
    assert packing.graph == disc_k4.graph
    assert packing.pinned == disc_k4.pinned
    assert np.array_equal(packing.p, disc_k4.p)
    assert np.array_equal(packing.r, disc_k4.r)


def test_packing_document_without_outer(square):
    data = packing_to_dict(square)
    assert "outer" not in data
    packing = packing_from_dict(data)
    assert packing.graph == square.graph
    assert packing.body.norm(np.array([3.0, 1.0])) == pytest.approx(3.0)


def test_packing_edge_out_of_range(disc_k4):
    data = packing_to_dict(disc_k4)
    data["edges"][1] = [0, 7]
    with pytest.raises(FileFormatError, match="edge 1"):
        packing_from_dict(data, "k4.json")


@pytest.mark.parametrize(
    "key,value",
    [
        ("body", {"kind": "hexagon"}),
        ("r", [1.0, 1.0]),
        ("p", [[0.0, 0.0, 0.0]]),
        ("outer", [0, 1, 3, 2]),
    ],
    ids=["body", "radii", "point", "outer"],
)
def test_packing_document_errors(disc_k4, key, value):
    data = packing_to_dict(disc_k4)
    data[key] = value
    with pytest.raises(FileFormatError) as err:
        packing_from_dict(data, "k4.json")
    assert str(err.value).startswith("k4.json: ")


async def test_packing_file(tmp_path, exp_k4):
    path = tmp_path / "exp.json"
    await async_write_packing(path, exp_k4)
    packing = await async_read_packing(path)
    assert packing.graph == exp_k4.graph
    assert np.array_equal(packing.p, exp_k4.p)
    assert np.array_equal(packing.r, exp_k4.r)
    assert np.array_equal(packing.body.directions, exp_k4.body.directions)
    assert packing.body.w == exp_k4.body.w


async def test_invalid_json_reports_its_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "n": 4,\n}\n', encoding="utf-8")
    with pytest.raises(FileFormatError) as err:
        await async_read_packing(path)
    assert err.value.line == 3
    assert err.value.source == str(path)


async def test_body_file(tmp_path):
    path = tmp_path / "body.json"
    await async_write_body(path, PNormBody(3.5))
    body = await async_read_body(path)
    assert isinstance(body, PNormBody)
    assert body.p == 3.5
    path.write_text('{"kind": "pnorm", "p": 1.0}', encoding="utf-8")
    with pytest.raises(FileFormatError):
        await async_read_body(path)


def test_graph_text(k4):
    text = format_graph(k4)
    assert text.splitlines()[0] == "4 6"
    assert text.splitlines()[-1] == "outer 0 1 2"
    assert parse_graph_text(text) == k4


def test_graph_text_skips_comments():
    text = "# a path\n3 2\n\n0 1\n  # middle\n1 2\n"
    graph = parse_graph_text(text)
    assert graph.edges == ((0, 1), (1, 2))
    assert graph.outer is None


@pytest.mark.parametrize(
    "text,line,message",
    [
        ("4 2\n0 1\n0 9\n", 3, "edge 1"),
        ("3 x\n", 1, "integers"),
        ("3\n0 1\n", 1, "header"),
        ("3 1\n0 1 2\n", 2, "edge lines"),
        ("3 3\n0 1\nouter 0 1 2\n1 2\n0 2\n", 4, "after"),
        ("3 3\n0 1\n1 2\n0 2\nouter 0 1\n", 5, "outer"),
    ],
    ids=["range", "integers", "header", "edge", "edge-after-outer", "short-outer"],
)
def test_graph_text_errors(text, line, message):
    with pytest.raises(FileFormatError, match=message) as err:
        parse_graph_text(text, "g.txt")
    assert err.value.line == line


@pytest.mark.parametrize(
    "text,message",
    [
        ("", "empty"),
        ("3 2\n0 1\n", "declares 2"),
        ("3 2\n0 1\n1 0\n", "edge 1"),
        ("4 2\n0 1\n1 2\nouter 0 1 2\n", "clique"),
    ],
    ids=["empty", "count", "repeated", "outer-clique"],
)
def test_graph_text_structure_errors(text, message):
    with pytest.raises(FileFormatError, match=message):
        parse_graph_text(text)


async def test_graph_file(tmp_path, k4):
    path = tmp_path / "k4.txt"
    await async_write_graph(path, k4)
    assert await async_read_graph(path) == k4


def test_campaign_defaults():
    cfg, logger = parse_campaign("")
    assert cfg.trials == DEFAULT_TRIALS
    assert cfg.continuation.homotopy_path is HomotopyPath.Profile
    assert logger == {"default": "info", "logs": {}}


async def test_shipped_campaigns():
    cfg, logger = await async_read_campaign(CONFIG_DIR / "trials.yaml")
    assert cfg.families == (BodyFamily.ExpFamily, BodyFamily.PNorm)
    assert cfg.continuation.newton_tol == 1e-11
    assert logger["default"] == "info"
    control, _ = await async_read_campaign(CONFIG_DIR / "control.yaml")
    assert control.families == (BodyFamily.Disc,)
    assert control.subgraph_edges == (6, 14)


@pytest.mark.parametrize(
    "text,message",
    [
        ("trials: 0\n", "trials"),
        ("- 1\n- 2\n", "mapping"),
        ("trials: [\n", "invalid YAML"),
        ("continuation:\n  homotopy_path: straight\n", "homotopy_path"),
        ("continuation:\n  initial_step: 0.01\n  min_step: 0.1\n", "min_step"),
        ("n_range: [2, 5]\n", "n range"),
        ("logger:\n  default: loud\n", "default"),
    ],
    ids=["trials", "mapping", "yaml", "path", "steps", "n-range", "logger"],
)
def test_campaign_errors(text, message):
    with pytest.raises(FileFormatError, match=message):
        parse_campaign(text, "campaign.yaml")
