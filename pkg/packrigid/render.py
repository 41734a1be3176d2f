"""SVG drawings of packings."""

from __future__ import annotations

import io
import logging
from pathlib import Path

import aiofiles
from matplotlib.collections import LineCollection
from matplotlib.figure import Figure
from matplotlib.patches import Polygon
import numpy as np

from .const import SVG_MARGIN, SVG_POLYGON_VERTICES
from .geometry.rigidity import Packing

_LOGGER = logging.getLogger(__name__)

BODY_GID = "body-{}"
CONTACTS_GID = "contacts"
FIGURE_SIZE = 6.0


def body_outlines(packing: Packing, vertices: int = SVG_POLYGON_VERTICES) -> np.ndarray:
    """Return the boundary polygon r_v * C + p_v of every body."""
    boundary = packing.body.boundary(vertices)
    return packing.r[:, None, None] * boundary[None, :, :] + packing.p[:, None, :]


def render_svg(packing: Packing) -> str:
    """Return the packing drawn as SVG with its contact graph overlaid."""
    outlines = body_outlines(packing)
    low = outlines.reshape(-1, 2).min(axis=0)
    high = outlines.reshape(-1, 2).max(axis=0)
    margin = SVG_MARGIN * float(np.max(high - low))

    figure = Figure(figsize=(FIGURE_SIZE, FIGURE_SIZE))
    axes = figure.add_axes((0.0, 0.0, 1.0, 1.0))
    for v, outline in enumerate(outlines):
        patch = Polygon(
            outline, closed=True, fill=False, linewidth=0.8, edgecolor="tab:blue"
        )
        patch.set_gid(BODY_GID.format(v))
        axes.add_patch(patch)
    if packing.graph.m:
        edges = packing.graph.edge_array
        segments = np.stack((packing.p[edges[:, 0]], packing.p[edges[:, 1]]), axis=1)
        lines = LineCollection(segments, colors="tab:red", linewidths=0.6)
        lines.set_gid(CONTACTS_GID)
        axes.add_collection(lines)
    axes.scatter(packing.p[:, 0], packing.p[:, 1], s=4, color="black")
    axes.set_xlim(low[0] - margin, high[0] + margin)
    axes.set_ylim(low[1] - margin, high[1] + margin)
    axes.set_aspect("equal")
    axes.set_axis_off()

    buffer = io.StringIO()
    figure.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


async def async_render_svg(packing: Packing, path: Path | str) -> None:
    """Write the SVG drawing of packing to path."""
    text = render_svg(packing)
    async with aiofiles.open(path, mode="w", encoding="utf-8") as file:
        await file.write(text)
    _LOGGER.debug("Rendered %d bodies to %s", packing.n, path)
