"""
Procedural handwriting: every symbol is a fixed set of polyline strokes in a unit box,
warped by a small seeded affine jitter and rasterized with soft edges.
"""
import typing as T

import numpy as np
import numpy.typing as npt

from descatter.errors import ConfigError
from .image_ops import normalize
from .models import DIGITS, LETTERS, GlyphSpec, Image

Stroke = list[tuple[float, float]]

# glyph unit box -> image fraction
BOX_X = (0.3, 0.7)
BOX_Y = (0.2, 0.8)

STROKE_WIDTH = (0.05, 0.09)
EDGE_PX = 1.5


def arc(
    cx: float, cy: float, rx: float, ry: float, start_deg: float, end_deg: float, steps: int = 24
) -> Stroke:
    """y grows downwards, so 90 degrees is the bottom of the ellipse"""
    t = np.deg2rad(np.linspace(start_deg, end_deg, steps))
    return [(float(cx + rx * np.cos(a)), float(cy + ry * np.sin(a))) for a in t]


def _templates() -> dict[str, list[Stroke]]:
    p_bowl: Stroke = [(0, 1), (0, 0), (0.55, 0), *arc(0.55, 0.27, 0.4, 0.27, 270, 450), (0, 0.54)]
    o_ring = arc(0.5, 0.5, 0.5, 0.5, 0, 360, steps=40)
    return {
        "0": [o_ring],
        "1": [[(0.3, 0.2), (0.55, 0), (0.55, 1)]],
        "2": [[*arc(0.5, 0.28, 0.45, 0.28, 190, 400), (0, 1), (1, 1)]],
        "3": [arc(0.5, 0.25, 0.45, 0.25, 200, 450), arc(0.5, 0.75, 0.5, 0.25, 270, 520)],
        "4": [[(0.7, 1), (0.7, 0), (0, 0.7), (1, 0.7)]],
        "5": [[(0.9, 0), (0.15, 0), (0.12, 0.45), *arc(0.48, 0.68, 0.45, 0.32, 225, 495)]],
        "6": [[(0.8, 0), (0.3, 0.3), (0.05, 0.68)], arc(0.5, 0.68, 0.45, 0.32, 0, 360, steps=32)],
        "7": [[(0, 0), (1, 0), (0.35, 1)]],
        "8": [
            arc(0.5, 0.25, 0.38, 0.25, 0, 360, steps=32),
            arc(0.5, 0.75, 0.48, 0.25, 0, 360, steps=32),
        ],
        "9": [arc(0.5, 0.32, 0.45, 0.32, 0, 360, steps=32), [(0.95, 0.32), (0.85, 1)]],
        "A": [[(0, 1), (0.5, 0), (1, 1)], [(0.22, 0.6), (0.78, 0.6)]],
        "B": [
            [(0, 0), (0, 1)],
            [(0, 0), (0.6, 0), *arc(0.6, 0.25, 0.35, 0.25, 270, 450), (0, 0.5)],
            [(0, 0.5), (0.6, 0.5), *arc(0.6, 0.75, 0.4, 0.25, 270, 450), (0, 1)],
        ],
        "C": [arc(0.55, 0.5, 0.5, 0.5, 45, 315, steps=32)],
        "D": [[(0, 0), (0, 1)], [(0, 0), (0.4, 0), *arc(0.4, 0.5, 0.55, 0.5, 270, 450), (0, 1)]],
        "E": [[(1, 0), (0, 0), (0, 1), (1, 1)], [(0, 0.5), (0.75, 0.5)]],
        "F": [[(1, 0), (0, 0), (0, 1)], [(0, 0.5), (0.75, 0.5)]],
        "G": [[*arc(0.55, 0.5, 0.5, 0.5, -45, -315, steps=32), (1, 0.55), (0.6, 0.55)]],
        "H": [[(0, 0), (0, 1)], [(1, 0), (1, 1)], [(0, 0.5), (1, 0.5)]],
        "I": [[(0.5, 0), (0.5, 1)], [(0.2, 0), (0.8, 0)], [(0.2, 1), (0.8, 1)]],
        "J": [[(0.2, 0), (0.9, 0)], [(0.7, 0), (0.7, 0.7), *arc(0.4, 0.7, 0.3, 0.3, 0, 180)]],
        "K": [[(0, 0), (0, 1)], [(0.9, 0), (0, 0.55)], [(0.3, 0.4), (1, 1)]],
        "L": [[(0, 0), (0, 1), (0.9, 1)]],
        "M": [[(0, 1), (0, 0), (0.5, 0.6), (1, 0), (1, 1)]],
        "N": [[(0, 1), (0, 0), (1, 1), (1, 0)]],
        "O": [o_ring],
        "P": [p_bowl],
        "Q": [o_ring, [(0.6, 0.7), (1, 1)]],
        "R": [p_bowl, [(0.4, 0.54), (1, 1)]],
        "S": [arc(0.5, 0.25, 0.45, 0.25, -20, -270), arc(0.5, 0.75, 0.5, 0.25, -90, 160)],
        "T": [[(0, 0), (1, 0)], [(0.5, 0), (0.5, 1)]],
        "U": [[(0, 0), (0, 0.6), *arc(0.5, 0.6, 0.5, 0.4, 180, 0), (1, 0)]],
        "V": [[(0, 0), (0.5, 1), (1, 0)]],
        "W": [[(0, 0), (0.25, 1), (0.5, 0.35), (0.75, 1), (1, 0)]],
        "X": [[(0, 0), (1, 1)], [(1, 0), (0, 1)]],
        "Y": [[(0, 0), (0.5, 0.5), (1, 0)], [(0.5, 0.5), (0.5, 1)]],
        "Z": [[(0, 0), (1, 0), (0, 1), (1, 1)]],
    }


TEMPLATES: T.Final[dict[str, list[Stroke]]] = _templates()
SUPPORTED_SYMBOLS = DIGITS + LETTERS


def _jittered_strokes(
    strokes: list[Stroke], rng: np.random.Generator
) -> list[npt.NDArray[np.float64]]:
    """
    Map template strokes into image fractions, then apply a seeded affine warp plus a
    per-stroke shift. The displacement of any control point stays below 5% of the side.
    """
    shift = rng.uniform(-0.015, 0.015, size=2)
    shear = rng.uniform(-0.06, 0.06, size=(2, 2))
    out = []
    for stroke in strokes:
        pts = np.asarray(stroke, dtype=np.float64)
        pts = np.column_stack(
            [
                BOX_X[0] + (BOX_X[1] - BOX_X[0]) * pts[:, 0],
                BOX_Y[0] + (BOX_Y[1] - BOX_Y[0]) * pts[:, 1],
            ]
        )
        pts = pts + shift + (pts - 0.5) @ shear.T + rng.uniform(-0.008, 0.008, size=2)
        out.append(pts)
    return out


Grid = npt.NDArray[np.float64]


def _segment_distance(px: Grid, py: Grid, a: Grid, b: Grid) -> npt.NDArray[np.float64]:
    d = b - a
    length2 = float(d @ d)
    if length2 == 0:
        return np.hypot(px - a[0], py - a[1])
    t = np.clip(((px - a[0]) * d[0] + (py - a[1]) * d[1]) / length2, 0.0, 1.0)
    return np.hypot(px - (a[0] + t * d[0]), py - (a[1] + t * d[1]))


def render_glyph(spec: GlyphSpec, n: int) -> Image:
    if spec.symbol not in TEMPLATES:
        raise ConfigError(
            f"No glyph template for {spec.symbol!r}.",
            extensions={"symbol": spec.symbol, "supported": SUPPORTED_SYMBOLS},
        )
    rng = np.random.default_rng(spec.style_seed)
    width = rng.uniform(*STROKE_WIDTH) * n
    strokes = _jittered_strokes(TEMPLATES[spec.symbol], rng)

    centers = np.arange(n, dtype=np.float64) + 0.5
    py, px = np.meshgrid(centers, centers, indexing="ij")
    dist = np.full((n, n), np.inf)
    for stroke in strokes:
        pts = stroke * n
        for a, b in zip(pts[:-1], pts[1:]):
            np.minimum(dist, _segment_distance(px, py, a, b), out=dist)

    ink = np.clip((width / 2 - dist) / EDGE_PX + 0.5, 0.0, 1.0)
    return normalize(ink)


__all__ = ["render_glyph", "arc", "TEMPLATES", "SUPPORTED_SYMBOLS", "BOX_X", "BOX_Y"]
