"""Rasterize tactile readings as arrowed marker heatmaps."""

from dataclasses import dataclass

import numpy as np

from .tactile import TactileReading, marker_grid

DOT_VALUE = 1.0
ARROW_VALUE = 0.5
HEAD_ANGLE = np.deg2rad(150)
MIN_HEAD_PIXELS = 2.0


@dataclass(frozen=True, eq=False)
class HeatmapImage:
    width: int
    height: int
    values: np.ndarray

    @property
    def channels(self) -> int:
        return 1

    def mass(self) -> float:
        return float(self.values.sum())


def _to_pixels(points: np.ndarray, width: int, height: int) -> np.ndarray:
    return points * np.array([width - 1, height - 1], dtype=np.float64)


def _draw_segment(values: np.ndarray, start: np.ndarray, end: np.ndarray):
    length = float(np.linalg.norm(end - start))
    steps = int(np.ceil(length * 2)) + 1
    height, width = values.shape
    for t in np.linspace(0.0, 1.0, steps):
        x, y = np.rint(start + t * (end - start)).astype(int)
        if not (0 <= x < width and 0 <= y < height):
            continue
        values[y, x] = max(values[y, x], ARROW_VALUE)


def marker_template(grid: int, width: int = 64, height: int = 64) -> HeatmapImage:
    """Heatmap of the undeformed marker grid: one dot per marker."""
    values = np.zeros((height, width), dtype=np.float64)
    pixels = _to_pixels(marker_grid(grid).reshape(-1, 2), width, height)
    for x, y in np.rint(pixels).astype(int):
        values[y, x] = DOT_VALUE
    return HeatmapImage(width=width, height=height, values=values)


def render_tactile_heatmap(
    reading: TactileReading, width: int = 64, height: int = 64
) -> HeatmapImage:
    """Draw a dot at every initial marker and an arrow to its final position.

    Arrow shafts and heads have intensity 0.5 and never overwrite dots.
    Arrows shorter than two pixels are drawn without heads.

    Args:
        reading: Tactile reading to render
        width: Image width in pixels
        height: Image height in pixels

    Returns:
        HeatmapImage with values in [0, 1]
    """
    grid = reading.marker_init.shape[0]
    image = marker_template(grid, width, height)
    values = image.values.copy()
    starts = _to_pixels(reading.marker_init.reshape(-1, 2), width, height)
    ends = _to_pixels(reading.marker_final.reshape(-1, 2), width, height)
    for start, end in zip(starts, ends):
        vector = end - start
        length = float(np.linalg.norm(vector))
        if length < 0.5:
            continue
        _draw_segment(values, start, end)
        if length >= MIN_HEAD_PIXELS:
            head = min(3.0, 0.35 * length)
            unit = vector / length
            for angle in (HEAD_ANGLE, -HEAD_ANGLE):
                c, s = np.cos(angle), np.sin(angle)
                barb = np.array([c * unit[0] - s * unit[1], s * unit[0] + c * unit[1]])
                _draw_segment(values, end, end + head * barb)
    return HeatmapImage(width=width, height=height, values=np.clip(values, 0.0, 1.0))
