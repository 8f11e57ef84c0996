"""Point clouds sampled on object bounding-box surfaces."""

from dataclasses import dataclass

import numpy as np

from ..errors import SensorError
from ..utils.seeding import rng_for

MIN_POINTS = 8


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray

    @property
    def n(self) -> int:
        return int(self.points.shape[0])


def face_areas(half) -> np.ndarray:
    """Areas of the six faces in order -x, +x, -y, +y, -z, +z."""
    hx, hy, hz = half
    yz, xz, xy = 4 * hy * hz, 4 * hx * hz, 4 * hx * hy
    return np.array([yz, yz, xz, xz, xy, xy], dtype=np.float64)


def observe(obj, n_points: int = 256, seed: int = 0) -> PointCloud:
    """Sample ``n_points`` points uniformly (area-weighted) on the bbox faces.

    Args:
        obj: ObjectInstance to scan
        n_points: Number of points, at least 8
        seed: Sampling seed

    Returns:
        PointCloud of shape (n_points, 3) in world coordinates
    """
    if n_points < MIN_POINTS:
        raise SensorError(f"n_points must be >= {MIN_POINTS}, got {n_points}")
    center = np.asarray(obj.bbox.center, dtype=np.float64)
    half = np.asarray(obj.bbox.half, dtype=np.float64)
    rng = rng_for("observe", obj.seed, seed)
    areas = face_areas(half)
    faces = rng.choice(6, size=n_points, p=areas / areas.sum())
    local = rng.uniform(-1.0, 1.0, size=(n_points, 3))
    axes = faces // 2
    signs = np.where(faces % 2 == 0, -1.0, 1.0)
    local[np.arange(n_points), axes] = signs
    return PointCloud(points=center + local * half)
