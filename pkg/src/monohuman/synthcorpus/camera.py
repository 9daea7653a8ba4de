"""Orthographic cameras orbiting the body around the vertical axis.

Camera space is the world rotated by -yaw about y and shifted so `center`
sits at the origin. The viewer looks along -z in camera space, so larger
camera-space z means closer to the viewer. Pixel coordinates are continuous
with u in [0, W], v in [0, H], and v growing downward; the center of pixel
(row i, col j) is (u, v) = (j + 0.5, i + 0.5).

Back views are rendered with a yaw + pi camera and then flipped
horizontally, which makes front and back images of the same scene align
pixel-for-pixel (their silhouettes coincide).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import ConfigError


def rot_y(angle: float) -> np.ndarray:
    """Rotation about the world y axis."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]], dtype=np.float64)


@dataclass(frozen=True)
class CameraModel:
    """Orthographic camera: yaw about y, pixels per unit, image size, look-at."""

    yaw: float
    scale: float
    image_size: tuple[int, int]
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    kind: str = "orthographic"

    def __post_init__(self):
        if self.kind != "orthographic":
            raise ConfigError(f"unsupported camera kind {self.kind!r}")
        if not self.scale > 0:
            raise ConfigError("camera scale must be positive")
        w, h = self.image_size
        if w <= 0 or h <= 0:
            raise ConfigError("image size must be positive")
        object.__setattr__(self, "image_size", (int(w), int(h)))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def to_dict(self) -> dict:
        return {
            "yaw": float(self.yaw),
            "scale": float(self.scale),
            "image_size": list(self.image_size),
            "center": list(self.center),
            "kind": self.kind,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CameraModel":
        return cls(
            yaw=d["yaw"],
            scale=d["scale"],
            image_size=tuple(d["image_size"]),
            center=tuple(d.get("center", (0.0, 0.0, 0.0))),
            kind=d.get("kind", "orthographic"),
        )


def to_camera_space(camera: CameraModel, x: np.ndarray) -> np.ndarray:
    """World points (..., 3) -> camera-space points (..., 3)."""
    x = np.asarray(x, dtype=np.float64)
    rel = x - np.asarray(camera.center)
    return rel @ rot_y(-camera.yaw).T


def from_camera_space(camera: CameraModel, xc: np.ndarray) -> np.ndarray:
    """Camera-space points (..., 3) -> world points (..., 3)."""
    xc = np.asarray(xc, dtype=np.float64)
    return xc @ rot_y(camera.yaw).T + np.asarray(camera.center)


def project(camera: CameraModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project world points (..., 3) to (u, v, depth).

    depth is the camera-space z; the viewer looks along -z, so points with
    larger depth are nearer.
    """
    xc = to_camera_space(camera, x)
    w, h = camera.image_size
    u = w / 2.0 + camera.scale * xc[..., 0]
    v = h / 2.0 - camera.scale * xc[..., 1]
    return u, v, xc[..., 2]


def back_camera(camera: CameraModel) -> CameraModel:
    """The camera on the opposite side of the body (same center and scale)."""
    return CameraModel(
        yaw=camera.yaw + np.pi,
        scale=camera.scale,
        image_size=camera.image_size,
        center=camera.center,
        kind=camera.kind,
    )


def project_to_view(
    camera: CameraModel, x: np.ndarray, flipped: bool = False
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project into a stored view's pixel coordinates.

    Back views are stored horizontally mirrored (see module docstring), so
    projections into them must mirror u as well.
    """
    u, v, depth = project(camera, x)
    if flipped:
        u = camera.image_size[0] - u
    return u, v, depth
