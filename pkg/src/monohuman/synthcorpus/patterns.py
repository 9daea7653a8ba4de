"""Procedural surface textures evaluated in segment-local coordinates.

Each body region (shirt, pants, skin, head) carries a pattern spec. Colors
are a pure function of the 3D point, so any two views of the same scene are
exactly photo-consistent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..errors import ConfigError
from .body import HumanoidScene, SEGMENTS, body_capsules, nearest_segment

PATTERNS = ("solid", "stripes", "checker", "dots")
REGIONS = ("shirt", "pants", "skin", "head")

DEFAULT_REGION_MAP = {
    "torso": "shirt",
    "head": "head",
    "l_upper_arm": "shirt",
    "l_lower_arm": "skin",
    "r_upper_arm": "shirt",
    "r_lower_arm": "skin",
    "l_upper_leg": "pants",
    "l_lower_leg": "pants",
    "r_upper_leg": "pants",
    "r_lower_leg": "pants",
}


@dataclass(frozen=True)
class PatternSpec:
    """One pattern: kind, 1-3 RGB colors in [0, 1], cycles per unit length."""

    pattern: str
    palette: tuple[tuple[float, float, float], ...]
    frequency: float = 1.0

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ConfigError(f"unknown pattern {self.pattern!r}, expected one of {PATTERNS}")
        palette = tuple(tuple(float(c) for c in col) for col in self.palette)
        object.__setattr__(self, "palette", palette)
        if not 1 <= len(palette) <= 3:
            raise ConfigError("palette must hold 1 to 3 colors")
        if self.pattern != "solid" and len(palette) < 2:
            raise ConfigError(f"pattern {self.pattern!r} needs at least 2 palette colors")
        for col in palette:
            if len(col) != 3 or any(not 0.0 <= c <= 1.0 for c in col):
                raise ConfigError(f"palette color {col} must be an RGB triple in [0, 1]")
        if not self.frequency > 0:
            raise ConfigError("pattern frequency must be positive")

    def to_dict(self) -> dict:
        return {
            "pattern": self.pattern,
            "palette": [list(c) for c in self.palette],
            "frequency": self.frequency,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PatternSpec":
        return cls(d["pattern"], tuple(tuple(c) for c in d["palette"]), d["frequency"])


@dataclass(frozen=True)
class TextureSpec:
    """Pattern specs per region plus the segment-to-region assignment."""

    regions: Mapping[str, PatternSpec]
    region_map: Mapping[str, str] = None

    def __post_init__(self):
        object.__setattr__(self, "regions", dict(self.regions))
        rmap = dict(DEFAULT_REGION_MAP if self.region_map is None else self.region_map)
        object.__setattr__(self, "region_map", rmap)
        for seg in SEGMENTS:
            if seg not in rmap:
                raise ConfigError(f"region_map misses segment {seg!r}")
            if rmap[seg] not in self.regions:
                raise ConfigError(f"no pattern spec for region {rmap[seg]!r}")

    @classmethod
    def uniform(cls, spec: PatternSpec) -> "TextureSpec":
        return cls(regions={r: spec for r in REGIONS})

    def to_dict(self) -> dict:
        return {
            "regions": {r: p.to_dict() for r, p in self.regions.items()},
            "region_map": dict(self.region_map),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TextureSpec":
        return cls(
            regions={r: PatternSpec.from_dict(p) for r, p in d["regions"].items()},
            region_map=dict(d["region_map"]),
        )


def pattern_color(spec: PatternSpec, local_pts: np.ndarray) -> np.ndarray:
    """Evaluate a pattern at local coordinates (N, 3) -> colors (N, 3).

    stripes: palette[floor(z * 2f) mod n]; checker: palette[(sum of floored
    half-cells) mod 2]; dots: palette[1] inside balls of radius 0.25 cells
    centered on an f-pitch lattice, palette[0] elsewhere.
    """
    pts = np.atleast_2d(np.asarray(local_pts, dtype=np.float64))
    n = pts.shape[0]
    pal = np.asarray(spec.palette, dtype=np.float64)
    f = spec.frequency
    if spec.pattern == "solid":
        return np.broadcast_to(pal[0], (n, 3)).copy()
    if spec.pattern == "stripes":
        idx = np.floor(pts[:, 2] * 2.0 * f).astype(np.int64) % len(pal)
        return pal[idx]
    if spec.pattern == "checker":
        cells = np.floor(pts * 2.0 * f).astype(np.int64).sum(axis=1)
        return pal[cells % 2]
    # dots
    frac = pts * f - np.floor(pts * f)
    inside = np.linalg.norm(frac - 0.5, axis=1) < 0.25
    return np.where(inside[:, None], pal[1], pal[0])


def _local_frame(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-handed orthonormal frame with the capsule axis as local z."""
    w = b - a
    norm = np.linalg.norm(w)
    w = np.array([0.0, 0.0, 1.0]) if norm < 1e-12 else w / norm
    ref = np.array([1.0, 0.0, 0.0]) if abs(w[0]) < 0.9 else np.array([0.0, 0.0, 1.0])
    u = ref - (ref @ w) * w
    u = u / np.linalg.norm(u)
    v = np.cross(w, u)
    return u, v, w


def surface_color(scene: HumanoidScene, p: np.ndarray) -> np.ndarray:
    """Albedo at world points p (N, 3) -> RGB (N, 3) in [0, 1].

    The point is assigned to its nearest capsule; the pattern of that
    segment's region is evaluated in the capsule frame whose origin is the
    segment midpoint and whose z-axis is the capsule axis.
    """
    pts = np.atleast_2d(np.asarray(p, dtype=np.float64))
    seg_idx = nearest_segment(scene, pts)
    a, b, _ = body_capsules(scene)
    out = np.empty((pts.shape[0], 3))
    for si in np.unique(seg_idx):
        mask = seg_idx == si
        u, v, w = _local_frame(a[si], b[si])
        mid = (a[si] + b[si]) / 2.0
        rel = pts[mask] - mid
        local = np.stack([rel @ u, rel @ v, rel @ w], axis=1)
        region = scene.texture.region_map[SEGMENTS[si]]
        out[mask] = pattern_color(scene.texture.regions[region], local)
    return out
