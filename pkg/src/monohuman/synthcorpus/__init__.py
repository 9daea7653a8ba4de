"""Procedural humanoid corpus: analytic body SDF, textures, renderer, manifests."""

from .body import (
    HumanoidScene,
    SEGMENTS,
    KEYPOINT_NAMES,
    KEYPOINT_FLIP,
    SEGMENT_FLIP,
    body_sdf,
    body_capsules,
    nearest_segment,
    keypoint_positions,
    default_shape,
)
from .patterns import PatternSpec, TextureSpec, REGIONS, DEFAULT_REGION_MAP, surface_color
from .camera import CameraModel, project, rot_y, back_camera, project_to_view
from .render import RenderSample, render_view
from .sampling import sample_occupancy_points
from .corpus import CorpusConfig, DatasetManifest, generate_corpus

__all__ = [
    "HumanoidScene",
    "SEGMENTS",
    "KEYPOINT_NAMES",
    "KEYPOINT_FLIP",
    "SEGMENT_FLIP",
    "body_sdf",
    "body_capsules",
    "nearest_segment",
    "keypoint_positions",
    "default_shape",
    "PatternSpec",
    "TextureSpec",
    "REGIONS",
    "DEFAULT_REGION_MAP",
    "surface_color",
    "CameraModel",
    "project",
    "rot_y",
    "back_camera",
    "project_to_view",
    "RenderSample",
    "render_view",
    "sample_occupancy_points",
    "CorpusConfig",
    "DatasetManifest",
    "generate_corpus",
]
