"""Dual-view per-vertex texture projection and learned refinement."""

from .networks import (
    FEATURE_CHANNELS,
    SINE_OMEGA,
    TextureFeatureExtractor,
    VertexRefiner,
    build_texture_nets,
)
from .refine import refine_texture, refiner_inputs
from .training import (
    TEX_FORMAT_VERSION,
    TEX_MAGIC,
    TexCheckpoint,
    TexTrainConfig,
    eval_texture_l1,
    gt_scene_mesh,
    gt_vertex_colors,
    load_tex_checkpoint,
    prepare_scene_samples,
    project_to_surface,
    save_tex_checkpoint,
    train_texture,
)
from .visibility import (
    DEFAULT_EPS_Z,
    VertexColorField,
    bilinear_image_sample,
    project_colors,
    visibility_mask,
)

__all__ = [
    "FEATURE_CHANNELS",
    "SINE_OMEGA",
    "TextureFeatureExtractor",
    "VertexRefiner",
    "build_texture_nets",
    "refine_texture",
    "refiner_inputs",
    "TEX_FORMAT_VERSION",
    "TEX_MAGIC",
    "TexCheckpoint",
    "TexTrainConfig",
    "eval_texture_l1",
    "gt_scene_mesh",
    "gt_vertex_colors",
    "load_tex_checkpoint",
    "prepare_scene_samples",
    "project_to_surface",
    "save_tex_checkpoint",
    "train_texture",
    "DEFAULT_EPS_Z",
    "VertexColorField",
    "bilinear_image_sample",
    "project_colors",
    "visibility_mask",
]
