"""Pixel-aligned implicit geometry: features, occupancy fields, meshing."""

from .features import (
    COARSE_CHANNELS,
    FINE_CHANNELS,
    FeatureEncoder,
    PixelFeatureMap,
    bilinear_sample,
    build_input_stack,
    encode_features,
)
from .implicit import (
    EMBEDDING_DIM,
    ImplicitField,
    build_field,
    occupancy_coarse,
    occupancy_fine,
    point_embedding,
)
from .marching import grid_coordinates, marching_cubes
from .mesh import (
    TriangleMesh,
    euler_characteristic,
    face_components,
    is_watertight,
    largest_watertight_component,
    submesh,
    voxelize_mesh,
)
from .normals import (
    NormalEstimator,
    NormalNet,
    angular_error_deg,
    apply_normal_net,
    build_normal_estimator,
    estimate_normals,
    train_normal_net,
)
from .training import (
    GeoCheckpoint,
    GeoTrainConfig,
    extract_mesh,
    field_grid_values,
    load_geo_checkpoint,
    save_geo_checkpoint,
    train_geometry,
)

__all__ = [
    "COARSE_CHANNELS",
    "EMBEDDING_DIM",
    "FINE_CHANNELS",
    "FeatureEncoder",
    "GeoCheckpoint",
    "GeoTrainConfig",
    "ImplicitField",
    "NormalEstimator",
    "NormalNet",
    "PixelFeatureMap",
    "TriangleMesh",
    "angular_error_deg",
    "apply_normal_net",
    "bilinear_sample",
    "build_field",
    "build_input_stack",
    "build_normal_estimator",
    "encode_features",
    "estimate_normals",
    "euler_characteristic",
    "extract_mesh",
    "face_components",
    "field_grid_values",
    "grid_coordinates",
    "is_watertight",
    "largest_watertight_component",
    "load_geo_checkpoint",
    "marching_cubes",
    "occupancy_coarse",
    "occupancy_fine",
    "point_embedding",
    "save_geo_checkpoint",
    "submesh",
    "train_geometry",
    "train_normal_net",
    "voxelize_mesh",
]
