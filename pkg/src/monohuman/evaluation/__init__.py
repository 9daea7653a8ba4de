"""Metric protocol: 3D distances, image metrics, proxy FID, reports."""

from .sampling import content_seed, sample_surface
from .distances import (
    METRIC_SCALE,
    chamfer,
    chamfer_points,
    point_to_surface,
    point_triangle_distances,
    points_to_mesh_distance,
    voxel_iou,
)
from .metrics2d import psnr, ssim, normal_mse
from .embedding import embed_images, frechet_distance, proxy_perceptual_distance
from .raster import RasterResult, rasterize_mesh, render_for_eval
from .report import (
    EvalConfig,
    MetricReport,
    evaluate_pipeline,
    eval_camera,
    ground_truth_mesh,
    write_metrics_csv,
    CSV_COLUMNS,
)

__all__ = [
    "content_seed",
    "sample_surface",
    "METRIC_SCALE",
    "chamfer",
    "chamfer_points",
    "point_to_surface",
    "point_triangle_distances",
    "points_to_mesh_distance",
    "voxel_iou",
    "psnr",
    "ssim",
    "normal_mse",
    "embed_images",
    "frechet_distance",
    "proxy_perceptual_distance",
    "RasterResult",
    "rasterize_mesh",
    "render_for_eval",
    "EvalConfig",
    "MetricReport",
    "evaluate_pipeline",
    "eval_camera",
    "ground_truth_mesh",
    "write_metrics_csv",
    "CSV_COLUMNS",
]
