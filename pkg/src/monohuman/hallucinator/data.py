"""Manifest-backed view loading and guidance assembly for training."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..synthcorpus.body import HumanoidScene, keypoint_positions
from ..synthcorpus.camera import CameraModel, back_camera, project_to_view
from ..synthcorpus.corpus import DatasetManifest
from ..synthcorpus.imageio import load_keypoints, load_label8, load_rgb8
from .guidance import (
    DEFAULT_HEATMAP_SIGMA,
    KEYPOINT_KIND,
    SEG_KIND,
    Guidance,
    keypoint_guidance,
    seg_guidance,
)


@dataclass
class ViewData:
    """One rendered view with its annotations."""

    rgb: np.ndarray
    part_seg: np.ndarray
    keypoints: np.ndarray
    camera: CameraModel
    view_tag: str
    scene_id: str


def load_view(manifest: DatasetManifest, record: dict, view_key: str) -> ViewData:
    view = record[view_key]
    return ViewData(
        rgb=load_rgb8(manifest.resolve(view["rgb"])),
        part_seg=load_label8(manifest.resolve(view["seg"])),
        keypoints=load_keypoints(manifest.resolve(view["keypoints"])),
        camera=CameraModel.from_dict(view["camera"]),
        view_tag=view["view_tag"],
        scene_id=record["scene_id"],
    )


def build_guidance(view: ViewData, kind: str, sigma: float = DEFAULT_HEATMAP_SIGMA) -> Guidance:
    if kind == KEYPOINT_KIND:
        return keypoint_guidance(view.keypoints, view.camera.image_size, sigma=sigma)
    return seg_guidance(view.part_seg)


def synthetic_back_keypoints(scene: HumanoidScene, front_camera: CameraModel) -> np.ndarray:
    """Exact back-view keypoints for a record that stores no back view.

    Projects the scene's joints through the opposing camera with the
    horizontal flip that co-registers back views with their front views.
    """
    cam_b = back_camera(front_camera)
    joints = keypoint_positions(scene)
    w, h = front_camera.image_size
    rows = np.zeros((joints.shape[0], 4), dtype=np.float32)
    for k, p in enumerate(joints):
        u, v, _ = project_to_view(cam_b, p, flipped=True)
        visible = 0.0 <= u <= w and 0.0 <= v <= h
        rows[k] = (k, u, v, float(visible))
    return rows


def record_by_id(manifest: DatasetManifest, scene_id: str) -> dict:
    for record in manifest.records():
        if record["scene_id"] == scene_id:
            return record
    raise KeyError(f"no record for scene {scene_id!r}")


def has_view(record: dict, view_key: str) -> bool:
    return record.get(view_key) is not None


def view_pairs(manifest: DatasetManifest, split: str) -> list[tuple[dict, str, str]]:
    """Sibling-view prediction tasks: (record, ref_key, target_key), both ways."""
    tasks = []
    for record in manifest.records(split):
        second = "back" if has_view(record, "back") else "pair"
        if not has_view(record, second):
            continue
        tasks.append((record, "front", second))
        tasks.append((record, second, "front"))
    return tasks


def silhouette_of(image: np.ndarray, threshold: float = 0.06) -> np.ndarray:
    """Foreground mask from rendered-image brightness (black background)."""
    return (np.asarray(image).max(axis=2) > threshold).astype(np.float32)


GUIDANCE_KINDS = (KEYPOINT_KIND, SEG_KIND)
