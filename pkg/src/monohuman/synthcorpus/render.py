"""Orthographic sphere-traced rendering of humanoid scenes.

Produces the per-view ground truth consumed everywhere downstream: albedo
image, silhouette, part segmentation, camera-space normal map, and 2D
keypoints. Back views are traced from the opposite camera and stored
horizontally mirrored so they align pixel-for-pixel with the front view.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from .body import (
    HumanoidScene,
    body_sdf,
    body_sdf_gradient,
    keypoint_positions,
    nearest_segment,
    scene_bounds,
)
from .camera import CameraModel, back_camera, from_camera_space, project, rot_y, to_camera_space
from .patterns import surface_color

log = logging.getLogger(__name__)

MAX_STEPS = 128
HIT_EPS = 1e-3
VIEW_TAGS = ("front", "back")


@dataclass
class RenderSample:
    """All ground-truth channels of one rendered view.

    rgb: (H, W, 3) float32 in [0, 1], black background.
    silhouette: (H, W) bool.
    part_seg: (H, W) uint8, 0 for background, 1..10 for body segments.
    normal_map: (H, W, 3) float32 camera-space unit normals, 0 outside.
    keypoints: (14, 4) float32 rows (joint_id, u, v, visible).
    camera: the camera the rays were traced from (for back views this is
        the yaw + pi camera; the stored arrays are mirrored, see module doc).
    """

    rgb: np.ndarray
    silhouette: np.ndarray
    part_seg: np.ndarray
    normal_map: np.ndarray
    keypoints: np.ndarray
    camera: CameraModel
    view_tag: str = "front"
    scene_id: str = ""
    max_step_pixels: int = 0


def _trace_rays(scene: HumanoidScene, camera: CameraModel, xc: np.ndarray, yc: np.ndarray):
    """Sphere-trace orthographic rays given camera-plane coords (N,).

    Returns (hit mask (N,), world hit points (N, 3), unfinished ray count).
    """
    n = xc.shape[0]
    lo, hi = scene_bounds(scene)
    corners = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    zc = to_camera_space(camera, corners)[:, 2]
    z_start = float(zc.max()) + 0.05
    z_stop = float(zc.min()) - 0.05

    z = np.full(n, z_start)
    alive = np.arange(n)
    hit = np.zeros(n, dtype=bool)
    for _ in range(MAX_STEPS):
        if alive.size == 0:
            break
        pts_c = np.stack([xc[alive], yc[alive], z[alive]], axis=1)
        d = body_sdf(scene, from_camera_space(camera, pts_c))
        now_hit = d < HIT_EPS
        hit[alive[now_hit]] = True
        z[alive] -= d  # rays travel toward -z; the SDF bounds the safe step
        keep = ~now_hit & (z[alive] > z_stop)
        alive = alive[keep]

    unfinished = int(alive.size)
    pts_c = np.stack([xc, yc, z], axis=1)
    return hit, from_camera_space(camera, pts_c), unfinished


def _render_raw(scene: HumanoidScene, camera: CameraModel) -> RenderSample:
    w, h = camera.image_size
    rgb = np.zeros((h, w, 3), dtype=np.float32)
    sil = np.zeros((h, w), dtype=bool)
    seg = np.zeros((h, w), dtype=np.uint8)
    nrm = np.zeros((h, w, 3), dtype=np.float32)

    # Only trace pixels inside the projected bounding box of the body.
    lo, hi = scene_bounds(scene)
    corners = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    cu, cv, _ = project(camera, corners)
    j0, j1 = max(0, int(np.floor(cu.min())) - 1), min(w, int(np.ceil(cu.max())) + 1)
    i0, i1 = max(0, int(np.floor(cv.min())) - 1), min(h, int(np.ceil(cv.max())) + 1)

    unfinished = 0
    if j1 > j0 and i1 > i0:
        jj, ii = np.meshgrid(np.arange(j0, j1), np.arange(i0, i1))
        jj, ii = jj.ravel(), ii.ravel()
        xc = (jj + 0.5 - w / 2.0) / camera.scale
        yc = (h / 2.0 - (ii + 0.5)) / camera.scale
        hit, pts, unfinished = _trace_rays(scene, camera, xc, yc)
        if unfinished:
            log.warning(
                "%d rays hit the step limit for scene %s; treated as background",
                unfinished,
                scene.scene_id,
            )
        if hit.any():
            hp = pts[hit]
            hi_, hj_ = ii[hit], jj[hit]
            sil[hi_, hj_] = True
            seg[hi_, hj_] = nearest_segment(scene, hp).astype(np.uint8) + 1
            rgb[hi_, hj_] = surface_color(scene, hp).astype(np.float32)
            grad = body_sdf_gradient(scene, hp)
            norms = np.linalg.norm(grad, axis=1, keepdims=True)
            unit = grad / np.maximum(norms, 1e-12) * (1.0 - 1e-7)
            ncam = unit @ rot_y(-camera.yaw).T  # directions rotate, never translate
            nrm[hi_, hj_] = ncam.astype(np.float32)

    joints = keypoint_positions(scene)
    ku, kv, _ = project(camera, joints)
    vis = ((ku >= 0) & (ku <= w) & (kv >= 0) & (kv <= h)).astype(np.float32)
    kps = np.stack([np.arange(len(joints), dtype=np.float64), ku, kv, vis], axis=1).astype(np.float32)

    return RenderSample(
        rgb=rgb,
        silhouette=sil,
        part_seg=seg,
        normal_map=nrm,
        keypoints=kps,
        camera=camera,
        view_tag="front",
        scene_id=scene.scene_id,
        max_step_pixels=unfinished,
    )


def render_view(scene: HumanoidScene, camera: CameraModel, view: str = "front") -> RenderSample:
    """Render one view of a scene.

    view="front" traces the given camera directly. view="back" traces the
    opposite (yaw + pi) camera and mirrors the result horizontally so that
    it stays pixel-aligned with the front view; mirrored normal maps get
    their x component negated to remain geometrically consistent.
    """
    if view not in VIEW_TAGS:
        raise ConfigError(f"view must be one of {VIEW_TAGS}, got {view!r}")
    if view == "front":
        return _render_raw(scene, camera)

    cam = back_camera(camera)
    raw = _render_raw(scene, cam)
    w = cam.image_size[0]
    flipped_nrm = raw.normal_map[:, ::-1].copy()
    flipped_nrm[..., 0] *= -1.0
    kps = raw.keypoints.copy()
    kps[:, 1] = w - kps[:, 1]
    return RenderSample(
        rgb=raw.rgb[:, ::-1].copy(),
        silhouette=raw.silhouette[:, ::-1].copy(),
        part_seg=raw.part_seg[:, ::-1].copy(),
        normal_map=flipped_nrm,
        keypoints=kps,
        camera=cam,
        view_tag="back",
        scene_id=scene.scene_id,
        max_step_pixels=raw.max_step_pixels,
    )
