"""Software z-buffer rasterization of colored meshes for metric rendering.

Renders orthographic views with barycentric interpolation of per-vertex
color and normal. Normal images are encoded (n + 1) / 2 on foreground
pixels; background is black in both channels, matching the corpus
renderer's conventions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry.mesh import TriangleMesh
from ..synthcorpus.camera import CameraModel, project, rot_y


@dataclass
class RasterResult:
    rgb: np.ndarray  # (H, W, 3) float32 in [0, 1]
    normal_encoded: np.ndarray  # (H, W, 3) float32, (n+1)/2 on foreground
    mask: np.ndarray  # (H, W) bool
    depth: np.ndarray  # (H, W) float32, -inf where empty


def rasterize_mesh(mesh: TriangleMesh, camera: CameraModel) -> RasterResult:
    """Render one orthographic view; an empty mesh gives background only."""
    w, h = camera.image_size
    rgb = np.zeros((h, w, 3), dtype=np.float64)
    nrm = np.zeros((h, w, 3), dtype=np.float64)
    depth = np.full((h, w), -np.inf)
    mask = np.zeros((h, w), dtype=bool)
    if mesh.num_faces == 0:
        return RasterResult(rgb.astype(np.float32), nrm.astype(np.float32), mask, depth.astype(np.float32))

    colors = mesh.vertex_colors if mesh.vertex_colors is not None else np.full_like(mesh.vertices, 0.7)
    normals = mesh.vertex_normals if mesh.vertex_normals is not None else mesh.compute_vertex_normals()
    ncam_all = normals @ rot_y(-camera.yaw).T

    u, v, z = project(camera, mesh.vertices)
    f = mesh.faces
    u0, u1, u2 = u[f[:, 0]], u[f[:, 1]], u[f[:, 2]]
    v0, v1, v2 = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    # Twice the signed screen-space area; degenerate faces are skipped.
    area = (u1 - u0) * (v2 - v0) - (v1 - v0) * (u2 - u0)

    for fi in range(f.shape[0]):
        ar = area[fi]
        if abs(ar) < 1e-12:
            continue
        tri = f[fi]
        ju0, jv0, ju1, jv1, ju2, jv2 = u0[fi], v0[fi], u1[fi], v1[fi], u2[fi], v2[fi]
        jmin = max(int(np.floor(min(ju0, ju1, ju2) - 0.5)), 0)
        jmax = min(int(np.ceil(max(ju0, ju1, ju2) - 0.5)) + 1, w)
        imin = max(int(np.floor(min(jv0, jv1, jv2) - 0.5)), 0)
        imax = min(int(np.ceil(max(jv0, jv1, jv2) - 0.5)) + 1, h)
        if jmin >= jmax or imin >= imax:
            continue
        jj, ii = np.meshgrid(np.arange(jmin, jmax), np.arange(imin, imax))
        px = jj + 0.5
        py = ii + 0.5
        w0 = ((ju1 - px) * (jv2 - py) - (jv1 - py) * (ju2 - px)) / ar
        w1 = ((ju2 - px) * (jv0 - py) - (jv2 - py) * (ju0 - px)) / ar
        w2 = 1.0 - w0 - w1
        inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        if not inside.any():
            continue
        zpix = w0 * z[tri[0]] + w1 * z[tri[1]] + w2 * z[tri[2]]
        ii_in, jj_in = ii[inside], jj[inside]
        zi = zpix[inside]
        closer = zi > depth[ii_in, jj_in]  # larger camera z is nearer
        if not closer.any():
            continue
        ii_in, jj_in, zi = ii_in[closer], jj_in[closer], zi[closer]
        bw = np.stack([w0[inside][closer], w1[inside][closer], w2[inside][closer]], axis=1)
        depth[ii_in, jj_in] = zi
        mask[ii_in, jj_in] = True
        rgb[ii_in, jj_in] = bw @ colors[tri]
        ni = bw @ ncam_all[tri]
        ni /= np.maximum(np.linalg.norm(ni, axis=1, keepdims=True), 1e-12)
        nrm[ii_in, jj_in] = (ni + 1.0) / 2.0

    rgb = np.clip(rgb, 0.0, 1.0)
    nrm[~mask] = 0.0
    return RasterResult(rgb.astype(np.float32), nrm.astype(np.float32), mask, depth.astype(np.float32))


def render_for_eval(
    mesh: TriangleMesh, base_camera: CameraModel, yaws_deg: tuple[float, ...] = (0.0, 90.0, 180.0, 270.0)
) -> list[RasterResult]:
    """Rasterize the mesh from the base camera rotated by each yaw offset."""
    out = []
    for yaw in yaws_deg:
        cam = CameraModel(
            yaw=base_camera.yaw + float(np.deg2rad(yaw)),
            scale=base_camera.scale,
            image_size=base_camera.image_size,
            center=base_camera.center,
        )
        out.append(rasterize_mesh(mesh, cam))
    return out
