"""Per-vertex visibility and dual-view color projection.

Visibility uses a software z-buffer rasterized at twice the camera
resolution plus a facing test: a vertex counts as visible when its depth
is within eps_z of the buffer at its projected pixel and its normal
points toward the camera. The camera convention matches the corpus
renderer: rays travel toward -z in camera space, so larger camera z is
nearer and a camera-facing normal has positive camera-space z.

Back-view images are stored horizontally mirrored so they align
pixel-for-pixel with the front view; sampling positions for the back
view are therefore mirrored (u -> W - u) before lookup.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyMesh, ShapeMismatch
from ..geometry.mesh import TriangleMesh
from ..synthcorpus.camera import CameraModel, back_camera, project, rot_y

DEFAULT_EPS_Z = 0.01
ZBUFFER_SCALE = 2


@dataclass
class VertexColorField:
    """Initial per-vertex colors with the projection evidence behind them.

    uv_front and uv_back are sampling coordinates in each stored image's
    own pixel frame (the back view's u is already mirrored).
    """

    colors: np.ndarray  # (N, 3) float32 in [0, 1]
    vis_front: np.ndarray  # (N,) bool
    vis_back: np.ndarray  # (N,) bool
    uv_front: np.ndarray  # (N, 2) float64
    uv_back: np.ndarray  # (N, 2) float64

    def __post_init__(self):
        n = self.colors.shape[0]
        for name in ("vis_front", "vis_back", "uv_front", "uv_back"):
            if getattr(self, name).shape[0] != n:
                raise ShapeMismatch(f"{name} does not match vertex count {n}")


def _depth_buffer(mesh: TriangleMesh, camera: CameraModel, scale: int) -> np.ndarray:
    """Z-buffer of the mesh at `scale` times the camera resolution."""
    w, h = camera.image_size
    cam = CameraModel(
        yaw=camera.yaw,
        scale=camera.scale * scale,
        image_size=(w * scale, h * scale),
        center=camera.center,
    )
    bw, bh = cam.image_size
    depth = np.full((bh, bw), -np.inf)
    u, v, z = project(cam, mesh.vertices)
    f = mesh.faces
    u0, u1, u2 = u[f[:, 0]], u[f[:, 1]], u[f[:, 2]]
    v0, v1, v2 = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    area = (u1 - u0) * (v2 - v0) - (v1 - v0) * (u2 - u0)
    for fi in range(f.shape[0]):
        ar = area[fi]
        if abs(ar) < 1e-12:
            continue
        tri = f[fi]
        ju0, jv0, ju1, jv1, ju2, jv2 = u0[fi], v0[fi], u1[fi], v1[fi], u2[fi], v2[fi]
        jmin = max(int(np.floor(min(ju0, ju1, ju2) - 0.5)), 0)
        jmax = min(int(np.ceil(max(ju0, ju1, ju2) - 0.5)) + 1, bw)
        imin = max(int(np.floor(min(jv0, jv1, jv2) - 0.5)), 0)
        imax = min(int(np.ceil(max(jv0, jv1, jv2) - 0.5)) + 1, bh)
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
        np.maximum.at(depth, (ii_in, jj_in), zi)
    return depth


def visibility_mask(
    mesh: TriangleMesh, camera: CameraModel, eps_z: float = DEFAULT_EPS_Z
) -> np.ndarray:
    """Per-vertex visibility under one camera.

    A vertex is visible iff its projected pixel lies in frame, its depth
    is within eps_z of the z-buffer there, and its normal faces the
    camera (positive camera-space z under the larger-z-is-nearer
    convention).
    """
    if mesh.num_faces == 0:
        raise EmptyMesh("cannot compute visibility of an empty mesh")
    depth = _depth_buffer(mesh, camera, ZBUFFER_SCALE)
    bh, bw = depth.shape
    u, v, z = project(camera, mesh.vertices)
    ju = np.floor(u * ZBUFFER_SCALE).astype(int)
    jv = np.floor(v * ZBUFFER_SCALE).astype(int)
    in_frame = (ju >= 0) & (ju < bw) & (jv >= 0) & (jv < bh)
    ju_c = np.clip(ju, 0, bw - 1)
    jv_c = np.clip(jv, 0, bh - 1)
    near = z >= depth[jv_c, ju_c] - eps_z
    normals = mesh.vertex_normals if mesh.vertex_normals is not None else mesh.compute_vertex_normals()
    ncam_z = (normals @ rot_y(-camera.yaw).T)[:, 2]
    return in_frame & near & (ncam_z > 0.0)


def extend_foreground(
    image: np.ndarray, threshold: float = 0.06, iterations: int = 4
) -> np.ndarray:
    """Push foreground colors outward over the black matte.

    Renders sit on a black background, so bilinear samples taken within
    a pixel of the silhouette rim mix in black. Repeatedly assigning
    each background pixel the mean of its foreground 4-neighbors gives
    rim samples a pure surface color while leaving interior pixels
    untouched.
    """
    img = np.asarray(image, dtype=np.float32).copy()
    fg = img.max(axis=2) > threshold
    h, w = fg.shape
    for _ in range(iterations):
        if fg.all():
            break
        acc = np.zeros_like(img)
        cnt = np.zeros((h, w), dtype=np.int32)
        # (dst rows, dst cols, src rows, src cols) for the 4 neighbors
        slabs = (
            (slice(1, h), slice(None), slice(0, h - 1), slice(None)),
            (slice(0, h - 1), slice(None), slice(1, h), slice(None)),
            (slice(None), slice(1, w), slice(None), slice(0, w - 1)),
            (slice(None), slice(0, w - 1), slice(None), slice(1, w)),
        )
        for di, dj, si, sj in slabs:
            nb_fg = fg[si, sj]
            acc[di, dj] += np.where(nb_fg[..., None], img[si, sj], 0.0)
            cnt[di, dj] += nb_fg
        grow = ~fg & (cnt > 0)
        img[grow] = acc[grow] / cnt[grow][:, None]
        fg = fg | grow
    return img


def bilinear_image_sample(image: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sample an (H, W, C) image at pixel coordinates with clamped edges.

    Pixel (i, j) has its center at (j + 0.5, i + 0.5), matching the
    projection convention.
    """
    h, w = image.shape[:2]
    x = np.clip(u - 0.5, 0.0, w - 1.0)
    y = np.clip(v - 0.5, 0.0, h - 1.0)
    x0 = np.clip(np.floor(x).astype(int), 0, w - 2) if w > 1 else np.zeros_like(x, dtype=int)
    y0 = np.clip(np.floor(y).astype(int), 0, h - 2) if h > 1 else np.zeros_like(y, dtype=int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]
    img = image.reshape(h, w, -1).astype(np.float64)
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def project_colors(
    mesh: TriangleMesh,
    front_img: np.ndarray,
    back_img: np.ndarray,
    camera: CameraModel,
    eps_z: float = DEFAULT_EPS_Z,
) -> VertexColorField:
    """Initial per-vertex RGB by dual-view projection with visibility.

    Front-visible vertices take the front image's bilinear sample; the
    rest take the back image's where back-visible; vertices seen by
    neither view get neutral gray (0.5, 0.5, 0.5). Samples are taken on
    foreground-extended copies so rim vertices do not mix in the black
    matte.
    """
    if mesh.num_faces == 0:
        raise EmptyMesh("cannot project colors onto an empty mesh")
    if front_img.shape != back_img.shape:
        raise ShapeMismatch(
            f"front and back images disagree: {front_img.shape} vs {back_img.shape}"
        )
    w = front_img.shape[1]
    vis_f = visibility_mask(mesh, camera, eps_z)
    cam_b = back_camera(camera)
    vis_b = visibility_mask(mesh, cam_b, eps_z)

    uf, vf, _ = project(camera, mesh.vertices)
    ub, vb, _ = project(cam_b, mesh.vertices)
    ub = w - ub  # stored back views are horizontally mirrored

    colors = np.full((mesh.num_vertices, 3), 0.5)
    front_rgb = bilinear_image_sample(extend_foreground(front_img), uf, vf)
    back_rgb = bilinear_image_sample(extend_foreground(back_img), ub, vb)
    colors[vis_b] = back_rgb[vis_b]
    colors[vis_f] = front_rgb[vis_f]
    return VertexColorField(
        colors=colors.astype(np.float32),
        vis_front=vis_f,
        vis_back=vis_b,
        uv_front=np.stack([uf, vf], axis=1),
        uv_back=np.stack([ub, vb], axis=1),
    )
