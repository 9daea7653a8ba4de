"""Triangle meshes: topology helpers and binary PLY I/O.

Vertices carry optional unit normals and RGB colors; PLY export writes
x y z nx ny nz red green blue per vertex in binary little-endian order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import EmptyMesh

log = logging.getLogger(__name__)

_PLY_HEADER = """ply
format binary_little_endian 1.0
element vertex {nv}
property float x
property float y
property float z
property float nx
property float ny
property float nz
property uchar red
property uchar green
property uchar blue
element face {nf}
property list uchar int vertex_indices
end_header
"""


@dataclass
class TriangleMesh:
    """Vertices (V, 3) float, faces (F, 3) int, optional per-vertex extras."""

    vertices: np.ndarray
    faces: np.ndarray
    vertex_normals: np.ndarray | None = None
    vertex_colors: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if self.vertex_normals is not None:
            self.vertex_normals = np.asarray(self.vertex_normals, dtype=np.float64).reshape(-1, 3)
        if self.vertex_colors is not None:
            self.vertex_colors = np.asarray(self.vertex_colors, dtype=np.float64).reshape(-1, 3)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_faces(self) -> int:
        return self.faces.shape[0]

    def face_corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        v = self.vertices
        f = self.faces
        return v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]

    def face_areas(self) -> np.ndarray:
        a, b, c = self.face_corners()
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def face_normals(self) -> np.ndarray:
        a, b, c = self.face_corners()
        n = np.cross(b - a, c - a)
        return n / np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-18)

    def area(self) -> float:
        return float(self.face_areas().sum())

    def signed_volume(self) -> float:
        """Divergence-theorem volume; positive for outward-oriented closed meshes."""
        a, b, c = self.face_corners()
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)

    def compute_vertex_normals(self) -> np.ndarray:
        """Area-weighted average of incident face normals, unit length."""
        a, b, c = self.face_corners()
        fn = np.cross(b - a, c - a)  # norm equals twice face area
        vn = np.zeros_like(self.vertices)
        for col in range(3):
            np.add.at(vn, self.faces[:, col], fn)
        return vn / np.maximum(np.linalg.norm(vn, axis=1, keepdims=True), 1e-18)

    def edges(self) -> np.ndarray:
        """Unique undirected edges, shape (E, 2) with sorted columns."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def save_ply(self, path: Path | str) -> None:
        if self.num_vertices == 0 or self.num_faces == 0:
            raise EmptyMesh("refusing to save a mesh with no geometry")
        normals = self.vertex_normals if self.vertex_normals is not None else self.compute_vertex_normals()
        colors = self.vertex_colors if self.vertex_colors is not None else np.full_like(self.vertices, 0.7)
        rgb = np.clip(np.round(colors * 255.0), 0, 255).astype(np.uint8)
        header = _PLY_HEADER.format(nv=self.num_vertices, nf=self.num_faces)
        vert = np.empty(
            self.num_vertices,
            dtype=[("xyz", "<f4", 3), ("n", "<f4", 3), ("rgb", "u1", 3)],
        )
        vert["xyz"] = self.vertices.astype(np.float32)
        vert["n"] = normals.astype(np.float32)
        vert["rgb"] = rgb
        face = np.empty(self.num_faces, dtype=[("count", "u1"), ("idx", "<i4", 3)])
        face["count"] = 3
        face["idx"] = self.faces.astype(np.int32)
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(vert.tobytes())
            fh.write(face.tobytes())

    @classmethod
    def load_ply(cls, path: Path | str) -> "TriangleMesh":
        raw = Path(path).read_bytes()
        end = raw.index(b"end_header\n") + len(b"end_header\n")
        header = raw[:end].decode("ascii")
        nv = nf = 0
        for line in header.splitlines():
            if line.startswith("element vertex"):
                nv = int(line.split()[-1])
            elif line.startswith("element face"):
                nf = int(line.split()[-1])
        vert_dtype = np.dtype([("xyz", "<f4", 3), ("n", "<f4", 3), ("rgb", "u1", 3)])
        face_dtype = np.dtype([("count", "u1"), ("idx", "<i4", 3)])
        vert = np.frombuffer(raw, dtype=vert_dtype, count=nv, offset=end)
        face = np.frombuffer(raw, dtype=face_dtype, count=nf, offset=end + nv * vert_dtype.itemsize)
        return cls(
            vertices=vert["xyz"].astype(np.float64),
            faces=face["idx"].astype(np.int64),
            vertex_normals=vert["n"].astype(np.float64),
            vertex_colors=vert["rgb"].astype(np.float64) / 255.0,
        )


def euler_characteristic(mesh: TriangleMesh) -> int:
    """V - E + F; equals 2 for a closed surface of sphere topology."""
    return mesh.num_vertices - mesh.edges().shape[0] + mesh.num_faces


def is_watertight(mesh: TriangleMesh) -> bool:
    """True when every undirected edge borders exactly two faces."""
    if mesh.num_faces == 0:
        return False
    f = mesh.faces
    e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    e.sort(axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    return bool((counts == 2).all())


def face_components(mesh: TriangleMesh) -> np.ndarray:
    """Connected-component label per face; faces connect by shared edges."""
    nf = mesh.num_faces
    parent = np.arange(nf)

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    by_edge: dict[tuple[int, int], int] = {}
    f = mesh.faces
    for fi in range(nf):
        tri = f[fi]
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (int(a), int(b)) if a < b else (int(b), int(a))
            other = by_edge.setdefault(key, fi)
            if other != fi:
                ra, rb = find(fi), find(other)
                if ra != rb:
                    parent[ra] = rb
    roots = np.array([find(i) for i in range(nf)])
    _, labels = np.unique(roots, return_inverse=True)
    return labels


def submesh(mesh: TriangleMesh, face_mask: np.ndarray) -> TriangleMesh:
    """Extract the faces selected by face_mask, dropping unused vertices."""
    faces = mesh.faces[face_mask]
    used = np.unique(faces)
    remap = np.full(mesh.num_vertices, -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    return TriangleMesh(
        vertices=mesh.vertices[used],
        faces=remap[faces],
        vertex_normals=None if mesh.vertex_normals is None else mesh.vertex_normals[used],
        vertex_colors=None if mesh.vertex_colors is None else mesh.vertex_colors[used],
    )


def largest_watertight_component(mesh: TriangleMesh) -> tuple[TriangleMesh, bool]:
    """Keep only the biggest connected, watertight piece of the mesh.

    Components are ranked by triangle count; the largest watertight one
    wins. When no component is watertight the largest component is
    returned anyway with the flag set False; an empty mesh passes through
    unchanged (flag False).
    """
    if mesh.num_faces == 0:
        return mesh, False
    labels = face_components(mesh)
    counts = np.bincount(labels)
    order = np.argsort(-counts, kind="stable")
    for comp in order:
        candidate = submesh(mesh, labels == comp)
        if is_watertight(candidate):
            return candidate, True
    log.warning("no watertight component; keeping the largest open one")
    return submesh(mesh, labels == order[0]), False


def voxelize_mesh(mesh: TriangleMesh, resolution: int) -> np.ndarray:
    """Boolean occupancy grid over [-1, 1]^3 by z-column parity filling.

    For every (x, y) grid column, triangle crossings along z are paired
    off to mark interior spans. Column coordinates carry a tiny offset so
    columns never pass exactly through marching-cubes vertices. Meant for
    watertight meshes; columns with odd crossing counts are resolved by
    pairing what pairs.
    """
    coords = np.linspace(-1.0, 1.0, resolution)
    grid = np.zeros((resolution, resolution, resolution), dtype=bool)
    if mesh.num_faces == 0:
        return grid
    ox, oy = 1.37e-6, 2.61e-6  # dodge exact vertex/edge hits
    xs = coords + ox
    ys = coords + oy
    a, b, c = mesh.face_corners()

    crossings: dict[tuple[int, int], list[float]] = {}
    for t in range(mesh.num_faces):
        pa, pb, pc = a[t], b[t], c[t]
        x_lo, x_hi = min(pa[0], pb[0], pc[0]), max(pa[0], pb[0], pc[0])
        y_lo, y_hi = min(pa[1], pb[1], pc[1]), max(pa[1], pb[1], pc[1])
        i0, i1 = np.searchsorted(xs, [x_lo, x_hi])
        j0, j1 = np.searchsorted(ys, [y_lo, y_hi])
        if i0 == i1 or j0 == j1:
            continue
        cx = xs[i0:i1]
        cy = ys[j0:j1]
        # 2D barycentric coordinates in the xy plane.
        d = (pb[1] - pc[1]) * (pa[0] - pc[0]) + (pc[0] - pb[0]) * (pa[1] - pc[1])
        if abs(d) < 1e-30:
            continue
        gx, gy = np.meshgrid(cx, cy, indexing="ij")
        w0 = ((pb[1] - pc[1]) * (gx - pc[0]) + (pc[0] - pb[0]) * (gy - pc[1])) / d
        w1 = ((pc[1] - pa[1]) * (gx - pc[0]) + (pa[0] - pc[0]) * (gy - pc[1])) / d
        w2 = 1.0 - w0 - w1
        inside = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)
        if not inside.any():
            continue
        z = w0 * pa[2] + w1 * pb[2] + w2 * pc[2]
        for ii, jj in zip(*np.nonzero(inside)):
            crossings.setdefault((i0 + ii, j0 + jj), []).append(float(z[ii, jj]))

    for (i, j), zs in crossings.items():
        zs.sort()
        for k in range(0, len(zs) - 1, 2):
            lo = np.searchsorted(coords, zs[k], side="left")
            hi = np.searchsorted(coords, zs[k + 1], side="right")
            grid[i, j, lo:hi] = True
    return grid
