"""Marching cubes over a dense scalar grid on [-1, 1]^3.

Vertices are created once per grid edge (keyed by the edge's lattice
endpoints), so neighboring cells share identical vertex positions and the
extracted surface of a well-resolved smooth field is watertight by
construction. Exactly coincident leftover vertices are merged afterwards
and zero-area sliver faces dropped.
"""

from __future__ import annotations

import numpy as np

from ..errors import EmptyMesh, ShapeMismatch
from ._mc_tables import EDGE_TABLE, TRI_TABLE
from .mesh import TriangleMesh

# Cube corner offsets in (ix, iy, iz); the edge list pairs corner indices.
_CORNERS = (
    (0, 0, 0),
    (1, 0, 0),
    (1, 1, 0),
    (0, 1, 0),
    (0, 0, 1),
    (1, 0, 1),
    (1, 1, 1),
    (0, 1, 1),
)
_EDGES = ((0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4), (0, 4), (1, 5), (2, 6), (3, 7))


def grid_coordinates(resolution: int) -> np.ndarray:
    """The 1D lattice: `resolution` points spanning [-1, 1] inclusive."""
    return np.linspace(-1.0, 1.0, resolution)


def marching_cubes(values: np.ndarray, level: float = 0.5, merge_tol: float = 1e-6) -> TriangleMesh:
    """Extract the `values > level` isosurface as a triangle mesh.

    values: (R, R, R) scalar grid sampled at grid_coordinates(R) along each
    axis, indexed [ix, iy, iz]. Points with values above the level count as
    inside; triangles are oriented outward (positive signed volume for a
    closed surface around the inside region).
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 3:
        raise ShapeMismatch(f"expected a 3D grid, got shape {values.shape}")
    r = values.shape[0]
    if values.shape != (r, r, r) or r < 2:
        raise ShapeMismatch(f"grid must be cubic with at least 2 points per axis, got {values.shape}")

    coords = grid_coordinates(r)
    g = values - level  # inside <=> g > 0

    inside = g > 0.0
    # Case index per cell, vectorized; corner c contributes bit 2^c.
    index = np.zeros((r - 1, r - 1, r - 1), dtype=np.uint16)
    for bit, (dx, dy, dz) in enumerate(_CORNERS):
        sub = inside[dx : r - 1 + dx, dy : r - 1 + dy, dz : r - 1 + dz]
        index |= sub.astype(np.uint16) << bit
    cells = np.argwhere((index != 0) & (index != 255))

    def corner_id(ix: int, iy: int, iz: int) -> int:
        return (ix * r + iy) * r + iz

    vert_positions: list[np.ndarray] = []
    vert_by_edge: dict[tuple[int, int], int] = {}
    faces: list[tuple[int, int, int]] = []

    for ix, iy, iz in cells:
        case = int(index[ix, iy, iz])
        tri = TRI_TABLE[case]
        if not tri:
            continue
        cell_edge_vertex = {}
        mask = EDGE_TABLE[case]
        for e, (ca, cb) in enumerate(_EDGES):
            if not mask & (1 << e):
                continue
            ax, ay, az = ix + _CORNERS[ca][0], iy + _CORNERS[ca][1], iz + _CORNERS[ca][2]
            bx, by, bz = ix + _CORNERS[cb][0], iy + _CORNERS[cb][1], iz + _CORNERS[cb][2]
            ida, idb = corner_id(ax, ay, az), corner_id(bx, by, bz)
            key = (ida, idb) if ida < idb else (idb, ida)
            vid = vert_by_edge.get(key)
            if vid is None:
                # Interpolate in canonical (low id, high id) order so both
                # adjacent cells compute bit-identical positions.
                if key == (ida, idb):
                    pa = np.array([coords[ax], coords[ay], coords[az]])
                    pb = np.array([coords[bx], coords[by], coords[bz]])
                    va, vb = g[ax, ay, az], g[bx, by, bz]
                else:
                    pa = np.array([coords[bx], coords[by], coords[bz]])
                    pb = np.array([coords[ax], coords[ay], coords[az]])
                    va, vb = g[bx, by, bz], g[ax, ay, az]
                denom = vb - va
                t = 0.5 if abs(denom) < 1e-300 else np.clip(va / (va - vb), 0.0, 1.0)
                vid = len(vert_positions)
                vert_positions.append(pa + t * (pb - pa))
                vert_by_edge[key] = vid
            cell_edge_vertex[e] = vid
        for k in range(0, len(tri), 3):
            faces.append((cell_edge_vertex[tri[k]], cell_edge_vertex[tri[k + 1]], cell_edge_vertex[tri[k + 2]]))

    if not faces:
        raise EmptyMesh("the level set does not intersect the grid")

    verts = np.asarray(vert_positions)
    tris = np.asarray(faces, dtype=np.int64)

    # Merge vertices that landed on the same position (interpolation hitting
    # a lattice point makes several edges produce one point).
    keys = np.round(verts / merge_tol).astype(np.int64)
    _, first, inv = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    verts = verts[first]
    tris = inv[tris]
    degenerate = (tris[:, 0] == tris[:, 1]) | (tris[:, 1] == tris[:, 2]) | (tris[:, 2] == tris[:, 0])
    tris = tris[~degenerate]
    if tris.shape[0] == 0:
        raise EmptyMesh("all faces collapsed during vertex merging")
    used = np.unique(tris)
    remap = np.full(verts.shape[0], -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    mesh = TriangleMesh(vertices=verts[used], faces=remap[tris])

    if mesh.signed_volume() < 0.0:
        mesh.faces = mesh.faces[:, [0, 2, 1]]
    return mesh
