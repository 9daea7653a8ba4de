"""Occupancy supervision points: perturbed surface samples plus uniform filler.

Surface points come from sphere tracing random rays aimed near the body,
then jittering along Gaussian noise; uniform points cover [-1, 1]^3. Labels
are exact (sign of the analytic SDF), so the sampler is its own oracle.
"""

from __future__ import annotations

import numpy as np

from ..errors import SurfaceSamplingFailed
from .body import HumanoidScene, body_sdf, scene_bounds

_RAY_ROUNDS = 12
_HIT_EPS = 1e-3
_MAX_STEPS = 96


def _trace_random_rays(scene: HumanoidScene, rng: np.random.Generator, n_rays: int) -> np.ndarray:
    """Trace rays from a surrounding sphere toward the body; return hit points."""
    lo, hi = scene_bounds(scene)
    mid = (lo + hi) / 2.0
    radius = float(np.linalg.norm(hi - lo)) / 2.0 + 0.2

    dirs = rng.normal(size=(n_rays, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    origins = mid + radius * dirs
    # Aim at jittered points near the body so rays do not all cross the middle.
    targets = mid + rng.uniform(-0.45, 0.45, size=(n_rays, 3)) * (hi - lo) / 2.0
    head = targets - origins
    head /= np.linalg.norm(head, axis=1, keepdims=True)

    t = np.zeros(n_rays)
    alive = np.arange(n_rays)
    hit = np.zeros(n_rays, dtype=bool)
    for _ in range(_MAX_STEPS):
        if alive.size == 0:
            break
        pts = origins[alive] + t[alive, None] * head[alive]
        d = body_sdf(scene, pts)
        now_hit = d < _HIT_EPS
        hit[alive[now_hit]] = True
        t[alive] += d
        alive = alive[~now_hit & (t[alive] < 2.0 * radius)]

    return (origins + t[:, None] * head)[hit]


def sample_occupancy_points(
    scene: HumanoidScene,
    n_surface: int,
    n_uniform: int,
    sigma: float = 0.05,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample supervision points and exact inside/outside labels.

    Returns (points (N, 3) float32, labels (N,) uint8) with N = n_surface +
    n_uniform; labels are 1 inside (sdf < 0). Raises SurfaceSamplingFailed
    if ray casting finds fewer than n_surface / 2 distinct surface hits
    after a bounded number of rounds.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    hits: list[np.ndarray] = []
    found = 0
    for _ in range(_RAY_ROUNDS):
        if found >= n_surface:
            break
        batch = _trace_random_rays(scene, rng, max(n_surface, 512))
        if batch.size:
            hits.append(batch)
            found += batch.shape[0]

    surface = np.concatenate(hits) if hits else np.empty((0, 3))
    if surface.shape[0] < n_surface / 2:
        raise SurfaceSamplingFailed(
            f"found {surface.shape[0]} surface hits, need at least {n_surface / 2:.0f}"
        )
    if surface.shape[0] < n_surface:
        extra = rng.integers(0, surface.shape[0], size=n_surface - surface.shape[0])
        surface = np.concatenate([surface, surface[extra]])
    else:
        surface = surface[:n_surface]
    surface = surface + rng.normal(0.0, sigma, size=surface.shape)

    uniform = rng.uniform(-1.0, 1.0, size=(n_uniform, 3))
    points = np.concatenate([surface, uniform])
    labels = (body_sdf(scene, points) < 0.0).astype(np.uint8)
    return points.astype(np.float32), labels
