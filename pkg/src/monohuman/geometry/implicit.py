"""Dual-resolution pixel-aligned implicit occupancy field.

Coarse path: p_c = sigmoid(f_theta(f_lambda([F_c(pi_x), delta]))) where
pi_x is the image projection of the query point and delta its
camera-space depth. Fine path: p = sigmoid(f([F(pi_x), f_lambda(...)]))
where the joint embedding comes from the very same f_lambda parameters
as the coarse path (shared module, not a copy).
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..synthcorpus.camera import CameraModel, project
from .features import COARSE_CHANNELS, FINE_CHANNELS, PixelFeatureMap, bilinear_sample

EMBEDDING_DIM = 64
_SLOPE = 0.01


def _mlp(widths: list[int]) -> nn.Sequential:
    layers: list[nn.Module] = []
    for i in range(len(widths) - 1):
        layers.append(nn.Linear(widths[i], widths[i + 1]))
        if i < len(widths) - 2:
            layers.append(nn.LeakyReLU(_SLOPE))
    return nn.Sequential(*layers)


class ImplicitField(nn.Module):
    """f_lambda joint embedding, f_theta coarse head, f fine head."""

    def __init__(
        self,
        coarse_channels: int = COARSE_CHANNELS,
        fine_channels: int = FINE_CHANNELS,
        embedding_dim: int = EMBEDDING_DIM,
        hidden: tuple[int, int] = (256, 128),
        theta_hidden: int = 64,
    ):
        super().__init__()
        self.embedding_dim = embedding_dim
        self.lambda_net = _mlp([coarse_channels + 1, *hidden, embedding_dim])
        self.theta_head = _mlp([embedding_dim, theta_hidden, 1])
        self.fine_head = _mlp([fine_channels + embedding_dim, *hidden, 1])

    def embed(self, coarse_feats: torch.Tensor, depth: torch.Tensor) -> torch.Tensor:
        """Joint embedding from coarse features and camera-space depth."""
        return self.lambda_net(torch.cat([coarse_feats, depth.reshape(-1, 1)], dim=1))

    def coarse_prob(self, embedding: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.theta_head(embedding)).reshape(-1)

    def fine_prob(self, fine_feats: torch.Tensor, embedding: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.fine_head(torch.cat([fine_feats, embedding], dim=1))).reshape(-1)


def build_field(seed: int) -> ImplicitField:
    torch.manual_seed(seed)
    return ImplicitField()


def _project_points(camera: CameraModel, points: np.ndarray):
    u, v, depth = project(camera, np.asarray(points, dtype=np.float64))
    return (
        torch.from_numpy(np.asarray(u, dtype=np.float32)),
        torch.from_numpy(np.asarray(v, dtype=np.float32)),
        torch.from_numpy(np.asarray(depth, dtype=np.float32)),
    )


def point_embedding(
    field: ImplicitField, fmap_c: PixelFeatureMap, points: np.ndarray, camera: CameraModel
) -> torch.Tensor:
    u, v, depth = _project_points(camera, points)
    feats = bilinear_sample(fmap_c, *fmap_c.to_grid(u, v))
    return field.embed(feats, depth)


def occupancy_coarse(
    field: ImplicitField, fmap_c: PixelFeatureMap, points: np.ndarray, camera: CameraModel
) -> torch.Tensor:
    """Coarse occupancy probabilities for (N, 3) world points."""
    return field.coarse_prob(point_embedding(field, fmap_c, points, camera))


def occupancy_fine(
    field: ImplicitField,
    fmap_f: PixelFeatureMap,
    fmap_c: PixelFeatureMap,
    points: np.ndarray,
    camera: CameraModel,
    embedding: torch.Tensor | None = None,
) -> torch.Tensor:
    """Fine occupancy probabilities; optionally reuses a given embedding.

    Passing ``embedding`` must reproduce exactly what the default path
    computes, which is how the shared-embedding contract is verified.
    """
    if embedding is None:
        embedding = point_embedding(field, fmap_c, points, camera)
    u, v, _ = _project_points(camera, points)
    feats = bilinear_sample(fmap_f, *fmap_f.to_grid(u, v))
    return field.fine_prob(feats, embedding)
