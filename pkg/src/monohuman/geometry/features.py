"""Pixel-aligned feature maps at coarse and fine resolution.

The encoders consume a 9-channel stack (RGB, front normals, back
normals) and keep spatial resolution, so a feature cell is aligned with
its input pixel. Sampling coordinates for ``bilinear_sample`` are grid
units with cell centers at integer coordinates; ``PixelFeatureMap.to_grid``
converts image-pixel coordinates (as produced by ``project``) into grid
units, accounting for any resolution difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from ..errors import ShapeMismatch

_SLOPE = 0.2
COARSE_CHANNELS = 32
FINE_CHANNELS = 16
STACK_CHANNELS = 9


class FeatureEncoder(nn.Module):
    """Resolution-preserving U-shaped encoder over the 9-channel stack.

    Three downsampling levels give the output a receptive field spanning
    most of the body, which depth inference needs: surface depth at a
    pixel depends on limb extent and context well away from that pixel.
    """

    def __init__(self, out_channels: int, mid: int = 16):
        super().__init__()

        def c3(cin: int, cout: int) -> nn.Sequential:
            return nn.Sequential(nn.Conv2d(cin, cout, 3, padding=1), nn.LeakyReLU(_SLOPE))

        def d4(cin: int, cout: int) -> nn.Sequential:
            return nn.Sequential(nn.Conv2d(cin, cout, 4, stride=2, padding=1), nn.LeakyReLU(_SLOPE))

        self.head = c3(STACK_CHANNELS, mid)
        self.down1 = d4(mid, 2 * mid)
        self.down2 = d4(2 * mid, 4 * mid)
        self.down3 = d4(4 * mid, 4 * mid)
        self.mid = c3(4 * mid, 4 * mid)
        self.up3 = c3(8 * mid, 4 * mid)
        self.up2 = c3(6 * mid, 2 * mid)
        self.up1 = c3(3 * mid, 2 * mid)
        self.out = nn.Conv2d(2 * mid, out_channels, 3, padding=1)

    def forward(self, x):
        h0 = self.head(x)
        h1 = self.down1(h0)
        h2 = self.down2(h1)
        h3 = self.mid(self.down3(h2))

        def up(t):
            return F.interpolate(t, scale_factor=2, mode="nearest")

        g2 = self.up3(torch.cat([up(h3), h2], dim=1))
        g1 = self.up2(torch.cat([up(g2), h1], dim=1))
        g0 = self.up1(torch.cat([up(g1), h0], dim=1))
        return self.out(g0)


@dataclass
class PixelFeatureMap:
    """Feature grid plus the geometry linking it back to image pixels."""

    grid: torch.Tensor  # (C, H', W')
    resolution: str  # "coarse" | "fine"
    image_size: tuple[int, int]  # (W, H) of the original image

    def __post_init__(self):
        if self.grid.ndim != 3:
            raise ShapeMismatch(f"feature grid must be (C, H, W), got {tuple(self.grid.shape)}")
        if self.resolution not in ("coarse", "fine"):
            raise ShapeMismatch(f"resolution tag must be coarse or fine, got {self.resolution!r}")

    def to_grid(self, u: torch.Tensor, v: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Image pixel coordinates -> grid units (integer = cell center)."""
        _, gh, gw = self.grid.shape
        w, h = self.image_size
        return u * (gw / w) - 0.5, v * (gh / h) - 0.5


def build_input_stack(rgb: np.ndarray, n_front: np.ndarray, n_back: np.ndarray) -> torch.Tensor:
    """(1, 9, H, W) tensor: image, front normal map, back normal map."""
    parts = [np.asarray(a, dtype=np.float32) for a in (rgb, n_front, n_back)]
    shape = parts[0].shape
    if any(p.shape != shape or p.ndim != 3 or p.shape[2] != 3 for p in parts):
        raise ShapeMismatch("stack inputs must share an (H, W, 3) shape")
    stack = np.concatenate(parts, axis=2).transpose(2, 0, 1)
    return torch.from_numpy(stack[None].copy())


def encode_features(
    enc_coarse: FeatureEncoder, enc_fine: FeatureEncoder, stack: torch.Tensor
) -> tuple[PixelFeatureMap, PixelFeatureMap]:
    """Coarse features from the half-resolution stack; fine from full."""
    _, _, h, w = stack.shape
    half = F.interpolate(stack, scale_factor=0.5, mode="bilinear", align_corners=False)
    coarse = PixelFeatureMap(enc_coarse(half)[0], "coarse", (w, h))
    fine = PixelFeatureMap(enc_fine(stack)[0], "fine", (w, h))
    return coarse, fine


def bilinear_sample(fmap: PixelFeatureMap, u, v) -> torch.Tensor:
    """Sample (N,) grid-unit coordinates -> (N, C); clamps to the edge."""
    grid = fmap.grid
    _, gh, gw = grid.shape
    uu = torch.as_tensor(u, dtype=grid.dtype).reshape(-1)
    vv = torch.as_tensor(v, dtype=grid.dtype).reshape(-1)
    uu = uu.clamp(0.0, gw - 1.0)
    vv = vv.clamp(0.0, gh - 1.0)
    u0 = uu.floor().long().clamp(0, gw - 2) if gw > 1 else torch.zeros_like(uu).long()
    v0 = vv.floor().long().clamp(0, gh - 2) if gh > 1 else torch.zeros_like(vv).long()
    u1 = (u0 + 1).clamp(0, gw - 1)
    v1 = (v0 + 1).clamp(0, gh - 1)
    fu = (uu - u0.to(grid.dtype)).unsqueeze(1)
    fv = (vv - v0.to(grid.dtype)).unsqueeze(1)
    g = grid.permute(1, 2, 0)  # (H, W, C)
    return (
        g[v0, u0] * (1 - fu) * (1 - fv)
        + g[v0, u1] * fu * (1 - fv)
        + g[v1, u0] * (1 - fu) * fv
        + g[v1, u1] * fu * fv
    )
