"""Generator and discriminator for guided novel-view synthesis.

Both networks keep one input head per guidance kind so the parameter
table stays stable across training stages; a stage picks the head for
its guidance kind and the unused head keeps its initialization (which is
what "fresh head" means when training later switches kinds).

Every layer is chosen to commute with a horizontal flip: stride-2 4x4
convolutions with padding 1 on even sizes, 3x3 convolutions with padding
1, nearest-neighbor upsampling, concatenation, and pointwise
nonlinearities. With left/right symmetrized kernels the generator is
exactly equivariant to a joint flip of image and guidance.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from ..errors import GuidanceKindError
from .guidance import GUIDANCE_CHANNELS, guidance_flip_permutation

_SLOPE = 0.2


def _down(cin: int, cout: int) -> nn.Conv2d:
    return nn.Conv2d(cin, cout, kernel_size=4, stride=2, padding=1)


class ResBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x):
        h = F.leaky_relu(self.conv1(x), _SLOPE)
        return x + self.conv2(h)


class GeneratorNet(nn.Module):
    """Reference image + target-view guidance -> target-view image in [0, 1]."""

    def __init__(
        self,
        base: int = 32,
        guidance_channels: dict[str, int] | None = None,
        n_res: int = 2,
    ):
        super().__init__()
        self.base = base
        gb = max(base // 2, 1)
        table = GUIDANCE_CHANNELS if guidance_channels is None else guidance_channels
        self.img_down1 = _down(3, base)
        self.img_down2 = _down(base, base * 2)
        self.img_down3 = _down(base * 2, base * 4)
        self.guid_heads = nn.ModuleDict(
            {kind: _down(k, gb) for kind, k in table.items()}
        )
        self.guid_down2 = _down(gb, gb * 2)
        self.guid_down3 = _down(gb * 2, gb * 4)
        self.merge = nn.Conv2d(base * 4 + gb * 4, base * 4, 1)
        self.res1 = ResBlock(base * 4)
        self.res2 = ResBlock(base * 4) if n_res >= 2 else nn.Identity()
        self.dec1 = nn.Conv2d(base * 4 + base * 2, base * 2, 3, padding=1)
        self.dec2 = nn.Conv2d(base * 2 + base, base, 3, padding=1)
        self.dec3 = nn.Conv2d(base, base, 3, padding=1)
        self.out = nn.Conv2d(base, 3, 3, padding=1)

    def forward(self, image, guidance, kind: str, return_features: bool = False):
        if kind not in self.guid_heads:
            raise GuidanceKindError(f"generator has no guidance head for kind {kind!r}")
        e1 = F.leaky_relu(self.img_down1(image), _SLOPE)
        e2 = F.leaky_relu(self.img_down2(e1), _SLOPE)
        e3 = F.leaky_relu(self.img_down3(e2), _SLOPE)
        g1 = F.leaky_relu(self.guid_heads[kind](guidance), _SLOPE)
        g2 = F.leaky_relu(self.guid_down2(g1), _SLOPE)
        g3 = F.leaky_relu(self.guid_down3(g2), _SLOPE)
        x = F.leaky_relu(self.merge(torch.cat([e3, g3], dim=1)), _SLOPE)
        x = self.res2(self.res1(x))
        features = x.mean(dim=(2, 3))
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        x = F.leaky_relu(self.dec1(torch.cat([x, e2], dim=1)), _SLOPE)
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        x = F.leaky_relu(self.dec2(torch.cat([x, e1], dim=1)), _SLOPE)
        x = F.leaky_relu(self.dec3(x), _SLOPE)
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        rgb = torch.sigmoid(self.out(x))
        if return_features:
            return rgb, features
        return rgb


class DiscriminatorNet(nn.Module):
    """Patch discriminator conditioned on guidance; scalar score per sample."""

    def __init__(
        self,
        base: int = 24,
        guidance_base: int = 8,
        guidance_channels: dict[str, int] | None = None,
    ):
        super().__init__()
        table = GUIDANCE_CHANNELS if guidance_channels is None else guidance_channels
        self.img_head = _down(3, base)
        self.guid_heads = nn.ModuleDict(
            {kind: _down(k, guidance_base) for kind, k in table.items()}
        )
        self.trunk1 = _down(base + guidance_base, base * 8 // 3)
        self.trunk2 = _down(base * 8 // 3, base * 16 // 3)
        self.score = nn.Conv2d(base * 16 // 3, 1, 3, padding=1)

    def forward(self, image, guidance, kind: str):
        if kind not in self.guid_heads:
            raise GuidanceKindError(f"discriminator has no guidance head for kind {kind!r}")
        i = F.leaky_relu(self.img_head(image), _SLOPE)
        g = F.leaky_relu(self.guid_heads[kind](guidance), _SLOPE)
        x = F.leaky_relu(self.trunk1(torch.cat([i, g], dim=1)), _SLOPE)
        x = F.leaky_relu(self.trunk2(x), _SLOPE)
        return self.score(x).mean(dim=(1, 2, 3))


def build_networks(seed: int, base: int = 32) -> tuple[GeneratorNet, DiscriminatorNet]:
    """Deterministically initialized generator/discriminator pair."""
    torch.manual_seed(seed)
    return GeneratorNet(base=base), DiscriminatorNet()


def symmetrize_for_flip(module: nn.Module) -> None:
    """Average every kernel with its mirror so the net commutes with flips.

    Guidance input heads also fold in the left/right channel permutation a
    flip applies to their kind. Used to set up equivariance checks.
    """
    with torch.no_grad():
        heads = {}
        if hasattr(module, "guid_heads"):
            for kind, conv in module.guid_heads.items():
                heads[id(conv.weight)] = guidance_flip_permutation(kind)
        for p in module.parameters():
            if p.ndim != 4:
                continue
            if id(p) in heads:
                perm = torch.from_numpy(np.asarray(heads[id(p)]))
                p.copy_(0.5 * (p + p[:, perm].flip(-1)))
            else:
                p.copy_(0.5 * (p + p.flip(-1)))
