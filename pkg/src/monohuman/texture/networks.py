"""Networks for per-vertex texture refinement.

TextureFeatureExtractor turns a view image into a dense feature map that
stays spatially aligned with the input (same width and height). It is a
plain eight-layer encoder-decoder: four encoder convolutions with channel
counts doubling from the first layer, four decoder convolutions halving
back down, and a final feature layer. All resolution changes between
stages use bilinear resampling; the interior stages run at reduced
resolution to keep CPU inference cheap.

VertexRefiner maps one vertex's concatenated inputs (masked front
feature, masked back feature, initial RGB, the two visibility flags) to
a refined RGB. The final activation is a sine at frequency omega mapped
affinely into [0, 1]; a variant with an identity head exists for the
ablation.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ConfigError

FEATURE_CHANNELS = 128
SINE_OMEGA = 30.0
_SLOPE = 0.01


def _conv(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(nn.Conv2d(cin, cout, 3, padding=1), nn.LeakyReLU(_SLOPE))


class TextureFeatureExtractor(nn.Module):
    """Eight-layer encoder-decoder producing an image-aligned feature map.

    Channel plan with base=64: encoder 64, 128, 256, 512; decoder 256,
    128, 64, then the final feature layer at `feature_channels` (128).
    """

    def __init__(self, base: int = 64, feature_channels: int = FEATURE_CHANNELS):
        super().__init__()
        if base < 1 or feature_channels < 1:
            raise ConfigError("extractor channel counts must be positive")
        b = base
        self.feature_channels = feature_channels
        self.enc1 = _conv(3, b)
        self.enc2 = _conv(b, 2 * b)
        self.enc3 = _conv(2 * b, 4 * b)
        self.enc4 = _conv(4 * b, 8 * b)
        self.dec1 = _conv(8 * b, 4 * b)
        self.dec2 = _conv(4 * b, 2 * b)
        self.dec3 = _conv(2 * b, b)
        self.dec4 = nn.Conv2d(b, feature_channels, 3, padding=1)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) -> (B, feature_channels, H, W)."""
        h, w = image.shape[-2], image.shape[-1]

        def resize(t: torch.Tensor, size: tuple[int, int]) -> torch.Tensor:
            if t.shape[-2:] == size:
                return t
            return F.interpolate(t, size=size, mode="bilinear", align_corners=False)

        x = self.enc1(image)
        x = self.enc2(resize(x, (max(h // 4, 1), max(w // 4, 1))))
        x = self.enc3(resize(x, (max(h // 8, 1), max(w // 8, 1))))
        x = self.enc4(resize(x, (max(h // 16, 1), max(w // 16, 1))))
        x = self.dec1(x)
        x = self.dec2(resize(x, (max(h // 8, 1), max(w // 8, 1))))
        x = self.dec3(resize(x, (max(h // 4, 1), max(w // 4, 1))))
        x = self.dec4(x)
        return resize(x, (h, w))


class VertexRefiner(nn.Module):
    """Per-vertex MLP from projected evidence to refined RGB.

    Input layout: [front feature (F), back feature (F), initial RGB (3),
    vis_front, vis_back] for a total of 2F + 5 values. Hidden widths are
    256, 128, 64. The default head applies sin(omega * z) mapped to
    [0, 1]; final_activation="identity" returns the raw head output.
    """

    HIDDEN = (256, 128, 64)

    def __init__(
        self,
        feature_channels: int = FEATURE_CHANNELS,
        final_activation: str = "sine",
        omega: float = SINE_OMEGA,
        hidden: tuple[int, ...] | None = None,
    ):
        super().__init__()
        if final_activation not in ("sine", "identity"):
            raise ConfigError(f"unknown final activation {final_activation!r}")
        self.feature_channels = feature_channels
        self.final_activation = final_activation
        self.omega = float(omega)
        hidden = self.HIDDEN if hidden is None else tuple(hidden)
        width_in = 2 * feature_channels + 5
        widths = (width_in,) + hidden
        self.hidden = nn.ModuleList(
            nn.Linear(widths[i], widths[i + 1]) for i in range(len(widths) - 1)
        )
        self.head = nn.Linear(hidden[-1], 3)
        if final_activation == "sine":
            bound = math.sqrt(6.0 / hidden[-1]) / self.omega
            with torch.no_grad():
                self.head.weight.uniform_(-bound, bound)
                self.head.bias.zero_()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(N, 2F+5) -> (N, 3)."""
        for layer in self.hidden:
            x = F.leaky_relu(layer(x), _SLOPE)
        z = self.head(x)
        if self.final_activation == "sine":
            return (torch.sin(self.omega * z) + 1.0) / 2.0
        return z


def build_texture_nets(
    seed: int,
    base: int = 64,
    feature_channels: int = FEATURE_CHANNELS,
    final_activation: str = "sine",
) -> tuple[TextureFeatureExtractor, VertexRefiner]:
    """Deterministically initialize the extractor and refiner pair."""
    torch.manual_seed(seed)
    extractor = TextureFeatureExtractor(base=base, feature_channels=feature_channels)
    refiner = VertexRefiner(feature_channels=feature_channels, final_activation=final_activation)
    return extractor, refiner
