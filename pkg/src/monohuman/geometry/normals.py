"""Front/back normal-map estimation from images.

Two independent encoder-decoder nets: one reads the reference front
image, the other reads the hallucinated back image. Outputs are
camera-space normal maps, renormalized to unit length inside the
predicted silhouette (taken from input-image brightness, since the
corpus renders on black) and zeroed outside it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from ..errors import DivergenceError, ShapeMismatch
from ..seeding import rng_for

_SLOPE = 0.2
SILHOUETTE_THRESHOLD = 0.06


class NormalNet(nn.Module):
    """U-shaped image-to-normal-map network with three scale levels.

    The wide receptive field lets the net separate garment pattern from
    shading: local color alone is ambiguous, the surrounding limb extent
    is not.
    """

    def __init__(self, base: int = 24):
        super().__init__()

        def c3(cin: int, cout: int) -> nn.Sequential:
            return nn.Sequential(nn.Conv2d(cin, cout, 3, padding=1), nn.LeakyReLU(_SLOPE))

        def d4(cin: int, cout: int) -> nn.Sequential:
            return nn.Sequential(nn.Conv2d(cin, cout, 4, stride=2, padding=1), nn.LeakyReLU(_SLOPE))

        self.head = c3(3, base)
        self.down1 = d4(base, base * 2)
        self.down2 = d4(base * 2, base * 2)
        self.down3 = d4(base * 2, base * 2)
        self.mid = c3(base * 2, base * 2)
        self.up3 = c3(base * 4, base * 2)
        self.up2 = c3(base * 4, base * 2)
        self.up1 = c3(base * 3, base)
        self.out = nn.Conv2d(base, 3, 3, padding=1)

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
        return torch.tanh(self.out(g0))


@dataclass
class NormalEstimator:
    """Paired nets: front reads the reference image, back the DAH image."""

    front: NormalNet
    back: NormalNet


def build_normal_estimator(seed: int, base: int = 24) -> NormalEstimator:
    torch.manual_seed(seed)
    return NormalEstimator(front=NormalNet(base=base), back=NormalNet(base=base))


def _img_tensor(image: np.ndarray) -> torch.Tensor:
    arr = np.asarray(image, dtype=np.float32)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeMismatch(f"expected (H, W, 3) image, got {arr.shape}")
    return torch.from_numpy(arr.transpose(2, 0, 1)[None].copy())


def _finalize(raw: torch.Tensor, image: np.ndarray) -> np.ndarray:
    """Renormalize inside the input silhouette, zero outside."""
    n = raw[0].detach().numpy().transpose(1, 2, 0).astype(np.float32)
    sil = np.asarray(image).max(axis=2) > SILHOUETTE_THRESHOLD
    norms = np.linalg.norm(n, axis=2)
    safe = np.maximum(norms, 1e-8)
    n = n / safe[..., None] * (1.0 - 1e-7)
    n[~sil] = 0.0
    return n


def apply_normal_net(net: NormalNet, image: np.ndarray) -> np.ndarray:
    net.eval()
    with torch.no_grad():
        raw = net(_img_tensor(image))
    return _finalize(raw, image)


def estimate_normals(
    est: NormalEstimator, front_img: np.ndarray, back_img: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Normal maps for the reference front image and the DAH back image."""
    if np.asarray(front_img).shape != np.asarray(back_img).shape:
        raise ShapeMismatch("front and back images must share a resolution")
    return apply_normal_net(est.front, front_img), apply_normal_net(est.back, back_img)


def train_normal_net(
    net: NormalNet,
    samples: list[tuple[np.ndarray, np.ndarray, np.ndarray]],
    steps: int,
    lr: float = 2e-4,
    batch_size: int = 4,
    seed: int = 0,
    max_nonfinite: int = 50,
) -> list[float]:
    """Masked L1 regression of (image, gt_normals, gt_mask) samples."""
    if not samples:
        raise ShapeMismatch("no normal-training samples")
    imgs = torch.from_numpy(
        np.stack([np.asarray(s[0], dtype=np.float32).transpose(2, 0, 1) for s in samples])
    )
    gts = torch.from_numpy(
        np.stack([np.asarray(s[1], dtype=np.float32).transpose(2, 0, 1) for s in samples])
    )
    masks = torch.from_numpy(
        np.stack([np.asarray(s[2], dtype=np.float32)[None] for s in samples])
    )
    rng = rng_for(seed, "normal-train")
    opt = torch.optim.Adam(net.parameters(), lr=lr)
    history = []
    bad = 0
    net.train()
    for step in range(steps):
        idx = torch.from_numpy(rng.integers(0, len(samples), size=batch_size))
        pred = net(imgs[idx])
        m = masks[idx]
        loss = ((pred - gts[idx]).abs() * m).sum() / m.sum().clamp(min=1.0) / 3.0
        opt.zero_grad()
        loss.backward()
        opt.step()
        bad = 0 if torch.isfinite(loss) else bad + 1
        if bad >= max_nonfinite:
            raise DivergenceError(f"normal training: {bad} consecutive non-finite steps")
        if step % 50 == 0 or step == steps - 1:
            history.append(float(loss.detach()))
    net.eval()
    return history


def angular_error_deg(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> float:
    """Mean angle in degrees between unit normal maps, over masked pixels."""
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        raise ShapeMismatch("empty evaluation mask")
    p = np.asarray(pred, dtype=np.float64)[m]
    g = np.asarray(gt, dtype=np.float64)[m]
    p = p / np.maximum(np.linalg.norm(p, axis=1, keepdims=True), 1e-12)
    g = g / np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-12)
    cos = np.clip((p * g).sum(axis=1), -1.0, 1.0)
    return float(np.degrees(np.arccos(cos)).mean())
