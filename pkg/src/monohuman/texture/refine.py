"""Learned per-vertex texture refinement on top of projected colors."""

from __future__ import annotations

import numpy as np
import torch

from ..errors import ShapeMismatch
from ..geometry.features import PixelFeatureMap, bilinear_sample
from .networks import TextureFeatureExtractor, VertexRefiner
from .visibility import VertexColorField


def _image_tensor(image: np.ndarray) -> torch.Tensor:
    """(H, W, 3) float array -> (1, 3, H, W) float32 tensor."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeMismatch(f"expected an (H, W, 3) image, got {image.shape}")
    return torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1))).float().unsqueeze(0)


def refiner_inputs(
    extractor: TextureFeatureExtractor,
    field: VertexColorField,
    front_img: torch.Tensor,
    back_img: torch.Tensor,
) -> torch.Tensor:
    """Differentiable per-vertex refiner input rows.

    Features are bilinearly sampled from each view's extractor output at
    the recorded projection coordinates and zeroed where the matching
    visibility flag is false, so invisible views contribute only their
    flag. Layout: [front feature, back feature, initial RGB, vis_front,
    vis_back].
    """
    h, w = front_img.shape[-2], front_img.shape[-1]
    if back_img.shape != front_img.shape:
        raise ShapeMismatch("front and back images disagree in shape")
    feat_f = extractor(front_img)[0]
    feat_b = extractor(back_img)[0]
    fmap_f = PixelFeatureMap(feat_f, "fine", (w, h))
    fmap_b = PixelFeatureMap(feat_b, "fine", (w, h))
    sf = bilinear_sample(fmap_f, field.uv_front[:, 0], field.uv_front[:, 1])
    sb = bilinear_sample(fmap_b, field.uv_back[:, 0], field.uv_back[:, 1])
    mf = torch.from_numpy(field.vis_front.astype(np.float32)).unsqueeze(1)
    mb = torch.from_numpy(field.vis_back.astype(np.float32)).unsqueeze(1)
    rgb = torch.from_numpy(field.colors.astype(np.float32))
    return torch.cat([sf * mf, sb * mb, rgb, mf, mb], dim=1)


def refine_texture(
    extractor: TextureFeatureExtractor,
    refiner: VertexRefiner,
    field: VertexColorField,
    front_img: np.ndarray,
    back_img: np.ndarray,
    chunk: int = 8192,
) -> np.ndarray:
    """Refined per-vertex RGB in [0, 1], (N, 3) float32."""
    extractor.eval()
    refiner.eval()
    with torch.no_grad():
        rows = refiner_inputs(extractor, field, _image_tensor(front_img), _image_tensor(back_img))
        out = []
        for start in range(0, rows.shape[0], chunk):
            out.append(refiner(rows[start : start + chunk]))
        colors = torch.cat(out, dim=0) if out else torch.zeros((0, 3))
    return colors.clamp(0.0, 1.0).numpy().astype(np.float32)
