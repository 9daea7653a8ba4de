"""Spatial pose guidance: keypoint heatmaps or part-seg + silhouette planes.

Guidance channels are CHW float32 in [0, 1]. The keypoint kind stacks one
Gaussian heatmap per joint (empty when the joint is invisible); the seg
kind stacks one-hot planes for background plus each body segment, then a
silhouette plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import GuidanceKindError, ShapeMismatch
from ..synthcorpus.body import KEYPOINT_FLIP, KEYPOINT_NAMES, SEGMENT_FLIP, SEGMENTS

KEYPOINT_KIND = "keypoint_heatmaps"
SEG_KIND = "seg_silhouette"
GUIDANCE_CHANNELS = {
    KEYPOINT_KIND: len(KEYPOINT_NAMES),
    SEG_KIND: len(SEGMENTS) + 2,  # background + segments one-hot, then silhouette
}
DEFAULT_HEATMAP_SIGMA = 4.0


@dataclass
class Guidance:
    """kind plus a (K, H, W) float32 channel stack."""

    kind: str
    channels: np.ndarray

    def __post_init__(self):
        if self.kind not in GUIDANCE_CHANNELS:
            raise GuidanceKindError(f"unknown guidance kind {self.kind!r}")
        self.channels = np.asarray(self.channels, dtype=np.float32)
        expected = GUIDANCE_CHANNELS[self.kind]
        if self.channels.ndim != 3 or self.channels.shape[0] != expected:
            raise ShapeMismatch(
                f"{self.kind} guidance needs {expected} channels, got shape {self.channels.shape}"
            )


def keypoint_guidance(
    keypoints: np.ndarray, image_size: tuple[int, int], sigma: float = DEFAULT_HEATMAP_SIGMA
) -> Guidance:
    """Gaussian heatmap stack from (K, 4) rows of (joint_id, u, v, visible)."""
    w, h = image_size
    kps = np.asarray(keypoints, dtype=np.float64)
    if kps.shape != (len(KEYPOINT_NAMES), 4):
        raise ShapeMismatch(f"expected ({len(KEYPOINT_NAMES)}, 4) keypoints, got {kps.shape}")
    jj, ii = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    channels = np.zeros((len(KEYPOINT_NAMES), h, w), dtype=np.float32)
    for k, (_, u, v, vis) in enumerate(kps):
        if vis < 0.5:
            continue
        channels[k] = np.exp(-((jj - u) ** 2 + (ii - v) ** 2) / (2.0 * sigma**2)).astype(np.float32)
    return Guidance(KEYPOINT_KIND, channels)


def seg_guidance(part_seg: np.ndarray) -> Guidance:
    """One-hot part planes (background + segments) plus a silhouette plane."""
    seg = np.asarray(part_seg)
    if seg.ndim != 2:
        raise ShapeMismatch(f"expected (H, W) labels, got {seg.shape}")
    n_planes = len(SEGMENTS) + 1
    channels = np.zeros((n_planes + 1, seg.shape[0], seg.shape[1]), dtype=np.float32)
    for label in range(n_planes):
        channels[label] = seg == label
    channels[n_planes] = seg > 0
    return Guidance(SEG_KIND, channels)


def silhouette_seg_guidance(silhouette: np.ndarray, part_seg: np.ndarray) -> Guidance:
    """Seg guidance whose silhouette plane comes from a separate mask.

    Used for pseudo pairs: part planes follow the guiding pose's GT
    segmentation while the silhouette plane reflects the synthesized image.
    """
    g = seg_guidance(part_seg)
    sil = np.asarray(silhouette).astype(np.float32)
    if sil.shape != g.channels.shape[1:]:
        raise ShapeMismatch(f"silhouette shape {sil.shape} does not match seg {g.channels.shape[1:]}")
    g.channels[-1] = sil
    return g


def flip_guidance(g: Guidance) -> Guidance:
    """Mirror guidance horizontally, swapping left/right channel roles."""
    flipped = g.channels[:, :, ::-1].copy()
    if g.kind == KEYPOINT_KIND:
        perm = np.asarray(KEYPOINT_FLIP)
    else:
        # background plane 0 fixed, segment planes permuted, silhouette fixed.
        perm = np.concatenate([[0], np.asarray(SEGMENT_FLIP) + 1, [len(SEGMENTS) + 1]])
    return Guidance(g.kind, flipped[perm])


def guidance_flip_permutation(kind: str) -> np.ndarray:
    """Input-channel permutation a horizontal flip applies to this kind."""
    if kind == KEYPOINT_KIND:
        return np.asarray(KEYPOINT_FLIP)
    if kind == SEG_KIND:
        return np.concatenate([[0], np.asarray(SEGMENT_FLIP) + 1, [len(SEGMENTS) + 1]])
    raise GuidanceKindError(f"unknown guidance kind {kind!r}")
