"""Proxy perceptual distance: Fréchet distance over a fixed random embedding.

A pretrained perceptual network would drag opaque binary weights into the
repo, so the feature extractor is a 3-layer random conv net whose weights
derive from one published seed. Distances are therefore comparable across
runs and machines, but are a documented proxy, not FID.
"""

from __future__ import annotations

import numpy as np
import torch

from ..errors import EmptyInput, ShapeMismatch

EMBEDDING_SEED = 170365
FEATURE_DIM = 32
JITTER = 1e-6


def _build_weights() -> list[tuple[torch.Tensor, torch.Tensor]]:
    rng = np.random.default_rng(EMBEDDING_SEED)
    layers = []
    for cin, cout in ((3, 8), (8, 16), (16, FEATURE_DIM)):
        w = rng.normal(0.0, np.sqrt(2.0 / (cin * 9)), size=(cout, cin, 3, 3))
        b = rng.normal(0.0, 0.01, size=(cout,))
        layers.append((torch.from_numpy(w).float(), torch.from_numpy(b).float()))
    return layers


_WEIGHTS: list[tuple[torch.Tensor, torch.Tensor]] | None = None


def embed_images(images: np.ndarray) -> np.ndarray:
    """Map (N, H, W, 3) images in [0, 1] to (N, FEATURE_DIM) features."""
    global _WEIGHTS
    if _WEIGHTS is None:
        _WEIGHTS = _build_weights()
    images = np.asarray(images, dtype=np.float32)
    if images.ndim != 4 or images.shape[-1] != 3:
        raise ShapeMismatch(f"expected (N, H, W, 3) images, got {images.shape}")
    x = torch.from_numpy(images).permute(0, 3, 1, 2)
    with torch.no_grad():
        for w, b in _WEIGHTS:
            x = torch.nn.functional.conv2d(x, w, b, stride=2, padding=1)
            x = torch.nn.functional.leaky_relu(x, 0.1)
        feats = x.mean(dim=(2, 3))
    return feats.numpy().astype(np.float64)


def _sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition."""
    sym = (mat + mat.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(feats_a: np.ndarray, feats_b: np.ndarray) -> tuple[float, bool]:
    """Fréchet distance between Gaussian fits of two feature sets.

    Returns (distance, jitter_applied). Near-singular covariances get a
    1e-6 diagonal jitter on both sides, and the flag reports it.
    """
    a = np.atleast_2d(np.asarray(feats_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(feats_b, dtype=np.float64))
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise EmptyInput("need at least 2 samples per set for a covariance fit")
    if a.shape[1] != b.shape[1]:
        raise ShapeMismatch(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")

    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.cov(a, rowvar=False).reshape(a.shape[1], a.shape[1])
    cov_b = np.cov(b, rowvar=False).reshape(b.shape[1], b.shape[1])

    jitter = False
    eye = np.eye(a.shape[1])
    min_eig = min(np.linalg.eigvalsh((cov_a + cov_a.T) / 2).min(), np.linalg.eigvalsh((cov_b + cov_b.T) / 2).min())
    if min_eig < JITTER:
        cov_a = cov_a + JITTER * eye
        cov_b = cov_b + JITTER * eye
        jitter = True

    sqrt_a = _sqrtm_psd(cov_a)
    cross = _sqrtm_psd(sqrt_a @ cov_b @ sqrt_a)
    diff = mu_a - mu_b
    dist = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(cross))
    return max(dist, 0.0), jitter


def proxy_perceptual_distance(images_a: np.ndarray, images_b: np.ndarray) -> tuple[float, bool]:
    """Fréchet distance between embedded image sets; see frechet_distance."""
    return frechet_distance(embed_images(images_a), embed_images(images_b))
