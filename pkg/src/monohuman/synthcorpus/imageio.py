"""Deterministic on-disk encodings for rendered channels.

RGB and label images are 8-bit PNG; normal maps are 16-bit 3-channel PNG
with n encoded as round((n + 1) / 2 * 65535). Keypoints and manifests are
JSON with sorted keys so repeated generation is byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import cv2
import numpy as np

from ..errors import ConfigError


def save_rgb8(path: Path | str, img: np.ndarray) -> None:
    """Save an (H, W, 3) float image in [0, 1] as 8-bit PNG."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ConfigError(f"expected (H, W, 3) image, got {img.shape}")
    data = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    if not cv2.imwrite(str(path), cv2.cvtColor(data, cv2.COLOR_RGB2BGR)):
        raise IOError(f"failed to write {path}")


def load_rgb8(path: Path | str) -> np.ndarray:
    """Load an 8-bit PNG as (H, W, 3) float32 in [0, 1]."""
    bgr = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if bgr is None:
        raise IOError(f"failed to read {path}")
    return cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB).astype(np.float32) / 255.0


def save_label8(path: Path | str, labels: np.ndarray) -> None:
    """Save an (H, W) integer label image (values 0..255) as 8-bit PNG."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ConfigError(f"expected (H, W) labels, got {labels.shape}")
    if not cv2.imwrite(str(path), labels.astype(np.uint8)):
        raise IOError(f"failed to write {path}")


def load_label8(path: Path | str) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise IOError(f"failed to read {path}")
    return img.astype(np.uint8)


def save_normal16(path: Path | str, normals: np.ndarray) -> None:
    """Save an (H, W, 3) normal map with components in [-1, 1] as 16-bit PNG."""
    normals = np.asarray(normals)
    if normals.ndim != 3 or normals.shape[2] != 3:
        raise ConfigError(f"expected (H, W, 3) normals, got {normals.shape}")
    enc = np.round((normals.astype(np.float64) + 1.0) / 2.0 * 65535.0)
    enc = np.clip(enc, 0, 65535).astype(np.uint16)
    if not cv2.imwrite(str(path), cv2.cvtColor(enc, cv2.COLOR_RGB2BGR)):
        raise IOError(f"failed to write {path}")


def load_normal16(path: Path | str) -> np.ndarray:
    """Load a 16-bit normal PNG back to (H, W, 3) float32.

    Decoded vectors are renormalized (nonzero ones) so quantization can
    never push a norm above 1.
    """
    bgr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if bgr is None:
        raise IOError(f"failed to read {path}")
    dec = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB).astype(np.float64) / 65535.0 * 2.0 - 1.0
    norms = np.linalg.norm(dec, axis=2, keepdims=True)
    nonzero = norms[..., 0] > 0.5  # background decodes to norm ~ sqrt(3) * tiny
    dec[nonzero] = dec[nonzero] / norms[nonzero] * (1.0 - 1e-7)
    dec[~nonzero] = 0.0
    return dec.astype(np.float32)


def save_keypoints(path: Path | str, keypoints: np.ndarray) -> None:
    """Save (K, 4) keypoint rows (joint_id, u, v, visible) as JSON."""
    rows = [[float(x) for x in row] for row in np.asarray(keypoints)]
    write_json(path, {"keypoints": rows})


def load_keypoints(path: Path | str) -> np.ndarray:
    data = read_json(path)
    return np.asarray(data["keypoints"], dtype=np.float32)


def write_json(path: Path | str, payload: dict) -> None:
    """Write JSON with sorted keys and a trailing newline, atomically."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)


def read_json(path: Path | str) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
