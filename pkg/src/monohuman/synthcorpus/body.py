"""Articulated capsule humanoid and its signed distance field.

The body is ten capsules (torso, head, upper/lower arms, upper/lower legs)
posed by a 13-angle joint vector and blended into a single smooth surface
with a log-sum-exp soft minimum. The soft minimum with sharpness k never
deviates from the hard minimum by more than ln(n)/k for n capsules, and it
is 1-Lipschitz, so sphere tracing against it is safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from ..errors import EmptyInput

if TYPE_CHECKING:
    from .patterns import TextureSpec

SEGMENTS = (
    "torso",
    "head",
    "l_upper_arm",
    "l_lower_arm",
    "r_upper_arm",
    "r_lower_arm",
    "l_upper_leg",
    "l_lower_leg",
    "r_upper_leg",
    "r_lower_leg",
)

# Index of the mirror partner of each segment under a left/right flip.
SEGMENT_FLIP = (0, 1, 4, 5, 2, 3, 8, 9, 6, 7)

POSE_ANGLES = (
    "head_tilt",
    "l_shoulder_abduct",
    "l_shoulder_swing",
    "l_elbow",
    "r_shoulder_abduct",
    "r_shoulder_swing",
    "r_elbow",
    "l_hip_abduct",
    "l_hip_swing",
    "l_knee",
    "r_hip_abduct",
    "r_hip_swing",
    "r_knee",
)

KEYPOINT_NAMES = (
    "head_top",
    "neck",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
    "l_hip",
    "l_knee",
    "l_ankle",
    "r_hip",
    "r_knee",
    "r_ankle",
)

# Index of the mirror partner of each keypoint under a left/right flip.
KEYPOINT_FLIP = (0, 1, 5, 6, 7, 2, 3, 4, 11, 12, 13, 8, 9, 10)

SMIN_SHARPNESS = 16.0

_DEFAULT_RADII = {
    "torso": 0.130,
    "head": 0.095,
    "upper_arm": 0.042,
    "lower_arm": 0.036,
    "upper_leg": 0.062,
    "lower_leg": 0.050,
}
_DEFAULT_LENGTHS = {
    "torso": 0.50,
    "head": 0.06,
    "upper_arm": 0.26,
    "lower_arm": 0.24,
    "upper_leg": 0.30,
    "lower_leg": 0.28,
}
_PELVIS_Y = -0.16
_NECK_DROP = 0.05  # shoulders sit this far below the torso top
_HEAD_GAP = 0.05


def default_shape() -> tuple[np.ndarray, np.ndarray]:
    """Per-segment (radii, lengths) arrays in SEGMENTS order."""
    kinds = ["torso", "head"] + ["upper_arm", "lower_arm"] * 2 + ["upper_leg", "lower_leg"] * 2
    radii = np.array([_DEFAULT_RADII[k] for k in kinds], dtype=np.float64)
    lengths = np.array([_DEFAULT_LENGTHS[k] for k in kinds], dtype=np.float64)
    return radii, lengths


@dataclass(frozen=True)
class HumanoidScene:
    """One procedural human: pose angles, segment sizes, texture, identity seed."""

    pose: np.ndarray
    radii: np.ndarray
    lengths: np.ndarray
    texture: "TextureSpec"
    seed: int = 0
    scene_id: str = ""

    def __post_init__(self):
        pose = np.asarray(self.pose, dtype=np.float64)
        if pose.shape != (len(POSE_ANGLES),):
            raise EmptyInput(f"pose must have {len(POSE_ANGLES)} angles, got shape {pose.shape}")
        object.__setattr__(self, "pose", pose)
        object.__setattr__(self, "radii", np.asarray(self.radii, dtype=np.float64))
        object.__setattr__(self, "lengths", np.asarray(self.lengths, dtype=np.float64))
        if self.radii.shape != (len(SEGMENTS),) or self.lengths.shape != (len(SEGMENTS),):
            raise EmptyInput("radii and lengths must each have one entry per segment")

    def angle(self, name: str) -> float:
        return float(self.pose[POSE_ANGLES.index(name)])


def _rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.float64)


def _rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=np.float64)


def _limb_dir(side: float, abduct: float, swing: float) -> np.ndarray:
    # Swing rotates the limb forward (+z) about x, then abduction tilts it
    # away from the body about z; side is +1 for the left (+x) side.
    down = np.array([0.0, -1.0, 0.0])
    return _rot_z(side * abduct) @ _rot_x(-swing) @ down


def body_capsules(scene: HumanoidScene) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Forward kinematics: world-space capsule endpoints and radii.

    Returns (a, b, r) with a, b of shape (10, 3) and r of shape (10,),
    in SEGMENTS order.
    """
    r = scene.radii
    ln = scene.lengths
    seg = {name: i for i, name in enumerate(SEGMENTS)}
    a = np.zeros((len(SEGMENTS), 3))
    b = np.zeros((len(SEGMENTS), 3))

    pelvis = np.array([0.0, _PELVIS_Y, 0.0])
    torso_top = pelvis + np.array([0.0, ln[seg["torso"]], 0.0])
    a[seg["torso"]], b[seg["torso"]] = pelvis, torso_top

    head_base = torso_top + np.array([0.0, _HEAD_GAP, 0.0])
    head_dir = _rot_x(-scene.angle("head_tilt")) @ np.array([0.0, 1.0, 0.0])
    a[seg["head"]] = head_base
    b[seg["head"]] = head_base + ln[seg["head"]] * head_dir

    shoulder_y = torso_top[1] - _NECK_DROP
    hip_x = r[seg["torso"]] * 0.55

    for side_name, side in (("l", 1.0), ("r", -1.0)):
        ua = seg[f"{side_name}_upper_arm"]
        la = seg[f"{side_name}_lower_arm"]
        shoulder = np.array([side * (r[seg["torso"]] + 0.55 * r[ua]), shoulder_y, 0.0])
        abduct = scene.angle(f"{side_name}_shoulder_abduct")
        swing = scene.angle(f"{side_name}_shoulder_swing")
        elbow = scene.angle(f"{side_name}_elbow")
        d_upper = _limb_dir(side, abduct, swing)
        # The elbow bends the forearm further forward in the same plane.
        d_lower = _limb_dir(side, abduct, swing + elbow)
        a[ua] = shoulder
        b[ua] = shoulder + ln[ua] * d_upper
        a[la] = b[ua]
        b[la] = b[ua] + ln[la] * d_lower

        ul = seg[f"{side_name}_upper_leg"]
        ll = seg[f"{side_name}_lower_leg"]
        hip = np.array([side * hip_x, _PELVIS_Y, 0.0])
        h_abduct = scene.angle(f"{side_name}_hip_abduct")
        h_swing = scene.angle(f"{side_name}_hip_swing")
        knee = scene.angle(f"{side_name}_knee")
        d_thigh = _limb_dir(side, h_abduct, h_swing)
        # The knee bends the shank back down relative to the thigh.
        d_shank = _limb_dir(side, h_abduct, h_swing - knee)
        a[ul] = hip
        b[ul] = hip + ln[ul] * d_thigh
        a[ll] = b[ul]
        b[ll] = b[ul] + ln[ll] * d_shank

    return a, b, r.copy()


def capsule_sdf(p: np.ndarray, a: np.ndarray, b: np.ndarray, r: float) -> np.ndarray:
    """Exact signed distance from points p (..., 3) to one capsule."""
    p = np.asarray(p, dtype=np.float64)
    ab = b - a
    denom = float(ab @ ab)
    pa = p - a
    if denom < 1e-18:
        t = np.zeros(p.shape[:-1])
    else:
        t = np.clip((pa @ ab) / denom, 0.0, 1.0)
    closest = a + t[..., None] * ab
    return np.linalg.norm(p - closest, axis=-1) - r


def segment_distances(scene: HumanoidScene, p: np.ndarray) -> np.ndarray:
    """Per-capsule signed distances, shape (..., 10)."""
    a, b, r = body_capsules(scene)
    p = np.asarray(p, dtype=np.float64)
    out = np.empty(p.shape[:-1] + (len(SEGMENTS),))
    for i in range(len(SEGMENTS)):
        out[..., i] = capsule_sdf(p, a[i], b[i], float(r[i]))
    return out


def smooth_min(d: np.ndarray, k: float = SMIN_SHARPNESS) -> np.ndarray:
    """Log-sum-exp soft minimum over the last axis.

    smin(d) = -log(sum_i exp(-k d_i)) / k. Always <= min(d), and at least
    min(d) - ln(n)/k. The shift by the row minimum keeps exp in range.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.shape[-1] == 0:
        raise EmptyInput("smooth_min over zero capsules")
    m = d.min(axis=-1, keepdims=True)
    s = np.exp(-k * (d - m)).sum(axis=-1)
    return m[..., 0] - np.log(s) / k


def body_sdf(scene: HumanoidScene, p: np.ndarray, k: float = SMIN_SHARPNESS) -> np.ndarray:
    """Smooth-blended signed distance of the whole body at points p (..., 3)."""
    return smooth_min(segment_distances(scene, p), k=k)


def body_sdf_gradient(scene: HumanoidScene, p: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central-difference gradient of body_sdf, shape (..., 3)."""
    p = np.asarray(p, dtype=np.float64)
    grad = np.empty_like(p)
    for axis in range(3):
        dp = np.zeros(3)
        dp[axis] = h
        grad[..., axis] = (body_sdf(scene, p + dp) - body_sdf(scene, p - dp)) / (2 * h)
    return grad


def nearest_segment(scene: HumanoidScene, p: np.ndarray) -> np.ndarray:
    """Index of the closest capsule (hard minimum) for each point, shape (...,)."""
    return segment_distances(scene, p).argmin(axis=-1)


def keypoint_positions(scene: HumanoidScene) -> np.ndarray:
    """World positions of the 14 named joints, shape (14, 3)."""
    a, b, r = body_capsules(scene)
    seg = {name: i for i, name in enumerate(SEGMENTS)}
    head_axis = b[seg["head"]] - a[seg["head"]]
    head_axis = head_axis / max(np.linalg.norm(head_axis), 1e-12)
    pts = {
        "head_top": b[seg["head"]] + r[seg["head"]] * head_axis,
        "neck": b[seg["torso"]],
        "l_shoulder": a[seg["l_upper_arm"]],
        "l_elbow": b[seg["l_upper_arm"]],
        "l_wrist": b[seg["l_lower_arm"]],
        "r_shoulder": a[seg["r_upper_arm"]],
        "r_elbow": b[seg["r_upper_arm"]],
        "r_wrist": b[seg["r_lower_arm"]],
        "l_hip": a[seg["l_upper_leg"]],
        "l_knee": b[seg["l_upper_leg"]],
        "l_ankle": b[seg["l_lower_leg"]],
        "r_hip": a[seg["r_upper_leg"]],
        "r_knee": b[seg["r_upper_leg"]],
        "r_ankle": b[seg["r_lower_leg"]],
    }
    return np.stack([pts[name] for name in KEYPOINT_NAMES])


def scene_bounds(scene: HumanoidScene, margin: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned bounds enclosing all capsules plus a blend margin."""
    a, b, r = body_capsules(scene)
    pts = np.concatenate([a, b])
    rad = np.concatenate([r, r])[:, None]
    lo = (pts - rad).min(axis=0) - margin
    hi = (pts + rad).max(axis=0) + margin
    return lo, hi
