"""Corpus generation: scene sampling policies, record layout, manifest.

Two corpus kinds mimic the two photo domains the hallucinator must bridge:

* "source": single-person catalog shots. Mostly partial-body crops (upper
  or lower body), narrow yaw range, arms near the body, a wide and vivid
  texture pool. A small fraction are full-body; a fraction of those also
  carry a true back view.
* "target": scan-style captures. Always full body, the full yaw circle in
  fixed increments, wider pose variety (arms raised or reaching forward),
  a narrow muted texture pool, plus occupancy supervision points per scene.

Generation is a pure function of the config: every scene derives its RNG
from the master seed, so worker-parallel and serial runs write identical
bytes.
"""

from __future__ import annotations

import colorsys
import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..seeding import derive_seed
from .body import HumanoidScene, POSE_ANGLES, SEGMENTS, default_shape, scene_bounds
from .camera import CameraModel
from .imageio import (
    read_json,
    save_keypoints,
    save_label8,
    save_normal16,
    save_rgb8,
    write_json,
)
from .patterns import PATTERNS, REGIONS, PatternSpec, TextureSpec
from .render import RenderSample, render_view
from .sampling import sample_occupancy_points

FORMAT_VERSION = 1

_POSE_PRESETS = {
    # Catalog poses: arms hang near the body, small joint excursions.
    "fashion": {
        "head_tilt": (-0.10, 0.10),
        "shoulder_abduct": (0.06, 0.35),
        "shoulder_swing": (-0.15, 0.25),
        "elbow": (0.0, 0.45),
        "hip_abduct": (0.02, 0.12),
        "hip_swing": (-0.12, 0.12),
        "knee": (0.0, 0.25),
    },
    # Scan poses: standing captures with arms raised laterally and mild
    # forward gestures, the usual body-scan stance.
    "scan": {
        "head_tilt": (-0.15, 0.15),
        "shoulder_abduct": (0.10, 0.95),
        "shoulder_swing": (-0.20, 0.45),
        "elbow": (0.0, 0.70),
        "hip_abduct": (0.03, 0.30),
        "hip_swing": (-0.15, 0.25),
        "knee": (0.0, 0.40),
    },
}

_SKIN_TONES = (
    (0.93, 0.80, 0.69),
    (0.87, 0.72, 0.60),
    (0.76, 0.57, 0.44),
    (0.55, 0.39, 0.29),
)

# Muted garment colors for the target pool; max channel stays well above 0
# so a dressed body never vanishes against the black background.
_MUTED_COLORS = (
    (0.45, 0.42, 0.40),
    (0.35, 0.38, 0.45),
    (0.50, 0.35, 0.33),
    (0.38, 0.45, 0.38),
    (0.55, 0.50, 0.42),
    (0.33, 0.33, 0.42),
)


@dataclass(frozen=True)
class CorpusConfig:
    """Everything that determines a corpus, bit for bit."""

    kind: str
    n_scenes: int
    seed: int = 0
    image_size: int = 128
    camera_scale: float = 70.0
    split_fraction: float = 0.9
    full_body_fraction: float = 0.085
    back_view_fraction: float = 0.10
    yaw_range_deg: tuple[float, float] = (-25.0, 25.0)
    pair_yaw_delta_deg: float = 15.0
    target_yaws_deg: tuple[int, ...] = tuple(range(0, 360, 10))
    pose_preset: str = ""
    texture_pool: str = ""
    occ_surface: int = 6000
    occ_uniform: int = 400
    occ_sigma: float = 0.05

    def __post_init__(self):
        if self.kind not in ("source", "target"):
            raise ConfigError(f"corpus kind must be 'source' or 'target', got {self.kind!r}")
        if self.n_scenes < 1:
            raise ConfigError("n_scenes must be at least 1")
        for name in ("split_fraction", "full_body_fraction", "back_view_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.image_size < 8:
            raise ConfigError("image_size too small")
        if self.kind == "target" and not self.target_yaws_deg:
            raise ConfigError("target corpus needs at least one yaw")
        if not self.pose_preset:
            object.__setattr__(self, "pose_preset", "fashion" if self.kind == "source" else "scan")
        if not self.texture_pool:
            object.__setattr__(self, "texture_pool", "wide" if self.kind == "source" else "narrow")
        if self.pose_preset not in _POSE_PRESETS:
            raise ConfigError(f"unknown pose preset {self.pose_preset!r}")
        if self.texture_pool not in ("wide", "narrow"):
            raise ConfigError(f"unknown texture pool {self.texture_pool!r}")
        object.__setattr__(self, "yaw_range_deg", tuple(float(v) for v in self.yaw_range_deg))
        object.__setattr__(self, "target_yaws_deg", tuple(int(v) for v in self.target_yaws_deg))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["yaw_range_deg"] = list(self.yaw_range_deg)
        d["target_yaws_deg"] = list(self.target_yaws_deg)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusConfig":
        d = dict(d)
        if "yaw_range_deg" in d:
            d["yaw_range_deg"] = tuple(d["yaw_range_deg"])
        if "target_yaws_deg" in d:
            d["target_yaws_deg"] = tuple(d["target_yaws_deg"])
        return cls(**d)


def _sample_pose(rng: np.random.Generator, preset: str) -> np.ndarray:
    ranges = _POSE_PRESETS[preset]
    vals = []
    for name in POSE_ANGLES:
        key = name[2:] if name[:2] in ("l_", "r_") else name
        lo, hi = ranges[key]
        vals.append(rng.uniform(lo, hi))
    return np.array(vals)


def _sample_shape(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    radii, lengths = default_shape()
    kinds = ["torso", "head"] + ["upper_arm", "lower_arm"] * 2 + ["upper_leg", "lower_leg"] * 2
    # One jitter factor per segment kind keeps the body mirror-symmetric.
    rj = {k: rng.uniform(0.90, 1.10) for k in ("torso", "head", "upper_arm", "lower_arm", "upper_leg", "lower_leg")}
    lj = {k: rng.uniform(0.88, 1.12) for k in rj}
    radii = radii * np.array([rj[k] for k in kinds])
    lengths = lengths * np.array([lj[k] for k in kinds])
    return radii, lengths


def _vivid_color(rng: np.random.Generator) -> tuple[float, float, float]:
    return colorsys.hsv_to_rgb(rng.uniform(0, 1), rng.uniform(0.5, 1.0), rng.uniform(0.45, 1.0))


def _sample_texture(rng: np.random.Generator, pool: str) -> TextureSpec:
    regions = {}
    for region in REGIONS:
        if region in ("skin", "head"):
            tone = _SKIN_TONES[rng.integers(len(_SKIN_TONES))]
            regions[region] = PatternSpec("solid", (tone,))
            continue
        if pool == "wide":
            pattern = PATTERNS[rng.integers(len(PATTERNS))]
            n_colors = 1 if pattern == "solid" else int(rng.integers(2, 4))
            palette = tuple(_vivid_color(rng) for _ in range(n_colors))
            freq = float(rng.uniform(1.0, 3.5))
        else:
            pattern = "solid" if rng.uniform() < 0.65 else "stripes"
            n_colors = 1 if pattern == "solid" else 2
            picks = rng.choice(len(_MUTED_COLORS), size=n_colors, replace=False)
            palette = tuple(_MUTED_COLORS[i] for i in picks)
            freq = float(rng.uniform(0.8, 1.4))
        regions[region] = PatternSpec(pattern, palette, freq)
    return TextureSpec(regions=regions)


def _radial_extent(scene: HumanoidScene) -> float:
    """Max distance of any capsule surface from the y axis, for yaw-proof framing."""
    from .body import body_capsules

    a, b, r = body_capsules(scene)
    pts = np.concatenate([a, b])
    rad = np.concatenate([r, r])
    return float((np.linalg.norm(pts[:, [0, 2]], axis=1) + rad).max())


def _fit_scale(scene: HumanoidScene, image_size: int, margin: float = 0.92) -> tuple[float, float]:
    """(max scale that keeps the body in frame at any yaw, vertical center)."""
    lo, hi = scene_bounds(scene, margin=0.0)
    cy = (lo[1] + hi[1]) / 2.0
    half_h = (hi[1] - lo[1]) / 2.0
    half_w = _radial_extent(scene)
    return margin * (image_size / 2.0) / max(half_h, half_w), cy


def _scene_from_seed(config: CorpusConfig, index: int) -> tuple[HumanoidScene, int, np.random.Generator]:
    seed = derive_seed(config.seed, f"{config.kind}-scene", index)
    rng = np.random.default_rng(seed)
    pose = _sample_pose(rng, config.pose_preset)
    radii, lengths = _sample_shape(rng)
    texture = _sample_texture(rng, config.texture_pool)
    sid = f"{'src' if config.kind == 'source' else 'tgt'}{index:05d}"
    scene = HumanoidScene(pose=pose, radii=radii, lengths=lengths, texture=texture, seed=seed, scene_id=sid)
    return scene, seed, rng


def _write_view(sample: RenderSample, scene_dir: Path, root: Path, prefix: str) -> dict:
    rel = scene_dir.relative_to(root)
    save_rgb8(scene_dir / f"{prefix}_rgb.png", sample.rgb)
    save_label8(scene_dir / f"{prefix}_seg.png", sample.part_seg)
    save_normal16(scene_dir / f"{prefix}_normal.png", sample.normal_map)
    save_keypoints(scene_dir / f"{prefix}_kp.json", sample.keypoints)
    return {
        "rgb": str(rel / f"{prefix}_rgb.png"),
        "seg": str(rel / f"{prefix}_seg.png"),
        "normal": str(rel / f"{prefix}_normal.png"),
        "keypoints": str(rel / f"{prefix}_kp.json"),
        "camera": sample.camera.to_dict(),
        "view_tag": sample.view_tag,
    }


def _generate_scene(config: CorpusConfig, index: int, out_root: str) -> dict:
    """Render and write everything for one scene; returns manifest pieces."""
    root = Path(out_root)
    scene, seed, rng = _scene_from_seed(config, index)
    scene_dir = root / "scenes" / scene.scene_id
    scene_dir.mkdir(parents=True, exist_ok=True)

    n_train = int(round(config.n_scenes * config.split_fraction))
    split = "train" if index < n_train else "test"
    size = config.image_size
    stats = 0
    records = []
    occupancy = None

    if config.kind == "source":
        full_body = bool(rng.uniform() < config.full_body_fraction)
        has_back = bool(full_body and rng.uniform() < config.back_view_fraction)
        yaw1 = float(np.deg2rad(rng.uniform(*config.yaw_range_deg)))
        fit, cy = _fit_scale(scene, size)
        if full_body:
            cam = CameraModel(yaw1, min(config.camera_scale * rng.uniform(0.95, 1.05), fit), (size, size), (0.0, cy, 0.0))
        else:
            crop_upper = bool(rng.uniform() < 0.5)
            y = rng.uniform(0.12, 0.35) if crop_upper else rng.uniform(-0.60, -0.30)
            cam = CameraModel(
                yaw1,
                config.camera_scale * rng.uniform(1.8, 2.3),
                (size, size),
                (float(rng.uniform(-0.06, 0.06)), float(y), 0.0),
            )
        front = render_view(scene, cam, "front")
        stats += front.max_step_pixels
        record = {
            "scene_id": scene.scene_id,
            "split": split,
            "full_body": full_body,
            "has_back": has_back,
            "front": _write_view(front, scene_dir, root, "front"),
            "back": None,
            "pair": None,
        }
        if has_back:
            back = render_view(scene, cam, "back")
            stats += back.max_step_pixels
            record["back"] = _write_view(back, scene_dir, root, "back")
        else:
            cam2 = CameraModel(yaw1 + float(np.deg2rad(config.pair_yaw_delta_deg)), cam.scale, cam.image_size, cam.center)
            pair = render_view(scene, cam2, "front")
            stats += pair.max_step_pixels
            record["pair"] = _write_view(pair, scene_dir, root, "pair")
        records.append(record)
    else:
        fit, cy = _fit_scale(scene, size)
        cam_scale = min(config.camera_scale * rng.uniform(0.96, 1.04), fit)
        for yaw_deg in config.target_yaws_deg:
            cam = CameraModel(float(np.deg2rad(yaw_deg)), cam_scale, (size, size), (0.0, cy, 0.0))
            front = render_view(scene, cam, "front")
            back = render_view(scene, cam, "back")
            stats += front.max_step_pixels + back.max_step_pixels
            records.append(
                {
                    "scene_id": scene.scene_id,
                    "split": split,
                    "full_body": True,
                    "has_back": True,
                    "yaw_deg": float(yaw_deg),
                    "front": _write_view(front, scene_dir, root, f"y{int(yaw_deg):03d}_front"),
                    "back": _write_view(back, scene_dir, root, f"y{int(yaw_deg):03d}_back"),
                    "pair": None,
                }
            )
        occ_rng = np.random.default_rng(derive_seed(config.seed, "target-occ", index))
        points, labels = sample_occupancy_points(
            scene, config.occ_surface, config.occ_uniform, config.occ_sigma, occ_rng
        )
        rel = scene_dir.relative_to(root)
        np.save(scene_dir / "occ_points.npy", points)
        np.save(scene_dir / "occ_labels.npy", labels)
        occupancy = {"points": str(rel / "occ_points.npy"), "labels": str(rel / "occ_labels.npy")}

    entry = {
        "pose": [float(v) for v in scene.pose],
        "radii": [float(v) for v in scene.radii],
        "lengths": [float(v) for v in scene.lengths],
        "texture": scene.texture.to_dict(),
        "seed": seed,
        "occupancy": occupancy,
    }
    return {"scene_id": scene.scene_id, "records": records, "entry": entry, "max_step_pixels": stats}


def _generate_scene_star(args) -> dict:
    return _generate_scene(*args)


class DatasetManifest:
    """Loaded corpus manifest plus path resolution against its root."""

    def __init__(self, root: Path | str, data: dict):
        self.root = Path(root)
        self.data = data

    @property
    def kind(self) -> str:
        return self.data["corpus_kind"]

    @property
    def scenes(self) -> dict:
        return self.data["scenes"]

    def records(self, split: str | None = None) -> list[dict]:
        recs = self.data["records"]
        if split is None:
            return list(recs)
        return [r for r in recs if r["split"] == split]

    def resolve(self, rel: str) -> Path:
        return self.root / rel

    def scene(self, scene_id: str) -> HumanoidScene:
        e = self.scenes[scene_id]
        return HumanoidScene(
            pose=np.array(e["pose"]),
            radii=np.array(e["radii"]),
            lengths=np.array(e["lengths"]),
            texture=TextureSpec.from_dict(e["texture"]),
            seed=e["seed"],
            scene_id=scene_id,
        )

    def load_occupancy(self, scene_id: str) -> tuple[np.ndarray, np.ndarray]:
        occ = self.scenes[scene_id]["occupancy"]
        if occ is None:
            raise ConfigError(f"scene {scene_id} has no occupancy samples")
        return np.load(self.resolve(occ["points"])), np.load(self.resolve(occ["labels"]))

    def save(self) -> Path:
        path = self.root / "manifest.json"
        write_json(path, self.data)
        return path

    @classmethod
    def load(cls, path: Path | str) -> "DatasetManifest":
        path = Path(path)
        if path.is_dir():
            path = path / "manifest.json"
        data = read_json(path)
        if data.get("format_version") != FORMAT_VERSION:
            raise ConfigError(f"unsupported manifest format_version {data.get('format_version')}")
        return cls(path.parent, data)

    def validate(self) -> None:
        """Check referenced files exist and split/structure invariants hold."""
        splits_by_scene: dict[str, str] = {}
        for rec in self.data["records"]:
            sid = rec["scene_id"]
            if sid not in self.scenes:
                raise ConfigError(f"record references unknown scene {sid}")
            prev = splits_by_scene.setdefault(sid, rec["split"])
            if prev != rec["split"]:
                raise ConfigError(f"scene {sid} appears in multiple splits")
            if self.kind == "target" and not rec["full_body"]:
                raise ConfigError(f"target record for {sid} is not full-body")
            for view_name in ("front", "back", "pair"):
                view = rec.get(view_name)
                if view is None:
                    continue
                for key in ("rgb", "seg", "normal", "keypoints"):
                    if not self.resolve(view[key]).exists():
                        raise ConfigError(f"missing file {view[key]} for {sid}")


def generate_corpus(config: CorpusConfig, out_dir: Path | str, workers: int = 1) -> DatasetManifest:
    """Generate a corpus under out_dir and return its manifest.

    Worker count only affects wall time: per-scene RNG streams derive from
    the master seed and the manifest is assembled in scene order, so any
    worker count produces identical bytes.
    """
    root = Path(out_dir)
    (root / "scenes").mkdir(parents=True, exist_ok=True)

    tasks = [(config, i, str(root)) for i in range(config.n_scenes)]
    if workers <= 1:
        results = [_generate_scene(*t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_generate_scene_star, tasks, chunksize=1))

    records: list[dict] = []
    scenes: dict[str, dict] = {}
    max_step_pixels = 0
    for res in results:
        records.extend(res["records"])
        scenes[res["scene_id"]] = res["entry"]
        max_step_pixels += res["max_step_pixels"]

    data = {
        "format_version": FORMAT_VERSION,
        "corpus_kind": config.kind,
        "generation_config": config.to_dict(),
        "stats": {"max_step_pixels": max_step_pixels},
        "scenes": scenes,
        "records": records,
    }
    manifest = DatasetManifest(root, data)
    manifest.save()
    return manifest
