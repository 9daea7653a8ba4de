"""Geometry training and mesh extraction.

Normal estimators train first (masked L1 on GT normal maps; the back
net reads DAH-hallucinated back views). The occupancy field then trains
with binary cross-entropy on GT occupancy point samples: coarse path
alone for the first phase, then the fine path jointly (or with the
coarse path frozen, per config).
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np
import torch
from torch.nn import functional as F

from ..archive import load_archive, save_archive
from ..errors import ConfigError, DivergenceError, EmptyMesh
from ..hallucinator.checkpoint import StageCheckpoint
from ..hallucinator.data import load_view
from ..hallucinator.stages import synthesize_back_view
from ..seeding import derive_seed, rng_for
from ..synthcorpus.camera import CameraModel
from ..synthcorpus.corpus import DatasetManifest
from ..synthcorpus.imageio import load_normal16
from .features import FeatureEncoder, build_input_stack, encode_features
from .implicit import ImplicitField, build_field, occupancy_fine, point_embedding
from .marching import grid_coordinates, marching_cubes
from .mesh import TriangleMesh
from .normals import (
    NormalEstimator,
    build_normal_estimator,
    estimate_normals,
    train_normal_net,
)

log = logging.getLogger(__name__)

GEO_MAGIC = b"MHGE"
GEO_FORMAT_VERSION = 1


@dataclass(frozen=True)
class GeoTrainConfig:
    """Hyperparameters for normal and occupancy training."""

    normal_steps: int = 900
    normal_lr: float = 2e-4
    normal_batch: int = 4
    epochs_coarse: int = 8
    epochs_joint: int = 32
    joint_mode: str = "joint"  # "joint" | "frozen"
    points_per_step: int = 2048
    lr: float = 1e-3
    normal_base: int = 24
    feature_mid: int = 16
    back_input: str = "dah"  # "dah" | "front" (reroute control arm)
    grad_clip: float = 3.0
    seed: int = 0
    max_nonfinite: int = 50

    def __post_init__(self):
        if self.joint_mode not in ("joint", "frozen"):
            raise ConfigError(f"joint_mode must be joint or frozen, got {self.joint_mode!r}")
        if self.back_input not in ("dah", "front"):
            raise ConfigError(f"back_input must be dah or front, got {self.back_input!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GeoTrainConfig":
        return cls(**d)


@dataclass
class GeoCheckpoint:
    est: NormalEstimator
    enc_coarse: FeatureEncoder
    enc_fine: FeatureEncoder
    field: ImplicitField
    config: dict
    meta: dict = dc_field(default_factory=dict)


def save_geo_checkpoint(path: str, geo: GeoCheckpoint) -> None:
    arrays = {}
    modules = {
        "normal_front": geo.est.front,
        "normal_back": geo.est.back,
        "enc_coarse": geo.enc_coarse,
        "enc_fine": geo.enc_fine,
        "field": geo.field,
    }
    for prefix, module in modules.items():
        for name, tensor in module.state_dict().items():
            arrays[f"{prefix}.{name}"] = tensor.detach().cpu().numpy()
    header = {
        "format_version": GEO_FORMAT_VERSION,
        "kind": "geometry",
        "config": geo.config,
        "meta": geo.meta,
    }
    save_archive(path, GEO_MAGIC, header, arrays)


def load_geo_checkpoint(path: str) -> GeoCheckpoint:
    header, arrays = load_archive(path, GEO_MAGIC)
    if header["format_version"] != GEO_FORMAT_VERSION:
        raise ConfigError(f"unsupported geometry checkpoint version {header['format_version']}")
    cfg = GeoTrainConfig.from_dict(header["config"])
    est = build_normal_estimator(0, base=cfg.normal_base)
    enc_coarse = FeatureEncoder(32, mid=cfg.feature_mid)
    enc_fine = FeatureEncoder(16, mid=cfg.feature_mid)
    fld = ImplicitField()
    modules = {
        "normal_front": est.front,
        "normal_back": est.back,
        "enc_coarse": enc_coarse,
        "enc_fine": enc_fine,
        "field": fld,
    }
    for prefix, module in modules.items():
        state = {
            name[len(prefix) + 1 :]: torch.from_numpy(arr)
            for name, arr in arrays.items()
            if name.startswith(f"{prefix}.")
        }
        module.load_state_dict(state)
    return GeoCheckpoint(
        est=est,
        enc_coarse=enc_coarse,
        enc_fine=enc_fine,
        field=fld,
        config=header["config"],
        meta=header["meta"],
    )


def _record_back_input(
    hal: StageCheckpoint | None, manifest: DatasetManifest, record: dict, mode: str
) -> np.ndarray:
    front = load_view(manifest, record, "front")
    if mode == "front":
        return front.rgb
    if hal is None:
        raise ConfigError("back_input 'dah' needs a hallucinator checkpoint")
    return synthesize_back_view(hal, front)


def train_geometry(
    target: DatasetManifest,
    hal: StageCheckpoint | None,
    config: GeoTrainConfig,
) -> GeoCheckpoint:
    """Train normal estimators, then the dual-resolution occupancy field."""
    records = target.records("train")
    if not records:
        raise ConfigError("target corpus has no training records")

    est = build_normal_estimator(derive_seed(config.seed, "geo-normal-init", 0), config.normal_base)
    front_samples = []
    back_samples = []
    back_inputs = []
    for record in records:
        front = load_view(target, record, "front")
        gt_front = load_normal16(target.resolve(record["front"]["normal"]))
        gt_back = load_normal16(target.resolve(record["back"]["normal"]))
        mask_f = front.part_seg > 0
        back_seg = load_view(target, record, "back").part_seg
        back_img = _record_back_input(hal, target, record, config.back_input)
        front_samples.append((front.rgb, gt_front, mask_f))
        back_samples.append((back_img, gt_back, back_seg > 0))
        back_inputs.append(back_img)

    hist_f = train_normal_net(
        est.front,
        front_samples,
        config.normal_steps,
        lr=config.normal_lr,
        batch_size=config.normal_batch,
        seed=derive_seed(config.seed, "geo-normal-front", 0),
        max_nonfinite=config.max_nonfinite,
    )
    hist_b = train_normal_net(
        est.back,
        back_samples,
        config.normal_steps,
        lr=config.normal_lr,
        batch_size=config.normal_batch,
        seed=derive_seed(config.seed, "geo-normal-back", 0),
        max_nonfinite=config.max_nonfinite,
    )

    # Frozen normal nets: precompute input stacks once.
    stacks = []
    cameras = []
    occ = []
    for record, back_img in zip(records, back_inputs):
        front = load_view(target, record, "front")
        n_f, n_b = estimate_normals(est, front.rgb, back_img)
        stacks.append(build_input_stack(front.rgb, n_f, n_b))
        cameras.append(front.camera)
        pts, labels = target.load_occupancy(record["scene_id"])
        occ.append((pts.astype(np.float64), labels.astype(np.float32)))

    torch.manual_seed(derive_seed(config.seed, "geo-enc-init", 0))
    enc_coarse = FeatureEncoder(32, mid=config.feature_mid)
    enc_fine = FeatureEncoder(16, mid=config.feature_mid)
    fld = build_field(derive_seed(config.seed, "geo-field-init", 0))

    params = (
        list(enc_coarse.parameters())
        + list(enc_fine.parameters())
        + list(fld.parameters())
    )
    opt = torch.optim.Adam(params, lr=config.lr)
    rng = rng_for(config.seed, "geo-occupancy")
    history = []
    bad = 0
    n_epochs = config.epochs_coarse + config.epochs_joint
    decay1 = max(int(n_epochs * 0.7), 1)
    decay2 = max(int(n_epochs * 0.9), 1)
    for epoch in range(n_epochs):
        joint = epoch >= config.epochs_coarse
        lr_now = config.lr * (0.3 if epoch >= decay1 else 1.0) * (0.33 if epoch >= decay2 else 1.0)
        for group in opt.param_groups:
            group["lr"] = lr_now
        order = rng.permutation(len(records))
        epoch_losses = []
        for ri in order:
            pts, labels = occ[ri]
            idx = rng.integers(0, len(pts), size=config.points_per_step)
            batch_pts = pts[idx]
            batch_labels = torch.from_numpy(labels[idx])
            fmap_c, fmap_f = encode_features(enc_coarse, enc_fine, stacks[ri])
            emb = point_embedding(fld, fmap_c, batch_pts, cameras[ri])
            p_c = fld.coarse_prob(emb)
            loss = F.binary_cross_entropy(p_c, batch_labels)
            if joint:
                emb_fine = emb.detach() if config.joint_mode == "frozen" else emb
                p = occupancy_fine(
                    fld, fmap_f, fmap_c, batch_pts, cameras[ri], embedding=emb_fine
                )
                fine_bce = F.binary_cross_entropy(p, batch_labels)
                loss = fine_bce if config.joint_mode == "frozen" else loss + fine_bce
            opt.zero_grad()
            loss.backward()
            if config.grad_clip > 0:
                torch.nn.utils.clip_grad_norm_(params, config.grad_clip)
            opt.step()
            bad = 0 if torch.isfinite(loss) else bad + 1
            if bad >= config.max_nonfinite:
                raise DivergenceError(
                    f"occupancy training: {bad} consecutive non-finite steps"
                )
            epoch_losses.append(float(loss.detach()))
        history.append([epoch, float(np.mean(epoch_losses)), int(joint)])

    for m in (est.front, est.back, enc_coarse, enc_fine, fld):
        m.eval()
    return GeoCheckpoint(
        est=est,
        enc_coarse=enc_coarse,
        enc_fine=enc_fine,
        field=fld,
        config=config.to_dict(),
        meta={
            "normal_loss_front": hist_f,
            "normal_loss_back": hist_b,
            "occupancy_loss": history,
            "n_records": len(records),
        },
    )


def field_grid_values(
    geo: GeoCheckpoint,
    front_img: np.ndarray,
    back_img: np.ndarray,
    camera: CameraModel,
    resolution: int,
    chunk: int = 65536,
) -> np.ndarray:
    """Fine occupancy probabilities on an R^3 grid over [-1, 1]^3."""
    n_f, n_b = estimate_normals(geo.est, front_img, back_img)
    stack = build_input_stack(front_img, n_f, n_b)
    with torch.no_grad():
        fmap_c, fmap_f = encode_features(geo.enc_coarse, geo.enc_fine, stack)
        coords = grid_coordinates(resolution)
        xs, ys, zs = np.meshgrid(coords, coords, coords, indexing="ij")
        pts = np.stack([xs.ravel(), ys.ravel(), zs.ravel()], axis=1)
        out = np.empty(len(pts), dtype=np.float64)
        for start in range(0, len(pts), chunk):
            sl = slice(start, min(start + chunk, len(pts)))
            out[sl] = occupancy_fine(geo.field, fmap_f, fmap_c, pts[sl], camera).numpy()
    return out.reshape(resolution, resolution, resolution)


def extract_mesh(
    geo: GeoCheckpoint,
    front_img: np.ndarray,
    back_img: np.ndarray,
    camera: CameraModel,
    resolution: int = 64,
    iso: float = 0.5,
) -> TriangleMesh:
    """Marching-cubes surface of the fine occupancy field.

    A field with no iso crossing yields an empty mesh with a warning
    rather than an error.
    """
    if resolution < 8:
        raise ConfigError(f"grid resolution must be at least 8, got {resolution}")
    values = field_grid_values(geo, front_img, back_img, camera, resolution)
    try:
        mesh = marching_cubes(values, level=iso)
    except EmptyMesh:
        log.warning("occupancy field has no iso crossing; returning an empty mesh")
        return TriangleMesh(
            vertices=np.zeros((0, 3), dtype=np.float64),
            faces=np.zeros((0, 3), dtype=np.int64),
        )
    mesh.vertex_normals = mesh.compute_vertex_normals()
    return mesh
