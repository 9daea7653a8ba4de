"""Texture network training, evaluation, and checkpointing."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np
import torch

from ..archive import load_archive, save_archive
from ..errors import ConfigError, DivergenceError
from ..geometry.marching import grid_coordinates, marching_cubes
from ..geometry.mesh import TriangleMesh
from ..hallucinator.checkpoint import StageCheckpoint
from ..hallucinator.data import ViewData, load_view
from ..hallucinator.stages import synthesize_back_view
from ..seeding import rng_for
from ..synthcorpus.body import HumanoidScene, body_sdf, body_sdf_gradient
from ..synthcorpus.corpus import DatasetManifest
from ..synthcorpus.patterns import surface_color
from .networks import TextureFeatureExtractor, VertexRefiner, build_texture_nets
from .refine import _image_tensor, refine_texture, refiner_inputs
from .visibility import VertexColorField, project_colors

logger = logging.getLogger(__name__)

TEX_MAGIC = b"MHTX"
TEX_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TexTrainConfig:
    """Texture training settings; epoch count and lr follow the protocol."""

    epochs: int = 20
    lr: float = 1e-4
    verts_per_scene: int = 1024
    grid_resolution: int = 64
    back_source: str = "hal"  # "hal" = synthesized back view, "gt" = stored render
    use_predicted_meshes: bool = False
    base: int = 64
    feature_channels: int = 128
    final_activation: str = "sine"
    heatmap_sigma: float = 4.0
    seed: int = 0
    max_nonfinite: int = 50

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if self.back_source not in ("hal", "gt"):
            raise ConfigError(f"unknown back_source {self.back_source!r}")
        if self.final_activation not in ("sine", "identity"):
            raise ConfigError(f"unknown final activation {self.final_activation!r}")
        if self.grid_resolution < 8:
            raise ConfigError("grid_resolution too small")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TexTrainConfig":
        return cls(**d)


@dataclass
class TexCheckpoint:
    extractor: TextureFeatureExtractor
    refiner: VertexRefiner
    config: TexTrainConfig
    meta: dict = field(default_factory=dict)


def save_tex_checkpoint(path: str, ckpt: TexCheckpoint) -> None:
    header = {
        "format_version": TEX_FORMAT_VERSION,
        "config": ckpt.config.to_dict(),
        "meta": ckpt.meta,
    }
    arrays = {}
    for name, tensor in ckpt.extractor.state_dict().items():
        arrays[f"extractor.{name}"] = tensor.numpy()
    for name, tensor in ckpt.refiner.state_dict().items():
        arrays[f"refiner.{name}"] = tensor.numpy()
    save_archive(path, TEX_MAGIC, header, arrays)


def load_tex_checkpoint(path: str) -> TexCheckpoint:
    header, arrays = load_archive(path, TEX_MAGIC)
    config = TexTrainConfig.from_dict(header["config"])
    extractor, refiner = build_texture_nets(
        0,
        base=config.base,
        feature_channels=config.feature_channels,
        final_activation=config.final_activation,
    )
    for module, prefix in ((extractor, "extractor."), (refiner, "refiner.")):
        state = {
            name[len(prefix):]: torch.from_numpy(arr)
            for name, arr in arrays.items()
            if name.startswith(prefix)
        }
        module.load_state_dict(state)
    return TexCheckpoint(extractor=extractor, refiner=refiner, config=config, meta=header["meta"])


def project_to_surface(scene: HumanoidScene, points: np.ndarray, steps: int = 2) -> np.ndarray:
    """Pull points onto the zero level set by damped Newton steps."""
    p = np.asarray(points, dtype=np.float64).copy()
    for _ in range(steps):
        s = body_sdf(scene, p)
        g = body_sdf_gradient(scene, p)
        gg = np.maximum((g * g).sum(axis=1), 1e-8)
        p -= (s / gg)[:, None] * g
    return p


def gt_vertex_colors(scene: HumanoidScene, vertices: np.ndarray) -> np.ndarray:
    """Ground-truth supervision colors at mesh vertices.

    Vertices are projected to the exact surface first so the sampled
    pattern matches what the renderer shows at that spot.
    """
    on_surface = project_to_surface(scene, vertices)
    return surface_color(scene, on_surface).astype(np.float32)


def gt_scene_mesh(scene: HumanoidScene, resolution: int = 64) -> TriangleMesh:
    """Mesh of the scene's exact occupancy at the given grid resolution."""
    c = grid_coordinates(resolution)
    x, y, z = np.meshgrid(c, c, c, indexing="ij")
    pts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    inside = -body_sdf(scene, pts).reshape(resolution, resolution, resolution)
    mesh = marching_cubes(inside, level=0.0)
    mesh.vertex_normals = mesh.compute_vertex_normals()
    return mesh


@dataclass
class _SceneSample:
    """One record's precomputed texture-training problem."""

    field: VertexColorField
    gt_colors: torch.Tensor
    front_t: torch.Tensor
    back_t: torch.Tensor


def _subfield(f: VertexColorField, idx: np.ndarray) -> VertexColorField:
    return VertexColorField(
        colors=f.colors[idx],
        vis_front=f.vis_front[idx],
        vis_back=f.vis_back[idx],
        uv_back=f.uv_back[idx],
        uv_front=f.uv_front[idx],
    )


def _back_image(
    front: ViewData, record: dict, manifest: DatasetManifest, hal, config: TexTrainConfig
) -> np.ndarray:
    if config.back_source == "hal":
        if hal is None:
            raise ConfigError("back_source 'hal' needs a hallucinator checkpoint")
        return synthesize_back_view(hal, front, sigma=config.heatmap_sigma)
    return load_view(manifest, record, "back").rgb


def prepare_scene_samples(
    target: DatasetManifest,
    hal: StageCheckpoint | None,
    config: TexTrainConfig,
    split: str,
    geo=None,
) -> list[_SceneSample]:
    """Precompute meshes, projections, and supervision for one split."""
    from ..geometry.training import extract_mesh  # local import to avoid a cycle

    samples = []
    mesh_cache: dict[str, TriangleMesh] = {}
    for record in target.records(split):
        front = load_view(target, record, "front")
        back_img = _back_image(front, record, target, hal, config)
        scene = target.scene(record["scene_id"])
        if config.use_predicted_meshes:
            if geo is None:
                raise ConfigError("use_predicted_meshes needs a geometry checkpoint")
            mesh = extract_mesh(geo, front.rgb, back_img, front.camera, config.grid_resolution)
            if mesh.num_faces == 0:
                logger.warning("skipping %s: empty predicted mesh", record["scene_id"])
                continue
            mesh.vertex_normals = mesh.compute_vertex_normals()
        else:
            key = record["scene_id"]
            if key not in mesh_cache:
                mesh_cache[key] = gt_scene_mesh(scene, config.grid_resolution)
            mesh = mesh_cache[key]
        fld = project_colors(mesh, front.rgb, back_img, front.camera)
        samples.append(
            _SceneSample(
                field=fld,
                gt_colors=torch.from_numpy(gt_vertex_colors(scene, mesh.vertices)),
                front_t=_image_tensor(front.rgb),
                back_t=_image_tensor(back_img),
            )
        )
    return samples


def train_texture(
    extractor: TextureFeatureExtractor,
    refiner: VertexRefiner,
    target: DatasetManifest,
    hal: StageCheckpoint | None,
    config: TexTrainConfig,
    geo=None,
    samples: list[_SceneSample] | None = None,
) -> TexCheckpoint:
    """Train extractor and refiner with per-vertex L1 supervision.

    Each step visits one training record, subsamples its vertices, and
    minimizes L1 between refined and ground-truth colors. Both networks
    are trained in place. Precomputed training samples may be passed in
    when several variants train on identical projections.
    """
    if samples is None:
        samples = prepare_scene_samples(target, hal, config, "train", geo=geo)
    if not samples:
        raise ConfigError("no usable training records for texture")
    opt = torch.optim.Adam(
        list(extractor.parameters()) + list(refiner.parameters()), lr=config.lr
    )
    rng = rng_for(config.seed, "tex-train")
    extractor.train()
    refiner.train()
    history = []
    nonfinite = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(samples))
        losses = []
        for si in order:
            s = samples[si]
            n = s.gt_colors.shape[0]
            take = min(config.verts_per_scene, n)
            idx = rng.choice(n, size=take, replace=False)
            rows = refiner_inputs(extractor, _subfield(s.field, idx), s.front_t, s.back_t)
            loss = (refiner(rows) - s.gt_colors[idx]).abs().mean()
            if not torch.isfinite(loss):
                nonfinite += 1
                if nonfinite >= config.max_nonfinite:
                    raise DivergenceError(
                        f"texture loss non-finite for {nonfinite} consecutive steps"
                    )
                opt.zero_grad()
                continue
            nonfinite = 0
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(float(loss.detach()))
        mean = float(np.mean(losses)) if losses else float("nan")
        history.append([epoch, mean])
        logger.info("texture epoch %d: L1 %.4f", epoch, mean)
    extractor.eval()
    refiner.eval()
    return TexCheckpoint(
        extractor=extractor,
        refiner=refiner,
        config=config,
        meta={"history": history, "n_train_records": len(samples)},
    )


def eval_texture_l1(
    tex: TexCheckpoint,
    target: DatasetManifest,
    hal: StageCheckpoint | None,
    split: str = "test",
    mode: str = "refined",
    samples: list[_SceneSample] | None = None,
) -> float:
    """Mean held-out per-vertex L1 against ground-truth surface colors.

    mode "refined" scores the trained networks; "projected" scores the
    dual-view initialization alone (no network).
    """
    if mode not in ("refined", "projected"):
        raise ConfigError(f"unknown eval mode {mode!r}")
    if samples is None:
        samples = prepare_scene_samples(target, hal, tex.config, split)
    errs = []
    for s in samples:
        if mode == "projected":
            pred = torch.from_numpy(s.field.colors)
        else:
            front = s.front_t[0].numpy().transpose(1, 2, 0)
            back = s.back_t[0].numpy().transpose(1, 2, 0)
            pred = torch.from_numpy(refine_texture(tex.extractor, tex.refiner, s.field, front, back))
        errs.append(float((pred - s.gt_colors).abs().mean()))
    return float(np.mean(errs))
