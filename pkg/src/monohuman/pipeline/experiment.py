"""Full-experiment orchestration: train, reconstruct, evaluate, report.

The pipeline is eight resumable stages: corpus generation, the four
hallucinator stages, geometry training, texture training, and a final
stage that reconstructs every held-out target scene and scores the
results. Each stage appends a ledger record; a rerun over the same run
root skips stages whose record and output artifacts are both present.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from ..errors import ConfigError, EmptyMesh
from ..evaluation.report import EvalConfig, evaluate_pipeline
from ..geometry.marching import grid_coordinates, marching_cubes
from ..geometry.mesh import TriangleMesh
from ..geometry.training import (
    GeoCheckpoint,
    field_grid_values,
    load_geo_checkpoint,
    save_geo_checkpoint,
    train_geometry,
)
from ..hallucinator.checkpoint import StageCheckpoint, load_checkpoint, save_checkpoint
from ..hallucinator.data import load_view
from ..hallucinator.stages import (
    eval_backview_l1,
    load_pseudo_pairs,
    save_pseudo_pairs,
    stage_pose_alignment,
    stage_semantic_alignment,
    stage_style,
    synthesize_back_view,
    train_vanilla,
)
from ..synthcorpus.body import body_sdf
from ..synthcorpus.corpus import DatasetManifest, generate_corpus
from ..texture.networks import build_texture_nets
from ..texture.refine import refine_texture
from ..texture.training import (
    TexCheckpoint,
    load_tex_checkpoint,
    save_tex_checkpoint,
    train_texture,
)
from ..texture.visibility import project_colors
from .config import STAGE_NAMES, ExperimentConfig
from .ledger import LedgerRecord, RunLedger

log = logging.getLogger(__name__)

REPORT_KEY_ORDER_NOTE = "keys sorted; rerun with the same config is byte-identical"


def resolve_workers(requested: int | None = None) -> int:
    """Worker count after applying the MONOHUMAN_THREADS cap."""
    cap = os.environ.get("MONOHUMAN_THREADS")
    workers = requested if requested is not None else (int(cap) if cap else 1)
    if cap:
        try:
            workers = min(workers, max(int(cap), 1))
        except ValueError as exc:
            raise ConfigError(f"MONOHUMAN_THREADS must be an integer, got {cap!r}") from exc
    return max(workers, 1)


@dataclass
class _RunContext:
    config: ExperimentConfig
    seeded: ExperimentConfig
    root: Path
    ledger: RunLedger
    workers: int

    def rel(self, key: str) -> str:
        return self.config.layout[key]

    def path(self, key: str) -> Path:
        return self.config.path(self.root, key)


def _load_manifests(ctx: _RunContext) -> tuple[DatasetManifest, DatasetManifest]:
    source = DatasetManifest.load(ctx.path("source_data") / "manifest.json")
    target = DatasetManifest.load(ctx.path("target_data") / "manifest.json")
    return source, target


def _stage_gen_data(ctx: _RunContext) -> tuple[list[str], list[str], dict]:
    generate_corpus(ctx.seeded.source_corpus, ctx.path("source_data"), workers=ctx.workers)
    generate_corpus(ctx.seeded.target_corpus, ctx.path("target_data"), workers=ctx.workers)
    return [], [ctx.rel("source_data"), ctx.rel("target_data"), ctx.rel("config")], {}


def _stage_hal_vanilla(ctx: _RunContext) -> tuple[list[str], list[str], dict]:
    source, _ = _load_manifests(ctx)
    ckpt = train_vanilla(source, ctx.seeded.hal)
    ctx.path("hal_vanilla").parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(str(ctx.path("hal_vanilla")), ckpt)
    return [ctx.rel("source_data")], [ctx.rel("hal_vanilla")], {}


def _stage_hal_sa(ctx: _RunContext) -> tuple[list[str], list[str], dict]:
    source, _ = _load_manifests(ctx)
    vanilla = load_checkpoint(str(ctx.path("hal_vanilla")))
    ckpt, pairs = stage_semantic_alignment(vanilla, source, ctx.seeded.hal)
    save_checkpoint(str(ctx.path("hal_sa")), ckpt)
    save_pseudo_pairs(str(ctx.path("pairs_sa")), pairs)
    return (
        [ctx.rel("hal_vanilla"), ctx.rel("source_data")],
        [ctx.rel("hal_sa"), ctx.rel("pairs_sa")],
        {"n_pairs": len(pairs)},
    )


def _stage_hal_pa(ctx: _RunContext) -> tuple[list[str], list[str], dict]:
    source, target = _load_manifests(ctx)
    vanilla = load_checkpoint(str(ctx.path("hal_vanilla")))
    sa = load_checkpoint(str(ctx.path("hal_sa")))
    sa_pairs = load_pseudo_pairs(str(ctx.path("pairs_sa")), source=source)
    ckpt, pairs = stage_pose_alignment(sa, sa_pairs, source, target, vanilla, ctx.seeded.hal)
    save_checkpoint(str(ctx.path("hal_pa")), ckpt)
    save_pseudo_pairs(str(ctx.path("pairs_pa")), pairs)
    return (
        [ctx.rel("hal_sa"), ctx.rel("pairs_sa"), ctx.rel("hal_vanilla"), ctx.rel("target_data")],
        [ctx.rel("hal_pa"), ctx.rel("pairs_pa")],
        {"n_pairs": len(pairs)},
    )


def _stage_hal_style(ctx: _RunContext) -> tuple[list[str], list[str], dict]:
    source, target = _load_manifests(ctx)
    pa = load_checkpoint(str(ctx.path("hal_pa")))
    pa_pairs = load_pseudo_pairs(
        str(ctx.path("pairs_pa")), source=source, target=target, sigma=ctx.seeded.hal.heatmap_sigma
    )
    ckpt = stage_style(
        pa,
        target,
        ctx.seeded.hal,
        mode="st",
        pseudo_pairs=pa_pairs,
        source=source,
        aux_loss=ctx.seeded.aux_loss,
    )
    save_checkpoint(str(ctx.path("hal_style")), ckpt)
    l1 = eval_backview_l1(ckpt, target, split="test", sigma=ctx.seeded.hal.heatmap_sigma)
    return (
        [ctx.rel("hal_pa"), ctx.rel("pairs_pa"), ctx.rel("target_data")],
        [ctx.rel("hal_style")],
        {"backview_l1_test": l1},
    )


def _stage_train_geo(ctx: _RunContext) -> tuple[list[str], list[str], dict]:
    _, target = _load_manifests(ctx)
    hal = load_checkpoint(str(ctx.path("hal_style")))
    geo = train_geometry(target, hal, ctx.seeded.geo)
    save_geo_checkpoint(str(ctx.path("geometry")), geo)
    return (
        [ctx.rel("hal_style"), ctx.rel("target_data")],
        [ctx.rel("geometry")],
        {"n_records": geo.meta.get("n_records")},
    )


def _stage_train_tex(ctx: _RunContext) -> tuple[list[str], list[str], dict]:
    _, target = _load_manifests(ctx)
    cfg = ctx.seeded.tex
    hal = load_checkpoint(str(ctx.path("hal_style"))) if cfg.back_source == "hal" else None
    geo = (
        load_geo_checkpoint(str(ctx.path("geometry"))) if cfg.use_predicted_meshes else None
    )
    extractor, refiner = build_texture_nets(
        cfg.seed, base=cfg.base, feature_channels=cfg.feature_channels,
        final_activation=cfg.final_activation,
    )
    tex = train_texture(extractor, refiner, target, hal, cfg, geo=geo)
    save_tex_checkpoint(str(ctx.path("texture")), tex)
    inputs = [ctx.rel("target_data")]
    if hal is not None:
        inputs.insert(0, ctx.rel("hal_style"))
    if geo is not None:
        inputs.append(ctx.rel("geometry"))
    return inputs, [ctx.rel("texture")], {"n_records": tex.meta.get("n_train_records")}


def reconstruct_record(
    hal: StageCheckpoint | None,
    geo: GeoCheckpoint,
    tex: TexCheckpoint | None,
    target: DatasetManifest,
    record: dict,
    grid_resolution: int = 64,
) -> tuple[TriangleMesh, np.ndarray]:
    """Colored mesh plus the raw occupancy grid for one target record.

    The single front view drives everything: the hallucinated back view
    feeds both the normal estimator's back branch and the dual-view
    texture projection. Without a hallucinator the front view stands in
    for the back (the reroute control arm). Without texture networks the
    mesh keeps its projected colors.
    """
    front = load_view(target, record, "front")
    back_img = front.rgb if hal is None else synthesize_back_view(hal, front)
    values = field_grid_values(geo, front.rgb, back_img, front.camera, grid_resolution)
    try:
        mesh = marching_cubes(values, level=0.5)
    except EmptyMesh:
        log.warning("scene %s: occupancy field has no 0.5 crossing", record["scene_id"])
        return (
            TriangleMesh(
                vertices=np.zeros((0, 3), dtype=np.float64),
                faces=np.zeros((0, 3), dtype=np.int64),
            ),
            values,
        )
    mesh.vertex_normals = mesh.compute_vertex_normals()
    colors = project_colors(mesh, front.rgb, back_img, front.camera)
    if tex is None:
        mesh.vertex_colors = colors.colors.astype(np.float64)
    else:
        refined = refine_texture(tex.extractor, tex.refiner, colors, front.rgb, back_img)
        mesh.vertex_colors = refined.astype(np.float64)
    return mesh, values


def _reference_record(target: DatasetManifest, scene_id: str, split: str) -> dict:
    records = [r for r in target.records(split) if r["scene_id"] == scene_id]
    if not records:
        raise ConfigError(f"scene {scene_id} has no {split} records")
    return min(records, key=lambda r: r.get("yaw_deg", 0.0))


def _stage_reconstruct_evaluate(ctx: _RunContext) -> tuple[list[str], list[str], dict]:
    _, target = _load_manifests(ctx)
    hal = load_checkpoint(str(ctx.path("hal_style")))
    geo = load_geo_checkpoint(str(ctx.path("geometry")))
    tex = load_tex_checkpoint(str(ctx.path("texture")))
    pred_dir = ctx.path("pred")
    pred_dir.mkdir(parents=True, exist_ok=True)

    resolution = ctx.config.grid_resolution
    coords = grid_coordinates(resolution)
    grid = np.stack(np.meshgrid(coords, coords, coords, indexing="ij"), axis=-1).reshape(-1, 3)
    scene_ids = sorted({r["scene_id"] for r in target.records("test")})
    iou_per_scene: dict[str, float] = {}
    for sid in scene_ids:
        record = _reference_record(target, sid, "test")
        mesh, values = reconstruct_record(hal, geo, tex, target, record, resolution)
        scene = target.scene(sid)
        gt_inside = body_sdf(scene, grid) < 0.0
        pred_inside = values.reshape(-1) > 0.5
        union = np.logical_or(pred_inside, gt_inside).sum()
        inter = np.logical_and(pred_inside, gt_inside).sum()
        iou_per_scene[sid] = float(inter / union) if union else 1.0
        if mesh.num_faces:
            mesh.save_ply(pred_dir / f"{sid}.ply")

    eval_config = EvalConfig(
        grid_resolution=resolution,
        n_samples=ctx.config.metric_samples,
        image_size=ctx.config.target_corpus.image_size,
        seed=ctx.config.metric_seed,
    )
    report = evaluate_pipeline(
        pred_dir,
        target,
        config=eval_config,
        out_csv=ctx.path("metrics_csv"),
        workers=ctx.workers,
    )
    backview_l1 = eval_backview_l1(hal, target, split="test", sigma=ctx.seeded.hal.heatmap_sigma)
    payload = {
        "format_version": 1,
        "config_hash": ctx.config.config_hash(),
        "stage_seeds": ctx.config.stage_seeds(),
        "grid_resolution": resolution,
        "voxel_iou": {
            "per_scene": iou_per_scene,
            "mean": float(np.mean(list(iou_per_scene.values()))) if iou_per_scene else 0.0,
        },
        "backview_l1_test": backview_l1,
        "evaluation": report.to_dict(),
    }
    ctx.path("report").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return (
        [
            ctx.rel("hal_style"),
            ctx.rel("geometry"),
            ctx.rel("texture"),
            ctx.rel("target_data"),
        ],
        [ctx.rel("pred"), ctx.rel("report"), ctx.rel("metrics_csv")],
        {"voxel_iou_mean": payload["voxel_iou"]["mean"], "backview_l1_test": backview_l1},
    )


_STAGE_FNS = {
    "gen-data": _stage_gen_data,
    "train-hal-vanilla": _stage_hal_vanilla,
    "train-hal-sa": _stage_hal_sa,
    "train-hal-pa": _stage_hal_pa,
    "train-hal-style": _stage_hal_style,
    "train-geo": _stage_train_geo,
    "train-tex": _stage_train_tex,
    "reconstruct-evaluate": _stage_reconstruct_evaluate,
}


def stage_plan(config: ExperimentConfig) -> list[str]:
    """Human-readable stage invocations, in execution order."""
    h = config.config_hash()[:12]
    return [f"{name} [seed={config.stage_seed(name)}, config={h}]" for name in STAGE_NAMES]


def _stage_complete(ctx: _RunContext, name: str, outputs_hint: list[str]) -> bool:
    record = ctx.ledger.find(name, ctx.config.config_hash())
    if record is None:
        return False
    outs = record.outputs or outputs_hint
    return all((ctx.root / rel).exists() for rel in outs)


_OUTPUT_HINTS = {
    "gen-data": ["source_data", "target_data"],
    "train-hal-vanilla": ["hal_vanilla"],
    "train-hal-sa": ["hal_sa", "pairs_sa"],
    "train-hal-pa": ["hal_pa", "pairs_pa"],
    "train-hal-style": ["hal_style"],
    "train-geo": ["geometry"],
    "train-tex": ["texture"],
    "reconstruct-evaluate": ["pred", "report", "metrics_csv"],
}


def run_full_experiment(
    config: ExperimentConfig,
    root: Path | str,
    dry_run: bool = False,
    workers: int | None = None,
) -> RunLedger:
    """Execute (or resume) every pipeline stage under the run root."""
    root = Path(root)
    if dry_run:
        for line in stage_plan(config):
            log.info("dry-run: %s", line)
        return RunLedger(root / config.layout["ledger"])

    workers = resolve_workers(workers)
    torch.set_num_threads(workers)
    root.mkdir(parents=True, exist_ok=True)
    config.save(config.path(root, "config"))
    ledger = RunLedger.load(root / config.layout["ledger"])
    ctx = _RunContext(
        config=config, seeded=config.seeded(), root=root, ledger=ledger, workers=workers
    )
    for name in STAGE_NAMES:
        hints = [config.layout[k] for k in _OUTPUT_HINTS[name]]
        if _stage_complete(ctx, name, hints):
            log.info("stage %s already complete; skipping", name)
            continue
        log.info("stage %s starting", name)
        t0 = time.perf_counter()
        inputs, outputs, extra = _STAGE_FNS[name](ctx)
        ledger.append(
            LedgerRecord(
                command=name,
                config_hash=config.config_hash(),
                inputs=inputs,
                outputs=outputs,
                wall_time_s=round(time.perf_counter() - t0, 3),
                seed=config.stage_seed(name),
                extra=extra,
            )
        )
        log.info("stage %s done in %.1fs", name, time.perf_counter() - t0)
    return ledger
