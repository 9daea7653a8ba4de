"""Ablation studies: the alignment curriculum and texture completion.

Both studies train every variant over several seeds, score held-out
target scenes, and emit a table (JSON plus aligned text) with mean and
standard deviation per row. Per-variant results are also appended to
the run ledger, so the table can be rebuilt from stored records without
retraining.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..errors import ConfigError
from ..evaluation.embedding import proxy_perceptual_distance
from ..evaluation.metrics2d import ssim
from ..evaluation.report import eval_camera, render_for_eval
from ..geometry.mesh import TriangleMesh
from ..hallucinator.checkpoint import StageCheckpoint, load_checkpoint, save_checkpoint
from ..hallucinator.data import load_view
from ..hallucinator.stages import (
    HalTrainConfig,
    load_pseudo_pairs,
    save_pseudo_pairs,
    source_pairs_for_style,
    stage_pose_alignment,
    stage_semantic_alignment,
    stage_style,
    synthesize_back_view,
    train_vanilla,
)
from ..seeding import derive_seed
from ..synthcorpus.corpus import CorpusConfig, DatasetManifest, generate_corpus
from ..texture.networks import build_texture_nets
from ..texture.refine import refine_texture
from ..texture.training import (
    TexCheckpoint,
    TexTrainConfig,
    eval_texture_l1,
    gt_scene_mesh,
    prepare_scene_samples,
    save_tex_checkpoint,
    train_texture,
)
from .experiment import resolve_workers
from .ledger import LedgerRecord, RunLedger

DDA_ROWS = (
    ("ft", "FT"),
    ("ft_sa", "FT+SA"),
    ("ft_sa_pa", "FT+SA+PA"),
    ("st", "ST"),
    ("st_sa", "ST+SA"),
    ("st_sa_pa", "ST+SA+PA"),
)

# (better, worse): every curriculum addition should lower test L1, and a
# style-stage row should beat its finetune-only counterpart.
DDA_EXPECTED_BETTER = (
    ("ft_sa", "ft"),
    ("ft_sa_pa", "ft_sa"),
    ("st_sa", "st"),
    ("st_sa_pa", "st_sa"),
    ("st", "ft"),
    ("st_sa", "ft_sa"),
    ("st_sa_pa", "ft_sa_pa"),
)

TEX_ROWS = (
    ("projection_only", "dual-view projection only"),
    ("refine_identity", "refinement, identity head"),
    ("refine_sine", "refinement, sine head (full)"),
)


def _dda_source_corpus() -> CorpusConfig:
    return CorpusConfig(kind="source", n_scenes=160, seed=11)


def _dda_target_corpus() -> CorpusConfig:
    return CorpusConfig(
        kind="target",
        n_scenes=24,
        seed=12,
        target_yaws_deg=(0, 180),
        occ_surface=0,
        occ_uniform=0,
    )


def _dda_hal_config() -> HalTrainConfig:
    return HalTrainConfig(steps_vanilla=900, steps_sa=300, steps_pa=300, steps_style=400)


@dataclass(frozen=True)
class DdaAblationConfig:
    """Corpora, training budget, and seeds for the curriculum study."""

    source_corpus: CorpusConfig = field(default_factory=_dda_source_corpus)
    target_corpus: CorpusConfig = field(default_factory=_dda_target_corpus)
    hal: HalTrainConfig = field(default_factory=_dda_hal_config)
    seeds: tuple[int, ...] = (0, 1, 2)
    aux_loss: str | None = None

    def __post_init__(self):
        if len(self.seeds) < 3:
            raise ConfigError("the curriculum study needs n_seeds >= 3")
        if self.aux_loss not in (None, "mmd", "coral"):
            raise ConfigError(f"aux_loss must be None, 'mmd' or 'coral', got {self.aux_loss!r}")

    def to_dict(self) -> dict:
        return {
            "source_corpus": self.source_corpus.to_dict(),
            "target_corpus": self.target_corpus.to_dict(),
            "hal": self.hal.to_dict(),
            "seeds": list(self.seeds),
            "aux_loss": self.aux_loss,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DdaAblationConfig":
        d = dict(d)
        return cls(
            source_corpus=CorpusConfig.from_dict(d.pop("source_corpus")),
            target_corpus=CorpusConfig.from_dict(d.pop("target_corpus")),
            hal=HalTrainConfig.from_dict(d.pop("hal")),
            seeds=tuple(d.pop("seeds")),
            **d,
        )


def _ensure_corpus(config: CorpusConfig, out_dir: Path, workers: int) -> DatasetManifest:
    manifest = out_dir / "manifest.json"
    if manifest.exists():
        return DatasetManifest.load(manifest)
    return generate_corpus(config, out_dir, workers=workers)


def backview_metrics(
    ckpt: StageCheckpoint, target: DatasetManifest, sigma: float = 4.0
) -> dict[str, float]:
    """Held-out back-view L1, SSIM, and proxy perceptual distance."""
    synth, real = [], []
    for record in target.records("test"):
        front = load_view(target, record, "front")
        synth.append(synthesize_back_view(ckpt, front, sigma=sigma))
        real.append(load_view(target, record, "back").rgb)
    if not synth:
        raise ConfigError("target corpus has no test records")
    proxy, _jittered = proxy_perceptual_distance(np.stack(synth), np.stack(real))
    return {
        "l1": float(np.mean([np.abs(s - r).mean() for s, r in zip(synth, real)])),
        "ssim": float(np.mean([ssim(s, r) for s, r in zip(synth, real)])),
        "proxy": float(proxy),
    }


def _agg(values: list[float]) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    return {
        "mean": float(arr.mean()),
        "std": float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
        "per_seed": [float(v) for v in arr],
    }


def _build_table(rows: tuple, per_row_metrics: dict[str, list[dict]]) -> dict:
    table_rows = []
    for key, label in rows:
        entries = per_row_metrics[key]
        row = {"key": key, "label": label}
        for metric in entries[0]:
            row[metric] = _agg([e[metric] for e in entries])
        table_rows.append(row)
    return {"rows": table_rows}


def _format_table(table: dict, metrics: tuple[str, ...]) -> str:
    lines = []
    header = ["row".ljust(16)] + [m.ljust(22) for m in metrics]
    lines.append(" ".join(header).rstrip())
    for row in table["rows"]:
        cells = [row["label"].ljust(16)]
        for m in metrics:
            cells.append(f"{row[m]['mean']:.4f} +/- {row[m]['std']:.4f}".ljust(22))
        lines.append(" ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def _dda_row_checkpoint(
    row: str,
    shared: dict[str, object],
    target: DatasetManifest,
    source: DatasetManifest,
    cfg: HalTrainConfig,
    aux_loss: str | None,
) -> StageCheckpoint:
    parents = {"ft": "vanilla", "ft_sa": "sa", "ft_sa_pa": "pa",
               "st": "vanilla", "st_sa": "sa", "st_sa_pa": "pa"}
    parent = shared[parents[row]]
    if row.startswith("ft"):
        return stage_style(parent, target, cfg, mode="ft", aux_loss=aux_loss)
    if row == "st":
        pairs = source_pairs_for_style(source, sigma=cfg.heatmap_sigma)
    elif row == "st_sa":
        pairs = shared["sa_pairs"]
    else:
        pairs = shared["pa_pairs"]
    return stage_style(
        parent, target, cfg, mode="st", pseudo_pairs=pairs, source=source, aux_loss=aux_loss
    )


def run_dda_ablation(
    config: DdaAblationConfig,
    root: Path | str,
    workers: int | None = None,
) -> dict:
    """Train all six curriculum variants per seed and tabulate them."""
    root = Path(root)
    workers = resolve_workers(workers)
    torch.set_num_threads(workers)
    root.mkdir(parents=True, exist_ok=True)
    ledger = RunLedger.load(root / "ledger.jsonl")
    config_hash = _hash_dict(config.to_dict())
    source = _ensure_corpus(config.source_corpus, root / "data" / "source", workers)
    target = _ensure_corpus(config.target_corpus, root / "data" / "target", workers)

    per_row: dict[str, list[dict]] = {key: [] for key, _ in DDA_ROWS}
    for seed in config.seeds:
        seed_dir = root / f"seed{seed}"
        seed_dir.mkdir(exist_ok=True)
        cfg = dataclasses.replace(config.hal, seed=derive_seed(seed, "dda-hal", 0))
        shared: dict[str, object] = {}

        def _shared_stage(name: str, builder, extra_outputs: tuple[str, ...] = ()):
            path = seed_dir / f"{name}.ckpt"
            record = ledger.find(f"dda:{name}:seed{seed}", config_hash)
            if record is not None and path.exists():
                return load_checkpoint(str(path))
            t0 = time.perf_counter()
            ckpt = builder()
            save_checkpoint(str(path), ckpt)
            outputs = [str(path.relative_to(root))]
            outputs += [str((seed_dir / rel).relative_to(root)) for rel in extra_outputs]
            ledger.append(
                LedgerRecord(
                    command=f"dda:{name}:seed{seed}",
                    config_hash=config_hash,
                    inputs=["data/source", "data/target"],
                    outputs=outputs,
                    wall_time_s=round(time.perf_counter() - t0, 3),
                    seed=cfg.seed,
                    extra={},
                )
            )
            return ckpt

        shared["vanilla"] = _shared_stage("vanilla", lambda: train_vanilla(source, cfg))

        def _build_sa():
            ckpt, pairs = stage_semantic_alignment(shared["vanilla"], source, cfg)
            save_pseudo_pairs(str(seed_dir / "pairs_sa"), pairs)
            return ckpt

        shared["sa"] = _shared_stage("sa", _build_sa, extra_outputs=("pairs_sa",))
        shared["sa_pairs"] = load_pseudo_pairs(
            str(seed_dir / "pairs_sa"), source=source, sigma=cfg.heatmap_sigma
        )

        def _build_pa():
            ckpt, pairs = stage_pose_alignment(
                shared["sa"], shared["sa_pairs"], source, target, shared["vanilla"], cfg
            )
            save_pseudo_pairs(str(seed_dir / "pairs_pa"), pairs)
            return ckpt

        shared["pa"] = _shared_stage("pa", _build_pa, extra_outputs=("pairs_pa",))
        shared["pa_pairs"] = load_pseudo_pairs(
            str(seed_dir / "pairs_pa"), source=source, target=target, sigma=cfg.heatmap_sigma
        )

        for row, _label in DDA_ROWS:
            command = f"dda:{row}:seed{seed}"
            path = seed_dir / f"{row}.ckpt"
            record = ledger.find(command, config_hash)
            if record is not None and path.exists() and "l1" in record.extra:
                per_row[row].append(dict(record.extra))
                continue
            t0 = time.perf_counter()
            ckpt = _dda_row_checkpoint(row, shared, target, source, cfg, config.aux_loss)
            save_checkpoint(str(path), ckpt)
            metrics = backview_metrics(ckpt, target, sigma=cfg.heatmap_sigma)
            per_row[row].append(metrics)
            ledger.append(
                LedgerRecord(
                    command=command,
                    config_hash=config_hash,
                    inputs=[str((seed_dir / f"{n}.ckpt").relative_to(root)) for n in ("vanilla", "sa", "pa")],
                    outputs=[str(path.relative_to(root))],
                    wall_time_s=round(time.perf_counter() - t0, 3),
                    seed=cfg.seed,
                    extra=metrics,
                )
            )

    table = _build_table(DDA_ROWS, per_row)
    means = {row["key"]: row["l1"]["mean"] for row in table["rows"]}
    inversions = [
        {"better": a, "worse": b, "observed": [means[a], means[b]]}
        for a, b in DDA_EXPECTED_BETTER
        if means[a] >= means[b]
    ]
    table["metric_note"] = "l1/proxy: lower is better; ssim: higher is better"
    table["inversions"] = inversions
    table["end_to_end"] = {
        "ft_mean_l1": means["ft"],
        "ft_sa_pa_mean_l1": means["ft_sa_pa"],
        "relative_improvement": (means["ft"] - means["ft_sa_pa"]) / means["ft"],
    }
    _write_table(root, table, ("l1", "ssim", "proxy"))
    return table


def _hash_dict(d: dict) -> str:
    import hashlib

    return hashlib.sha256(
        json.dumps(d, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()


def _write_table(root: Path, table: dict, metrics: tuple[str, ...]) -> None:
    (root / "table.json").write_text(
        json.dumps(table, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    (root / "table.txt").write_text(_format_table(table, metrics), encoding="utf-8")


def rebuild_dda_table(root: Path | str) -> dict:
    """Reconstruct the curriculum table purely from ledger records."""
    root = Path(root)
    ledger = RunLedger.load(root / "ledger.jsonl")
    per_row: dict[str, list[dict]] = {key: [] for key, _ in DDA_ROWS}
    for record in ledger.records:
        parts = record.command.split(":")
        if len(parts) == 3 and parts[0] == "dda" and parts[1] in per_row and "l1" in record.extra:
            per_row[parts[1]].append(dict(record.extra))
    if any(not v for v in per_row.values()):
        raise ConfigError("ledger does not cover all six curriculum rows")
    return _build_table(DDA_ROWS, per_row)


def _tex_target_corpus() -> CorpusConfig:
    return CorpusConfig(
        kind="target",
        n_scenes=24,
        seed=21,
        target_yaws_deg=(0,),
        occ_surface=0,
        occ_uniform=0,
    )


@dataclass(frozen=True)
class TexAblationConfig:
    """Corpus, texture budget, and seeds for the texture study.

    Stored ground-truth back views feed the projections so every row
    isolates the texture pathway from hallucination noise.
    """

    target_corpus: CorpusConfig = field(default_factory=_tex_target_corpus)
    tex: TexTrainConfig = field(default_factory=lambda: TexTrainConfig(back_source="gt"))
    seeds: tuple[int, ...] = (0, 1, 2)

    def __post_init__(self):
        if len(self.seeds) < 3:
            raise ConfigError("the texture study needs n_seeds >= 3")
        if self.tex.back_source != "gt":
            raise ConfigError("the texture study fixes back_source to 'gt'")

    def to_dict(self) -> dict:
        return {
            "target_corpus": self.target_corpus.to_dict(),
            "tex": self.tex.to_dict(),
            "seeds": list(self.seeds),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TexAblationConfig":
        d = dict(d)
        return cls(
            target_corpus=CorpusConfig.from_dict(d.pop("target_corpus")),
            tex=TexTrainConfig.from_dict(d.pop("tex")),
            seeds=tuple(d.pop("seeds")),
            **d,
        )


def _texture_render_ssim(
    tex: TexCheckpoint | None,
    samples: list,
    records: list[dict],
    target: DatasetManifest,
    mesh_cache: dict[str, TriangleMesh],
    grid_resolution: int,
    image_size: int,
) -> float:
    """Mean SSIM of yaw renders, predicted colors vs ground truth."""
    scores = []
    for record, s in zip(records, samples):
        sid = record["scene_id"]
        scene = target.scene(sid)
        if sid not in mesh_cache:
            mesh_cache[sid] = gt_scene_mesh(scene, grid_resolution)
        mesh = mesh_cache[sid]
        if tex is None:
            pred = s.field.colors.astype(np.float64)
        else:
            front = s.front_t[0].numpy().transpose(1, 2, 0)
            back = s.back_t[0].numpy().transpose(1, 2, 0)
            pred = refine_texture(tex.extractor, tex.refiner, s.field, front, back).astype(
                np.float64
            )
        cam = eval_camera(scene, image_size)
        mesh.vertex_colors = s.gt_colors.numpy().astype(np.float64)
        gt_renders = render_for_eval(mesh, cam)
        mesh.vertex_colors = pred
        pred_renders = render_for_eval(mesh, cam)
        scores.append(
            float(np.mean([ssim(p.rgb, g.rgb) for p, g in zip(pred_renders, gt_renders)]))
        )
    return float(np.mean(scores))


def run_texture_ablation(
    config: TexAblationConfig,
    root: Path | str,
    workers: int | None = None,
) -> dict:
    """Score projection-only, identity-head, and sine-head texture rows."""
    root = Path(root)
    workers = resolve_workers(workers)
    torch.set_num_threads(workers)
    root.mkdir(parents=True, exist_ok=True)
    ledger = RunLedger.load(root / "ledger.jsonl")
    config_hash = _hash_dict(config.to_dict())
    target = _ensure_corpus(config.target_corpus, root / "data" / "target", workers)

    train_samples = prepare_scene_samples(target, None, config.tex, "train")
    test_samples = prepare_scene_samples(target, None, config.tex, "test")
    test_records = target.records("test")
    mesh_cache: dict[str, TriangleMesh] = {}
    image_size = config.target_corpus.image_size

    def _metrics(tex: TexCheckpoint | None, mode: str) -> dict[str, float]:
        probe = tex
        if probe is None:
            extractor, refiner = build_texture_nets(0, base=config.tex.base,
                feature_channels=config.tex.feature_channels)
            probe = TexCheckpoint(extractor=extractor, refiner=refiner,
                                  config=config.tex, meta={})
        l1 = eval_texture_l1(probe, target, None, mode=mode, samples=test_samples)
        ssim_mean = _texture_render_ssim(
            tex, test_samples, test_records, target, mesh_cache,
            config.tex.grid_resolution, image_size,
        )
        return {"l1": l1, "ssim": ssim_mean}

    per_row: dict[str, list[dict]] = {key: [] for key, _ in TEX_ROWS}
    for seed in config.seeds:
        seed_dir = root / f"seed{seed}"
        seed_dir.mkdir(exist_ok=True)
        for row, _label in TEX_ROWS:
            command = f"tex:{row}:seed{seed}"
            record = ledger.find(command, config_hash)
            if record is not None and "l1" in record.extra:
                per_row[row].append(dict(record.extra))
                continue
            t0 = time.perf_counter()
            outputs: list[str] = []
            if row == "projection_only":
                metrics = _metrics(None, "projected")
            else:
                activation = "identity" if row == "refine_identity" else "sine"
                cfg = dataclasses.replace(
                    config.tex,
                    seed=derive_seed(seed, f"tex-{row}", 0),
                    final_activation=activation,
                )
                extractor, refiner = build_texture_nets(
                    derive_seed(seed, f"tex-init-{row}", 0),
                    base=cfg.base,
                    feature_channels=cfg.feature_channels,
                    final_activation=activation,
                )
                tex = train_texture(
                    extractor, refiner, target, None, cfg, samples=train_samples
                )
                path = seed_dir / f"{row}.ckpt"
                save_tex_checkpoint(str(path), tex)
                outputs = [str(path.relative_to(root))]
                metrics = _metrics(tex, "refined")
            per_row[row].append(metrics)
            ledger.append(
                LedgerRecord(
                    command=command,
                    config_hash=config_hash,
                    inputs=["data/target"],
                    outputs=outputs,
                    wall_time_s=round(time.perf_counter() - t0, 3),
                    seed=seed,
                    extra=metrics,
                )
            )

    table = _build_table(TEX_ROWS, per_row)
    means = {row["key"]: row["l1"]["mean"] for row in table["rows"]}
    table["metric_note"] = "l1: lower is better; ssim: higher is better"
    table["gaps"] = {
        "projection_minus_identity": means["projection_only"] - means["refine_identity"],
        "identity_minus_sine": means["refine_identity"] - means["refine_sine"],
    }
    _write_table(root, table, ("l1", "ssim"))
    return table


def rebuild_texture_table(root: Path | str) -> dict:
    """Reconstruct the texture table purely from ledger records."""
    root = Path(root)
    ledger = RunLedger.load(root / "ledger.jsonl")
    per_row: dict[str, list[dict]] = {key: [] for key, _ in TEX_ROWS}
    for record in ledger.records:
        parts = record.command.split(":")
        if len(parts) == 3 and parts[0] == "tex" and parts[1] in per_row and "l1" in record.extra:
            per_row[parts[1]].append(dict(record.extra))
    if any(not v for v in per_row.values()):
        raise ConfigError("ledger does not cover all three texture rows")
    return _build_table(TEX_ROWS, per_row)
