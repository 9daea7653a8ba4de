"""Command-line interface for corpus generation, training, and evaluation.

Exit codes: 0 on success, 2 when a stage fails mid-run, 3 for
configuration problems (bad flags, malformed config JSON, missing
artifacts a command depends on). ``MONOHUMAN_THREADS`` caps worker
counts for every command.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import logging
import sys
from pathlib import Path

import click
import torch

from .errors import ConfigError, MonohumanError
from .evaluation.report import EvalConfig, evaluate_pipeline
from .geometry.training import (
    GeoTrainConfig,
    load_geo_checkpoint,
    save_geo_checkpoint,
    train_geometry,
)
from .hallucinator.checkpoint import load_checkpoint, save_checkpoint
from .hallucinator.stages import (
    HalTrainConfig,
    eval_backview_l1,
    load_pseudo_pairs,
    save_pseudo_pairs,
    source_pairs_for_style,
    stage_pose_alignment,
    stage_semantic_alignment,
    stage_style,
    train_vanilla,
)
from .pipeline.ablation import (
    DdaAblationConfig,
    TexAblationConfig,
    run_dda_ablation,
    run_texture_ablation,
)
from .pipeline.config import ExperimentConfig, default_toy_config
from .pipeline.experiment import (
    reconstruct_record,
    resolve_workers,
    run_full_experiment,
    stage_plan,
)
from .pipeline.ledger import RunLedger
from .synthcorpus.corpus import CorpusConfig, DatasetManifest, generate_corpus
from .texture.networks import build_texture_nets
from .texture.training import (
    TexTrainConfig,
    load_tex_checkpoint,
    save_tex_checkpoint,
    train_texture,
)

log = logging.getLogger("monohuman")

EXIT_STAGE_FAILURE = 2
EXIT_CONFIG_ERROR = 3


def _load_config_json(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _manifest(data_dir: str) -> DatasetManifest:
    path = Path(data_dir)
    if path.is_dir():
        path = path / "manifest.json"
    if not path.exists():
        raise ConfigError(f"no corpus manifest at {path}")
    return DatasetManifest.load(path)


def _cli_errors(fn):
    """Map package exceptions onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG_ERROR)
        except MonohumanError as exc:
            click.echo(f"stage failed: {exc}", err=True)
            sys.exit(EXIT_STAGE_FAILURE)

    return wrapper


@click.group()
@click.option("--verbose", is_flag=True, help="Log progress at INFO level.")
def main(verbose: bool):
    """Monocular humanoid digitization on a procedural synthetic corpus."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command("gen-data")
@click.option("--kind", type=click.Choice(["source", "target"]), required=True)
@click.option("--n-scenes", type=int, default=None, help="Override scene count.")
@click.option("--seed", type=int, default=None, help="Override corpus seed.")
@click.option("--config", "config_path", type=str, default=None, help="CorpusConfig JSON.")
@click.option("--out", "out_dir", type=str, required=True)
@click.option("--workers", type=int, default=None)
@_cli_errors
def gen_data(kind, n_scenes, seed, config_path, out_dir, workers):
    """Generate a procedural corpus (source pairs or target scans)."""
    d = _load_config_json(config_path)
    d.setdefault("kind", kind)
    if d["kind"] != kind:
        raise ConfigError(f"--kind {kind} conflicts with config kind {d['kind']!r}")
    d.setdefault("n_scenes", 40 if kind == "target" else 300)
    if n_scenes is not None:
        d["n_scenes"] = n_scenes
    if seed is not None:
        d["seed"] = seed
    cfg = CorpusConfig.from_dict(d)
    manifest = generate_corpus(cfg, out_dir, workers=resolve_workers(workers))
    click.echo(f"wrote {len(manifest.records())} records under {out_dir}")


@main.command("train-hal")
@click.option("--stage", type=click.Choice(["vanilla", "sa", "pa", "st", "ft"]), required=True)
@click.option("--from", "parent_path", type=str, default=None, help="Parent checkpoint.")
@click.option("--vanilla", "vanilla_path", type=str, default=None,
              help="Vanilla checkpoint (pa scoring).")
@click.option("--data", "source_dir", type=str, default=None, help="Source corpus dir.")
@click.option("--target", "target_dir", type=str, default=None, help="Target corpus dir.")
@click.option("--pairs-in", type=str, default=None, help="Pseudo-pair dir to read.")
@click.option("--pairs-out", type=str, default=None, help="Pseudo-pair dir to write.")
@click.option("--aux-loss", type=click.Choice(["mmd", "coral"]), default=None)
@click.option("--config", "config_path", type=str, default=None, help="HalTrainConfig JSON.")
@click.option("--out", "out_path", type=str, required=True)
@click.option("--workers", type=int, default=None)
@_cli_errors
def train_hal(stage, parent_path, vanilla_path, source_dir, target_dir,
              pairs_in, pairs_out, aux_loss, config_path, out_path, workers):
    """Train one hallucinator stage of the alignment curriculum."""
    torch.set_num_threads(resolve_workers(workers))
    cfg = HalTrainConfig.from_dict(_load_config_json(config_path)) if config_path else HalTrainConfig()
    parent = load_checkpoint(parent_path) if parent_path else None
    source = _manifest(source_dir) if source_dir else None
    target = _manifest(target_dir) if target_dir else None

    if stage == "vanilla":
        if source is None:
            raise ConfigError("--data (source corpus) is required for the vanilla stage")
        ckpt = train_vanilla(source, cfg)
    elif stage == "sa":
        if parent is None or source is None:
            raise ConfigError("sa needs --from (vanilla checkpoint) and --data")
        ckpt, pairs = stage_semantic_alignment(parent, source, cfg)
        if pairs_out:
            save_pseudo_pairs(pairs_out, pairs)
    elif stage == "pa":
        if parent is None or source is None or target is None or not pairs_in:
            raise ConfigError("pa needs --from, --data, --target, and --pairs-in")
        vanilla = load_checkpoint(vanilla_path) if vanilla_path else parent
        sa_pairs = load_pseudo_pairs(pairs_in, source=source, sigma=cfg.heatmap_sigma)
        ckpt, pairs = stage_pose_alignment(parent, sa_pairs, source, target, vanilla, cfg)
        if pairs_out:
            save_pseudo_pairs(pairs_out, pairs)
    else:
        if parent is None or target is None:
            raise ConfigError(f"{stage} needs --from and --target")
        pseudo = None
        if stage == "st":
            if pairs_in:
                pseudo = load_pseudo_pairs(
                    pairs_in, source=source, target=target, sigma=cfg.heatmap_sigma
                )
            elif source is not None:
                pseudo = source_pairs_for_style(source, sigma=cfg.heatmap_sigma)
            else:
                raise ConfigError("st needs --pairs-in or --data to build joint batches")
        ckpt = stage_style(
            parent, target, cfg, mode=stage, pseudo_pairs=pseudo,
            source=source, aux_loss=aux_loss,
        )
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out_path, ckpt)
    click.echo(f"stage {stage} checkpoint written to {out_path}")


@main.command("train-geo")
@click.option("--data", "target_dir", type=str, required=True, help="Target corpus dir.")
@click.option("--hal", "hal_path", type=str, default=None, help="Hallucinator checkpoint.")
@click.option("--config", "config_path", type=str, default=None, help="GeoTrainConfig JSON.")
@click.option("--out", "out_path", type=str, required=True)
@click.option("--workers", type=int, default=None)
@_cli_errors
def train_geo(target_dir, hal_path, config_path, out_path, workers):
    """Train normal estimators and the dual-resolution occupancy field."""
    torch.set_num_threads(resolve_workers(workers))
    cfg = GeoTrainConfig.from_dict(_load_config_json(config_path)) if config_path else GeoTrainConfig()
    hal = load_checkpoint(hal_path) if hal_path else None
    geo = train_geometry(_manifest(target_dir), hal, cfg)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    save_geo_checkpoint(out_path, geo)
    click.echo(f"geometry checkpoint written to {out_path}")


@main.command("train-tex")
@click.option("--data", "target_dir", type=str, required=True, help="Target corpus dir.")
@click.option("--hal", "hal_path", type=str, default=None)
@click.option("--geo", "geo_path", type=str, default=None)
@click.option("--config", "config_path", type=str, default=None, help="TexTrainConfig JSON.")
@click.option("--out", "out_path", type=str, required=True)
@click.option("--workers", type=int, default=None)
@_cli_errors
def train_tex(target_dir, hal_path, geo_path, config_path, out_path, workers):
    """Train the texture feature extractor and vertex color refiner."""
    torch.set_num_threads(resolve_workers(workers))
    cfg = TexTrainConfig.from_dict(_load_config_json(config_path)) if config_path else TexTrainConfig()
    hal = load_checkpoint(hal_path) if hal_path else None
    geo = load_geo_checkpoint(geo_path) if geo_path else None
    extractor, refiner = build_texture_nets(
        cfg.seed, base=cfg.base, feature_channels=cfg.feature_channels,
        final_activation=cfg.final_activation,
    )
    tex = train_texture(extractor, refiner, _manifest(target_dir), hal, cfg, geo=geo)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    save_tex_checkpoint(out_path, tex)
    click.echo(f"texture checkpoint written to {out_path}")


@main.command("reconstruct")
@click.option("--data", "target_dir", type=str, required=True, help="Target corpus dir.")
@click.option("--geo", "geo_path", type=str, required=True)
@click.option("--hal", "hal_path", type=str, default=None)
@click.option("--tex", "tex_path", type=str, default=None)
@click.option("--split", type=click.Choice(["train", "test"]), default="test")
@click.option("--resolution", type=int, default=64)
@click.option("--out", "out_dir", type=str, required=True)
@click.option("--workers", type=int, default=None)
@_cli_errors
def reconstruct(target_dir, geo_path, hal_path, tex_path, split, resolution, out_dir, workers):
    """Reconstruct colored meshes for every scene of a corpus split."""
    torch.set_num_threads(resolve_workers(workers))
    target = _manifest(target_dir)
    geo = load_geo_checkpoint(geo_path)
    hal = load_checkpoint(hal_path) if hal_path else None
    tex = load_tex_checkpoint(tex_path) if tex_path else None
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scene_ids = sorted({r["scene_id"] for r in target.records(split)})
    written = 0
    for sid in scene_ids:
        records = [r for r in target.records(split) if r["scene_id"] == sid]
        record = min(records, key=lambda r: r.get("yaw_deg", 0.0))
        mesh, _values = reconstruct_record(hal, geo, tex, target, record, resolution)
        if mesh.num_faces:
            mesh.save_ply(out / f"{sid}.ply")
            written += 1
        else:
            click.echo(f"scene {sid}: empty reconstruction, skipped", err=True)
    click.echo(f"wrote {written}/{len(scene_ids)} meshes to {out_dir}")


@main.command("evaluate")
@click.option("--pred", "pred_dir", type=str, required=True)
@click.option("--gt", "gt_dir", type=str, required=True, help="Corpus dir or manifest.")
@click.option("--out", "out_json", type=str, required=True)
@click.option("--csv", "out_csv", type=str, default=None)
@click.option("--seed", type=int, default=0)
@click.option("--split", type=click.Choice(["train", "test"]), default="test")
@click.option("--workers", type=int, default=None)
@_cli_errors
def evaluate(pred_dir, gt_dir, out_json, out_csv, seed, split, workers):
    """Score predicted meshes against corpus ground truth."""
    target = _manifest(gt_dir)
    report = evaluate_pipeline(
        pred_dir,
        target,
        config=EvalConfig(seed=seed, image_size=target.data["generation_config"]["image_size"]),
        split=split,
        out_json=out_json,
        out_csv=out_csv,
        workers=resolve_workers(workers),
    )
    for name, value in sorted(report.aggregates.items()):
        click.echo(f"{name}: {value:.6f}")


@main.command("run")
@click.option("--config", "config_path", type=str, default=None, help="ExperimentConfig JSON.")
@click.option("--out", "out_dir", type=str, required=True)
@click.option("--dry-run", is_flag=True)
@click.option("--workers", type=int, default=None)
@_cli_errors
def run(config_path, out_dir, dry_run, workers):
    """Run (or resume) the full train/reconstruct/evaluate pipeline."""
    cfg = (
        ExperimentConfig.from_dict(_load_config_json(config_path))
        if config_path
        else default_toy_config()
    )
    if dry_run:
        for line in stage_plan(cfg):
            click.echo(line)
        return
    ledger = run_full_experiment(cfg, out_dir, workers=workers)
    report_path = cfg.path(out_dir, "report")
    if report_path.exists():
        payload = json.loads(report_path.read_text(encoding="utf-8"))
        click.echo(f"voxel IoU (mean): {payload['voxel_iou']['mean']:.4f}")
        click.echo(f"report: {report_path}")
    click.echo(f"ledger records: {len(ledger.records)}")


@main.command("ablate-dda")
@click.option("--config", "config_path", type=str, default=None, help="DdaAblationConfig JSON.")
@click.option("--out", "out_dir", type=str, required=True)
@click.option("--workers", type=int, default=None)
@_cli_errors
def ablate_dda(config_path, out_dir, workers):
    """Train the six curriculum variants over seeds and tabulate."""
    cfg = (
        DdaAblationConfig.from_dict(_load_config_json(config_path))
        if config_path
        else DdaAblationConfig()
    )
    table = run_dda_ablation(cfg, out_dir, workers=workers)
    click.echo((Path(out_dir) / "table.txt").read_text(encoding="utf-8"))
    if table["inversions"]:
        click.echo(f"flagged inversions: {len(table['inversions'])}")


@main.command("ablate-tex")
@click.option("--config", "config_path", type=str, default=None, help="TexAblationConfig JSON.")
@click.option("--out", "out_dir", type=str, required=True)
@click.option("--workers", type=int, default=None)
@_cli_errors
def ablate_tex(config_path, out_dir, workers):
    """Score the three texture completion variants over seeds."""
    cfg = (
        TexAblationConfig.from_dict(_load_config_json(config_path))
        if config_path
        else TexAblationConfig()
    )
    run_texture_ablation(cfg, out_dir, workers=workers)
    click.echo((Path(out_dir) / "table.txt").read_text(encoding="utf-8"))


@main.command("verify")
@click.option("--run", "run_dir", type=str, required=True, help="Run root with a ledger.")
@click.option("--ledger", "ledger_name", type=str, default="ledger.jsonl")
@_cli_errors
def verify(run_dir, ledger_name):
    """Check that every artifact the ledger references still exists."""
    root = Path(run_dir)
    ledger_path = root / ledger_name
    if not ledger_path.exists():
        raise ConfigError(f"no ledger at {ledger_path}")
    ledger = RunLedger.load(ledger_path)
    result = ledger.verify(root)
    for rel in result["missing"]:
        click.echo(f"missing: {rel}", err=True)
    for rel in result["unreferenced"]:
        click.echo(f"unreferenced: {rel}")
    if result["missing"]:
        click.echo(f"{len(result['missing'])} referenced artifacts are gone", err=True)
        sys.exit(EXIT_STAGE_FAILURE)
    click.echo(f"ledger ok: {len(ledger.records)} records, all artifacts present")


if __name__ == "__main__":
    main()
