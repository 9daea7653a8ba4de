"""Training stages for the back-view hallucinator.

The curriculum trains on partial-body crops first (vanilla), then walks
the generator toward the target domain without any paired target data:

- semantic alignment: synthesize full-body pseudo pairs from crops using
  full-body guidance exemplars, finetune on them;
- pose alignment: synthesize candidates for target poses, keep those the
  source-stage discriminator scores at or above a threshold, finetune;
- style stage: switch guidance from keypoint heatmaps to part-seg +
  silhouette planes (the seg input head is still at its initialization,
  i.e. fresh) and finetune on target renderings, either alone (ft) or
  jointly with the pseudo pairs (st), optionally with a feature
  distribution-alignment loss.
"""

from __future__ import annotations

import copy
import logging
import os
from dataclasses import asdict, dataclass

import numpy as np
import torch

from ..errors import (
    ConfigError,
    DivergenceError,
    EmptyInput,
    EmptySubsetError,
    GuidanceKindError,
    NoFullBodyGuidance,
    StageError,
)
from ..seeding import derive_seed, rng_for
from ..synthcorpus.corpus import DatasetManifest
from ..synthcorpus.imageio import load_rgb8, read_json, save_rgb8, write_json
from .checkpoint import StageCheckpoint
from .data import (
    ViewData,
    build_guidance,
    has_view,
    load_view,
    record_by_id,
    silhouette_of,
    view_pairs,
)
from .guidance import (
    KEYPOINT_KIND,
    SEG_KIND,
    Guidance,
    keypoint_guidance,
    silhouette_seg_guidance,
)
from .losses import DEFAULT_BANDWIDTHS, coral_loss, hinge_d_loss, hinge_g_loss, mmd_loss
from .networks import build_networks

log = logging.getLogger(__name__)

PAIR_INDEX_VERSION = 1


@dataclass(frozen=True)
class HalTrainConfig:
    """Hyperparameters shared by all hallucinator stages."""

    steps_vanilla: int = 2400
    steps_sa: int = 500
    steps_pa: int = 500
    steps_style: int = 600
    batch_size: int = 4
    lr_vanilla: float = 2e-4
    lr_finetune: float = 5e-5
    adv_weight: float = 0.1
    heatmap_sigma: float = 4.0
    pa_candidates: int = 4
    aux_weight: float = 0.1
    mmd_bandwidths: tuple[float, ...] = DEFAULT_BANDWIDTHS
    base: int = 32
    seed: int = 0
    max_nonfinite: int = 50

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mmd_bandwidths"] = list(self.mmd_bandwidths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "HalTrainConfig":
        d = dict(d)
        if "mmd_bandwidths" in d:
            d["mmd_bandwidths"] = tuple(d["mmd_bandwidths"])
        return cls(**d)


@dataclass
class PseudoPair:
    """Synthesized full-body front/back pair used as stand-in training data."""

    front: np.ndarray
    back: np.ndarray
    guidance_front: Guidance
    guidance_back: Guidance
    provenance: str
    source_id: str
    guidance_id: str
    disc_score: float | None = None


def _to_tensor(images: list[np.ndarray]) -> torch.Tensor:
    return torch.from_numpy(np.stack(images).transpose(0, 3, 1, 2).copy())


def _guid_tensor(guides: list[Guidance]) -> torch.Tensor:
    return torch.from_numpy(np.stack([g.channels for g in guides]))


def synthesize(ckpt: StageCheckpoint, image: np.ndarray, guidance: Guidance) -> np.ndarray:
    """Render the view described by guidance from a single reference image."""
    if guidance.kind != ckpt.guidance_kind:
        raise GuidanceKindError(
            f"checkpoint for stage {ckpt.stage!r} expects {ckpt.guidance_kind!r} "
            f"guidance, got {guidance.kind!r}"
        )
    ckpt.gen.eval()
    with torch.no_grad():
        out = ckpt.gen(_to_tensor([image]), _guid_tensor([guidance]), guidance.kind)
    return out[0].numpy().transpose(1, 2, 0).copy()


def _state_bytes(module: torch.nn.Module) -> bytes:
    return b"".join(
        t.detach().cpu().numpy().tobytes() for _, t in sorted(module.state_dict().items())
    )


class _DivergenceGuard:
    def __init__(self, limit: int, stage: str):
        self.limit = limit
        self.stage = stage
        self.bad = 0

    def update(self, *losses: torch.Tensor) -> None:
        if all(torch.isfinite(x).all() for x in losses):
            self.bad = 0
            return
        self.bad += 1
        if self.bad >= self.limit:
            raise DivergenceError(
                f"stage {self.stage!r}: {self.bad} consecutive non-finite loss steps"
            )


def _adversarial_train(
    gen,
    disc,
    kind: str,
    draw_batch,
    steps: int,
    lr: float,
    config: HalTrainConfig,
    stage: str,
    aux_fn=None,
) -> list[list[float]]:
    """Alternating hinge-GAN steps with an L1 reconstruction term."""
    opt_g = torch.optim.Adam(gen.parameters(), lr=lr, betas=(0.5, 0.999))
    opt_d = torch.optim.Adam(disc.parameters(), lr=lr, betas=(0.5, 0.999))
    guard = _DivergenceGuard(config.max_nonfinite, stage)
    history: list[list[float]] = []
    gen.train()
    disc.train()
    for step in range(steps):
        ref, guid, tgt = draw_batch(step)
        with torch.no_grad():
            fake = gen(ref, guid, kind)
        d_loss = hinge_d_loss(disc(tgt, guid, kind), disc(fake, guid, kind))
        opt_d.zero_grad()
        d_loss.backward()
        opt_d.step()

        fake = gen(ref, guid, kind)
        l1 = (fake - tgt).abs().mean()
        g_loss = l1 + config.adv_weight * hinge_g_loss(disc(fake, guid, kind))
        if aux_fn is not None:
            g_loss = g_loss + config.aux_weight * aux_fn(gen, step)
        opt_g.zero_grad()
        g_loss.backward()
        opt_g.step()

        guard.update(d_loss, g_loss)
        if step % 25 == 0 or step == steps - 1:
            history.append(
                [step, float(l1.detach()), float(g_loss.detach()), float(d_loss.detach())]
            )
    gen.eval()
    disc.eval()
    return history


def _record_batch(manifest, tasks, kind, sigma, rng, batch_size):
    """Draw a batch of sibling-view tasks straight from a corpus manifest."""
    idx = rng.integers(0, len(tasks), size=batch_size)
    refs, guides, tgts = [], [], []
    for i in idx:
        record, ref_key, tgt_key = tasks[int(i)]
        ref = load_view(manifest, record, ref_key)
        tgt = load_view(manifest, record, tgt_key)
        refs.append(ref.rgb)
        guides.append(build_guidance(tgt, kind, sigma=sigma))
        tgts.append(tgt.rgb)
    return _to_tensor(refs), _guid_tensor(guides), _to_tensor(tgts)


def train_vanilla(source: DatasetManifest, config: HalTrainConfig) -> StageCheckpoint:
    """Stage 1: sibling-view prediction on the partial-body crop corpus."""
    tasks = view_pairs(source, "train")
    if not tasks:
        raise EmptyInput("source corpus has no paired training views")
    gen, disc = build_networks(derive_seed(config.seed, "hal-init", 0), base=config.base)
    rng = rng_for(config.seed, "hal-vanilla")

    def draw(step):
        return _record_batch(
            source, tasks, KEYPOINT_KIND, config.heatmap_sigma, rng, config.batch_size
        )

    history = _adversarial_train(
        gen, disc, KEYPOINT_KIND, draw, config.steps_vanilla, config.lr_vanilla, config, "vanilla"
    )
    return StageCheckpoint(
        stage="vanilla",
        guidance_kind=KEYPOINT_KIND,
        gen=gen,
        disc=disc,
        config={"base": config.base, "train": config.to_dict()},
        lineage=[],
        meta={"steps": config.steps_vanilla, "loss_curve": history},
    )


def fullbody_guidance_pool(
    source: DatasetManifest, sigma: float
) -> list[tuple[Guidance, Guidance, str]]:
    """Front/back keypoint guidance for every full-body training record.

    Records without a stored back view get exact synthesized back-view
    keypoints from the scene parameters.
    """
    from .data import synthetic_back_keypoints

    pool = []
    for record in source.records("train"):
        if not record.get("full_body"):
            continue
        front = load_view(source, record, "front")
        size = front.camera.image_size
        guid_f = keypoint_guidance(front.keypoints, size, sigma=sigma)
        if has_view(record, "back"):
            back = load_view(source, record, "back")
            guid_b = keypoint_guidance(back.keypoints, size, sigma=sigma)
        else:
            scene = source.scene(record["scene_id"])
            kps = synthetic_back_keypoints(scene, front.camera)
            guid_b = keypoint_guidance(kps, size, sigma=sigma)
        pool.append((guid_f, guid_b, record["scene_id"]))
    return pool


def _pseudo_tasks(pairs: list[PseudoPair]):
    """Sibling prediction tasks over pseudo pairs, both directions."""
    tasks = []
    for pair in pairs:
        tasks.append((pair.front, pair.guidance_back, pair.back))
        tasks.append((pair.back, pair.guidance_front, pair.front))
    return tasks


def _pseudo_batch(tasks, rng, batch_size):
    idx = rng.integers(0, len(tasks), size=batch_size)
    refs = [tasks[int(i)][0] for i in idx]
    guides = [tasks[int(i)][1] for i in idx]
    tgts = [tasks[int(i)][2] for i in idx]
    return _to_tensor(refs), _guid_tensor(guides), _to_tensor(tgts)


def stage_semantic_alignment(
    ckpt: StageCheckpoint, source: DatasetManifest, config: HalTrainConfig
) -> tuple[StageCheckpoint, list[PseudoPair]]:
    """Stage 2: full-body pseudo pairs from crops, then sibling finetune.

    Synthesis runs with the incoming generator frozen (verified bitwise);
    exactly one pair is produced per source training record.
    """
    pool = fullbody_guidance_pool(source, config.heatmap_sigma)
    if not pool:
        raise NoFullBodyGuidance("no full-body records in the source training split")
    rng = rng_for(config.seed, "hal-sa")
    records = source.records("train")

    frozen = _state_bytes(ckpt.gen)
    pairs: list[PseudoPair] = []
    ckpt.gen.eval()
    for record in records:
        guid_f, guid_b, exemplar_id = pool[int(rng.integers(0, len(pool)))]
        ref = load_view(source, record, "front").rgb
        front = synthesize(ckpt, ref, guid_f)
        back = synthesize(ckpt, ref, guid_b)
        pairs.append(
            PseudoPair(
                front=front,
                back=back,
                guidance_front=guid_f,
                guidance_back=guid_b,
                provenance="sa",
                source_id=record["scene_id"],
                guidance_id=exemplar_id,
            )
        )
    if _state_bytes(ckpt.gen) != frozen:
        raise StageError("generator parameters changed during frozen pseudo-pair synthesis")

    gen = copy.deepcopy(ckpt.gen)
    disc = copy.deepcopy(ckpt.disc)
    tasks = _pseudo_tasks(pairs)

    def draw(step):
        return _pseudo_batch(tasks, rng, config.batch_size)

    history = _adversarial_train(
        gen, disc, KEYPOINT_KIND, draw, config.steps_sa, config.lr_finetune, config, "sa"
    )
    out = StageCheckpoint(
        stage="sa",
        guidance_kind=KEYPOINT_KIND,
        gen=gen,
        disc=disc,
        config=dict(ckpt.config),
        lineage=[*ckpt.lineage, ckpt.stage],
        meta={"steps": config.steps_sa, "n_pairs": len(pairs), "loss_curve": history},
    )
    return out, pairs


def compute_score_threshold(scores) -> float:
    """Median of the scores; an even count averages the two middle values."""
    arr = np.asarray(scores, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyInput("cannot take a threshold over zero scores")
    return float(np.median(arr))


def _disc_score(disc, image: np.ndarray, guidance: Guidance) -> float:
    with torch.no_grad():
        return float(disc(_to_tensor([image]), _guid_tensor([guidance]), guidance.kind)[0])


def stage_pose_alignment(
    ckpt: StageCheckpoint,
    sa_pairs: list[PseudoPair],
    source: DatasetManifest,
    target: DatasetManifest,
    vanilla_ckpt: StageCheckpoint,
    config: HalTrainConfig,
) -> tuple[StageCheckpoint, list[PseudoPair]]:
    """Stage 3: target-pose pseudo pairs filtered by discriminator score.

    The threshold is the median score the source-stage (vanilla)
    discriminator assigns to generator outputs on the held-out source test
    split; candidates synthesized for target-pose guidance survive only at
    or above it.
    """
    if not sa_pairs:
        raise EmptyInput("pose alignment needs pseudo pairs from semantic alignment")
    rng = rng_for(config.seed, "hal-pa")

    test_tasks = [t for t in view_pairs(source, "test") if t[1] == "front"]
    if not test_tasks:
        raise EmptyInput("source corpus has no held-out test records")
    ref_scores = []
    for record, ref_key, tgt_key in test_tasks:
        ref = load_view(source, record, ref_key)
        tgt = load_view(source, record, tgt_key)
        guid = build_guidance(tgt, KEYPOINT_KIND, sigma=config.heatmap_sigma)
        out = synthesize(ckpt, ref.rgb, guid)
        ref_scores.append(_disc_score(vanilla_ckpt.disc, out, guid))
    tau = compute_score_threshold(ref_scores)

    ref_pool = [(p.front, p.source_id, "front") for p in sa_pairs]
    ref_pool += [(p.back, p.source_id, "back") for p in sa_pairs]

    pairs: list[PseudoPair] = []
    all_scores = []
    for record in target.records("train"):
        front = load_view(target, record, "front")
        back = load_view(target, record, "back")
        size = front.camera.image_size
        guid_f = keypoint_guidance(front.keypoints, size, sigma=config.heatmap_sigma)
        guid_b = keypoint_guidance(back.keypoints, size, sigma=config.heatmap_sigma)
        for _ in range(config.pa_candidates):
            ref_img, ref_id, side = ref_pool[int(rng.integers(0, len(ref_pool)))]
            cand_f = synthesize(ckpt, ref_img, guid_f)
            cand_b = synthesize(ckpt, ref_img, guid_b)
            score = 0.5 * (
                _disc_score(vanilla_ckpt.disc, cand_f, guid_f)
                + _disc_score(vanilla_ckpt.disc, cand_b, guid_b)
            )
            all_scores.append(score)
            if score >= tau:
                pairs.append(
                    PseudoPair(
                        front=cand_f,
                        back=cand_b,
                        guidance_front=guid_f,
                        guidance_back=guid_b,
                        provenance="pa",
                        source_id=f"{ref_id}:{side}",
                        guidance_id=record["scene_id"],
                        disc_score=score,
                    )
                )
    if not pairs:
        counts, edges = np.histogram(all_scores, bins=10)
        hist = ", ".join(
            f"[{edges[i]:.3f},{edges[i + 1]:.3f}):{counts[i]}" for i in range(len(counts))
        )
        raise EmptySubsetError(
            f"no pose-alignment candidate reached threshold {tau:.4f}; score histogram: {hist}"
        )

    gen = copy.deepcopy(ckpt.gen)
    disc = copy.deepcopy(ckpt.disc)
    tasks = _pseudo_tasks(pairs)

    def draw(step):
        return _pseudo_batch(tasks, rng, config.batch_size)

    history = _adversarial_train(
        gen, disc, KEYPOINT_KIND, draw, config.steps_pa, config.lr_finetune, config, "pa"
    )
    out = StageCheckpoint(
        stage="pa",
        guidance_kind=KEYPOINT_KIND,
        gen=gen,
        disc=disc,
        config=dict(ckpt.config),
        lineage=[*ckpt.lineage, ckpt.stage],
        meta={
            "steps": config.steps_pa,
            "threshold": tau,
            "n_candidates": len(all_scores),
            "n_retained": len(pairs),
            "loss_curve": history,
        },
    )
    return out, pairs


def _pseudo_seg_guidance(
    pair: PseudoPair,
    source: DatasetManifest | None,
    target: DatasetManifest | None,
) -> tuple[Guidance, Guidance]:
    """Seg-style guidance for a pseudo pair.

    Part planes come from the guiding pose's GT segmentation; the
    silhouette plane comes from the pair's own synthesized images.
    """
    manifest = target if pair.provenance == "pa" else source
    if manifest is None:
        raise ConfigError(
            f"need the {'target' if pair.provenance == 'pa' else 'source'} manifest "
            "to rebuild seg guidance for pseudo pairs"
        )
    record = record_by_id(manifest, pair.guidance_id)
    seg_f = load_view(manifest, record, "front").part_seg
    seg_b = (
        load_view(manifest, record, "back").part_seg if has_view(record, "back") else seg_f
    )
    guid_f = silhouette_seg_guidance(silhouette_of(pair.front), seg_f)
    guid_b = silhouette_seg_guidance(silhouette_of(pair.back), seg_b)
    return guid_f, guid_b


def source_pairs_for_style(source: DatasetManifest, sigma: float = 4.0) -> list[PseudoPair]:
    """Real source view pairs packaged for the style stage's union mode.

    Without preceding alignment stages, simultaneous training unions the
    raw source pairs with target data; this adapter presents them in the
    same shape as synthesized pseudo pairs (provenance "sa" so guidance
    lookups resolve against the source manifest).
    """
    pairs = []
    seen = set()
    for record, ref_key, tgt_key in view_pairs(source, "train"):
        if record["scene_id"] in seen:
            continue
        seen.add(record["scene_id"])
        ref = load_view(source, record, ref_key)
        other = load_view(source, record, tgt_key)
        pairs.append(
            PseudoPair(
                front=ref.rgb,
                back=other.rgb,
                guidance_front=build_guidance(ref, SEG_KIND, sigma=sigma),
                guidance_back=build_guidance(other, SEG_KIND, sigma=sigma),
                provenance="sa",
                source_id=record["scene_id"],
                guidance_id=record["scene_id"],
            )
        )
    return pairs


def stage_style(
    ckpt: StageCheckpoint,
    target: DatasetManifest,
    config: HalTrainConfig,
    mode: str = "st",
    pseudo_pairs: list[PseudoPair] | None = None,
    source: DatasetManifest | None = None,
    aux_loss: str | None = None,
) -> StageCheckpoint:
    """Stage 4: switch to seg + silhouette guidance and finetune on targets.

    ``ft`` trains on target renderings alone; ``st`` trains on the union
    of target renderings and pseudo pairs, optionally adding a
    distribution-alignment loss (``mmd`` or ``coral``) between generator
    bottleneck features of the two branches. The seg guidance head has
    never been trained before this stage, so it starts fresh while the
    trunk is retained.
    """
    if mode not in ("ft", "st"):
        raise ConfigError(f"style mode must be 'ft' or 'st', got {mode!r}")
    if aux_loss not in (None, "mmd", "coral"):
        raise ConfigError(f"aux_loss must be None, 'mmd' or 'coral', got {aux_loss!r}")
    if aux_loss and mode != "st":
        raise ConfigError("distribution alignment needs the union mode 'st'")

    target_tasks = view_pairs(target, "train")
    if not target_tasks:
        raise EmptyInput("target corpus has no paired training views")
    rng = rng_for(config.seed, f"hal-style-{mode}")

    pseudo_tasks = []
    if mode == "st":
        if not pseudo_pairs:
            raise EmptyInput("style mode 'st' needs pseudo pairs to union with target data")
        for pair in pseudo_pairs:
            guid_f, guid_b = _pseudo_seg_guidance(pair, source, target)
            pseudo_tasks.append((pair.front, guid_b, pair.back))
            pseudo_tasks.append((pair.back, guid_f, pair.front))

    gen = copy.deepcopy(ckpt.gen)
    disc = copy.deepcopy(ckpt.disc)

    def draw_target(batch_size):
        return _record_batch(target, target_tasks, SEG_KIND, config.heatmap_sigma, rng, batch_size)

    def draw(step):
        if mode == "ft" or not pseudo_tasks:
            return draw_target(config.batch_size)
        n_pseudo = int(rng.integers(1, config.batch_size))
        pr, pg, pt = _pseudo_batch(pseudo_tasks, rng, n_pseudo)
        tr, tg, tt = draw_target(config.batch_size - n_pseudo)
        return torch.cat([pr, tr]), torch.cat([pg, tg]), torch.cat([pt, tt])

    aux_fn = None
    if aux_loss:
        loss_fn = mmd_loss if aux_loss == "mmd" else coral_loss

        def aux_fn(g, step):
            pr, pg, _ = _pseudo_batch(pseudo_tasks, rng, 2)
            tr, tg, _ = draw_target(2)
            _, feats_p = g(pr, pg, SEG_KIND, return_features=True)
            _, feats_t = g(tr, tg, SEG_KIND, return_features=True)
            if aux_loss == "mmd":
                return loss_fn(feats_p, feats_t, bandwidths=config.mmd_bandwidths)
            return loss_fn(feats_p, feats_t)

    history = _adversarial_train(
        gen, disc, SEG_KIND, draw, config.steps_style, config.lr_finetune, config, mode, aux_fn
    )
    return StageCheckpoint(
        stage=mode,
        guidance_kind=SEG_KIND,
        gen=gen,
        disc=disc,
        config=dict(ckpt.config),
        lineage=[*ckpt.lineage, ckpt.stage],
        meta={
            "steps": config.steps_style,
            "aux_loss": aux_loss,
            "n_pseudo_tasks": len(pseudo_tasks),
            "loss_curve": history,
        },
    )


def eval_backview_l1(
    ckpt: StageCheckpoint, target: DatasetManifest, split: str = "test", sigma: float = 4.0
) -> float:
    """Mean per-image L1 between synthesized and GT back views."""
    records = target.records(split)
    if not records:
        raise EmptyInput(f"target corpus has no {split!r} records")
    errs = []
    for record in records:
        front = load_view(target, record, "front")
        back = load_view(target, record, "back")
        guid = build_guidance(back, ckpt.guidance_kind, sigma=sigma)
        out = synthesize(ckpt, front.rgb, guid)
        errs.append(float(np.abs(out - back.rgb).mean()))
    return float(np.mean(errs))


def synthesize_back_view(
    ckpt: StageCheckpoint, front: ViewData, sigma: float = 4.0
) -> np.ndarray:
    """Back view from a single front view, reusing the front annotations.

    Back-view guidance is the front view's own guidance: the silhouette is
    identical by the co-registration convention and part planes match up
    to self-occlusion, so no back-view annotations are required.
    """
    guid = build_guidance(front, ckpt.guidance_kind, sigma=sigma)
    return synthesize(ckpt, front.rgb, guid)


def save_pseudo_pairs(out_dir: str, pairs: list[PseudoPair]) -> None:
    """Dump pair images as PNGs plus a JSON index with provenance and scores."""
    os.makedirs(out_dir, exist_ok=True)
    index = {"format_version": PAIR_INDEX_VERSION, "pairs": []}
    for i, pair in enumerate(pairs):
        front_name = f"pair{i:05d}_front.png"
        back_name = f"pair{i:05d}_back.png"
        save_rgb8(os.path.join(out_dir, front_name), pair.front)
        save_rgb8(os.path.join(out_dir, back_name), pair.back)
        index["pairs"].append(
            {
                "front": front_name,
                "back": back_name,
                "provenance": pair.provenance,
                "source_id": pair.source_id,
                "guidance_id": pair.guidance_id,
                "disc_score": pair.disc_score,
            }
        )
    write_json(os.path.join(out_dir, "index.json"), index)


def load_pseudo_pairs(
    pair_dir: str,
    source: DatasetManifest | None = None,
    target: DatasetManifest | None = None,
    sigma: float = 4.0,
) -> list[PseudoPair]:
    """Rebuild pseudo pairs from a dump, regenerating keypoint guidance.

    sa pairs look their guiding pose up in the source manifest, pa pairs
    in the target manifest.
    """
    from .data import synthetic_back_keypoints

    index = read_json(os.path.join(pair_dir, "index.json"))
    if index["format_version"] != PAIR_INDEX_VERSION:
        raise ConfigError(f"unsupported pair index version {index['format_version']}")
    pairs = []
    for entry in index["pairs"]:
        manifest = target if entry["provenance"] == "pa" else source
        if manifest is None:
            raise ConfigError(f"need a manifest to rebuild {entry['provenance']} pair guidance")
        record = record_by_id(manifest, entry["guidance_id"])
        front = load_view(manifest, record, "front")
        size = front.camera.image_size
        guid_f = keypoint_guidance(front.keypoints, size, sigma=sigma)
        if has_view(record, "back"):
            guid_b = keypoint_guidance(
                load_view(manifest, record, "back").keypoints, size, sigma=sigma
            )
        else:
            scene = manifest.scene(record["scene_id"])
            guid_b = keypoint_guidance(
                synthetic_back_keypoints(scene, front.camera), size, sigma=sigma
            )
        pairs.append(
            PseudoPair(
                front=load_rgb8(os.path.join(pair_dir, entry["front"])),
                back=load_rgb8(os.path.join(pair_dir, entry["back"])),
                guidance_front=guid_f,
                guidance_back=guid_b,
                provenance=entry["provenance"],
                source_id=entry["source_id"],
                guidance_id=entry["guidance_id"],
                disc_score=entry["disc_score"],
            )
        )
    return pairs
