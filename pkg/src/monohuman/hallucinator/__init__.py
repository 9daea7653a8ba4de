"""Guided back-view hallucination with a domain-alignment curriculum."""

from .checkpoint import StageCheckpoint, load_checkpoint, save_checkpoint
from .data import ViewData, build_guidance, load_view, record_by_id, silhouette_of, view_pairs
from .guidance import (
    GUIDANCE_CHANNELS,
    KEYPOINT_KIND,
    SEG_KIND,
    Guidance,
    flip_guidance,
    keypoint_guidance,
    seg_guidance,
    silhouette_seg_guidance,
)
from .losses import coral_loss, hinge_d_loss, hinge_g_loss, mmd_loss
from .networks import DiscriminatorNet, GeneratorNet, build_networks, symmetrize_for_flip
from .stages import (
    HalTrainConfig,
    PseudoPair,
    compute_score_threshold,
    eval_backview_l1,
    load_pseudo_pairs,
    save_pseudo_pairs,
    stage_pose_alignment,
    stage_semantic_alignment,
    source_pairs_for_style,
    stage_style,
    synthesize,
    synthesize_back_view,
    train_vanilla,
)

__all__ = [
    "GUIDANCE_CHANNELS",
    "KEYPOINT_KIND",
    "SEG_KIND",
    "DiscriminatorNet",
    "GeneratorNet",
    "Guidance",
    "HalTrainConfig",
    "PseudoPair",
    "StageCheckpoint",
    "ViewData",
    "build_guidance",
    "build_networks",
    "compute_score_threshold",
    "coral_loss",
    "eval_backview_l1",
    "flip_guidance",
    "hinge_d_loss",
    "hinge_g_loss",
    "keypoint_guidance",
    "load_checkpoint",
    "load_pseudo_pairs",
    "load_view",
    "mmd_loss",
    "record_by_id",
    "save_checkpoint",
    "save_pseudo_pairs",
    "seg_guidance",
    "silhouette_of",
    "silhouette_seg_guidance",
    "stage_pose_alignment",
    "stage_semantic_alignment",
    "source_pairs_for_style",
    "stage_style",
    "symmetrize_for_flip",
    "synthesize",
    "synthesize_back_view",
    "train_vanilla",
    "view_pairs",
]
