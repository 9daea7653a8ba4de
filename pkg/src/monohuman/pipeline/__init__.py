"""Experiment orchestration: config, ledger, full runs, ablations."""

from .ablation import (
    DDA_ROWS,
    TEX_ROWS,
    DdaAblationConfig,
    TexAblationConfig,
    backview_metrics,
    rebuild_dda_table,
    rebuild_texture_table,
    run_dda_ablation,
    run_texture_ablation,
)
from .config import (
    EXPERIMENT_FORMAT_VERSION,
    STAGE_NAMES,
    ExperimentConfig,
    default_layout,
    default_toy_config,
)
from .experiment import (
    reconstruct_record,
    resolve_workers,
    run_full_experiment,
    stage_plan,
)
from .ledger import LedgerRecord, RunLedger

__all__ = [
    "DDA_ROWS",
    "TEX_ROWS",
    "DdaAblationConfig",
    "TexAblationConfig",
    "backview_metrics",
    "rebuild_dda_table",
    "rebuild_texture_table",
    "run_dda_ablation",
    "run_texture_ablation",
    "EXPERIMENT_FORMAT_VERSION",
    "STAGE_NAMES",
    "ExperimentConfig",
    "default_layout",
    "default_toy_config",
    "reconstruct_record",
    "resolve_workers",
    "run_full_experiment",
    "stage_plan",
    "LedgerRecord",
    "RunLedger",
]
