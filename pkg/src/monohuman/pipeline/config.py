"""Experiment configuration: nested stage configs, layout, seed fan-out.

A single master seed fans out to one seed per pipeline stage through
``derive_seed(master_seed, "stage-<name>", 0)``; the resolved values are
recorded in the run ledger so a stored run documents exactly what each
stage received. Seed fields inside the nested stage configs apply only
when a stage is invoked on its own (CLI subcommands); the full pipeline
always overrides them from the master seed.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError
from ..geometry.training import GeoTrainConfig
from ..hallucinator.stages import HalTrainConfig
from ..seeding import derive_seed
from ..synthcorpus.corpus import CorpusConfig
from ..texture.training import TexTrainConfig

EXPERIMENT_FORMAT_VERSION = 1

STAGE_NAMES = (
    "gen-data",
    "train-hal-vanilla",
    "train-hal-sa",
    "train-hal-pa",
    "train-hal-style",
    "train-geo",
    "train-tex",
    "reconstruct-evaluate",
)


def default_layout() -> dict[str, str]:
    """Relative paths of every artifact a full run produces."""
    return {
        "source_data": "data/source",
        "target_data": "data/target",
        "hal_vanilla": "checkpoints/hal_vanilla.ckpt",
        "hal_sa": "checkpoints/hal_sa.ckpt",
        "hal_pa": "checkpoints/hal_pa.ckpt",
        "hal_style": "checkpoints/hal_style.ckpt",
        "pairs_sa": "pairs/sa",
        "pairs_pa": "pairs/pa",
        "geometry": "checkpoints/geometry.ckpt",
        "texture": "checkpoints/texture.ckpt",
        "pred": "pred",
        "report": "report.json",
        "metrics_csv": "metrics.csv",
        "config": "config.json",
        "ledger": "ledger.jsonl",
    }


def _toy_source_corpus() -> CorpusConfig:
    return CorpusConfig(kind="source", n_scenes=300, seed=0)


def _toy_target_corpus() -> CorpusConfig:
    return CorpusConfig(
        kind="target",
        n_scenes=40,
        seed=0,
        target_yaws_deg=(0, 90, 180, 270),
        occ_uniform=1200,
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a full train/reconstruct/evaluate run depends on."""

    source_corpus: CorpusConfig = field(default_factory=_toy_source_corpus)
    target_corpus: CorpusConfig = field(default_factory=_toy_target_corpus)
    hal: HalTrainConfig = field(default_factory=HalTrainConfig)
    geo: GeoTrainConfig = field(default_factory=GeoTrainConfig)
    tex: TexTrainConfig = field(default_factory=TexTrainConfig)
    grid_resolution: int = 64
    metric_seed: int = 0
    metric_samples: int = 10000
    aux_loss: str | None = None
    master_seed: int = 0
    layout: dict = field(default_factory=default_layout)
    format_version: int = EXPERIMENT_FORMAT_VERSION

    def __post_init__(self):
        if self.source_corpus.kind != "source":
            raise ConfigError("source_corpus must have kind 'source'")
        if self.target_corpus.kind != "target":
            raise ConfigError("target_corpus must have kind 'target'")
        if self.aux_loss not in (None, "mmd", "coral"):
            raise ConfigError(f"aux_loss must be None, 'mmd' or 'coral', got {self.aux_loss!r}")
        if self.grid_resolution < 8:
            raise ConfigError(f"grid_resolution must be at least 8, got {self.grid_resolution}")
        if self.format_version != EXPERIMENT_FORMAT_VERSION:
            raise ConfigError(f"unsupported experiment format version {self.format_version}")
        missing = set(default_layout()) - set(self.layout)
        if missing:
            raise ConfigError(f"layout is missing entries: {sorted(missing)}")

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "source_corpus": self.source_corpus.to_dict(),
            "target_corpus": self.target_corpus.to_dict(),
            "hal": self.hal.to_dict(),
            "geo": self.geo.to_dict(),
            "tex": self.tex.to_dict(),
            "grid_resolution": self.grid_resolution,
            "metric_seed": self.metric_seed,
            "metric_samples": self.metric_samples,
            "aux_loss": self.aux_loss,
            "master_seed": self.master_seed,
            "layout": dict(self.layout),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        try:
            return cls(
                source_corpus=CorpusConfig.from_dict(d.pop("source_corpus")),
                target_corpus=CorpusConfig.from_dict(d.pop("target_corpus")),
                hal=HalTrainConfig.from_dict(d.pop("hal")),
                geo=GeoTrainConfig.from_dict(d.pop("geo")),
                tex=TexTrainConfig.from_dict(d.pop("tex")),
                **d,
            )
        except TypeError as exc:
            raise ConfigError(f"bad experiment config: {exc}") from exc

    def config_hash(self) -> str:
        """Stable content hash; key order of the input never matters."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def stage_seed(self, stage: str) -> int:
        if stage not in STAGE_NAMES:
            raise ConfigError(f"unknown stage {stage!r}")
        return derive_seed(self.master_seed, f"stage-{stage}", 0)

    def stage_seeds(self) -> dict[str, int]:
        return {name: self.stage_seed(name) for name in STAGE_NAMES}

    def path(self, root: Path | str, key: str) -> Path:
        if key not in self.layout:
            raise ConfigError(f"layout has no entry {key!r}")
        return Path(root) / self.layout[key]

    def save(self, path: Path | str) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: Path | str) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read experiment config {path}: {exc}") from exc
        return cls.from_dict(d)

    def seeded(self) -> "ExperimentConfig":
        """Copy with every stage config's seed resolved from the master seed."""
        return dataclasses.replace(
            self,
            source_corpus=dataclasses.replace(
                self.source_corpus, seed=self.stage_seed("gen-data")
            ),
            target_corpus=dataclasses.replace(
                self.target_corpus, seed=derive_seed(self.master_seed, "stage-gen-data", 1)
            ),
            hal=dataclasses.replace(self.hal, seed=self.stage_seed("train-hal-vanilla")),
            geo=dataclasses.replace(self.geo, seed=self.stage_seed("train-geo")),
            tex=dataclasses.replace(self.tex, seed=self.stage_seed("train-tex")),
        )


def default_toy_config() -> ExperimentConfig:
    """The stock desk-scale experiment used by the end-to-end checks."""
    return ExperimentConfig()
