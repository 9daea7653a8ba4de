"""Versioned binary checkpoints for the hallucinator networks.

Layout: magic ``MHCK``, little-endian uint32 header length, UTF-8 JSON
header, then raw little-endian float32 tensor data concatenated in the
header's parameter-table order. The header records the training stage,
guidance kind, config snapshot, lineage (ancestor stages, root first),
and the named parameter table (name, shape, dtype).
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np
import torch

from ..errors import ConfigError
from .networks import DiscriminatorNet, GeneratorNet

MAGIC = b"MHCK"
FORMAT_VERSION = 1
MAX_LINEAGE_HOPS = 3


@dataclass
class StageCheckpoint:
    """Trained generator/discriminator pair plus provenance."""

    stage: str
    guidance_kind: str
    gen: GeneratorNet
    disc: DiscriminatorNet
    config: dict
    lineage: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def child(self, stage: str, guidance_kind: str | None = None) -> "StageCheckpoint":
        """New checkpoint derived from this one, extending the lineage."""
        return StageCheckpoint(
            stage=stage,
            guidance_kind=guidance_kind or self.guidance_kind,
            gen=self.gen,
            disc=self.disc,
            config=dict(self.config),
            lineage=[*self.lineage, self.stage],
            meta={},
        )


def _param_items(ckpt: StageCheckpoint) -> list[tuple[str, torch.Tensor]]:
    items = [(f"gen.{k}", v) for k, v in ckpt.gen.state_dict().items()]
    items += [(f"disc.{k}", v) for k, v in ckpt.disc.state_dict().items()]
    return items


def save_checkpoint(path: str, ckpt: StageCheckpoint) -> None:
    if len(ckpt.lineage) > MAX_LINEAGE_HOPS:
        raise ConfigError(f"lineage {ckpt.lineage} exceeds {MAX_LINEAGE_HOPS} hops")
    items = _param_items(ckpt)
    header = {
        "format_version": FORMAT_VERSION,
        "stage": ckpt.stage,
        "guidance_kind": ckpt.guidance_kind,
        "config": ckpt.config,
        "lineage": list(ckpt.lineage),
        "meta": ckpt.meta,
        "params": [[name, list(t.shape), "float32"] for name, t in items],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for _, t in items:
            f.write(t.detach().cpu().numpy().astype("<f4").tobytes())
    os.replace(tmp, path)


def load_checkpoint(path: str) -> StageCheckpoint:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise ConfigError(f"{path} is not a hallucinator checkpoint")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode("utf-8"))
        if header["format_version"] != FORMAT_VERSION:
            raise ConfigError(f"unsupported checkpoint version {header['format_version']}")
        if len(header["lineage"]) > MAX_LINEAGE_HOPS:
            raise ConfigError(f"lineage {header['lineage']} exceeds {MAX_LINEAGE_HOPS} hops")
        gen = GeneratorNet(base=int(header["config"].get("base", 32)))
        disc = DiscriminatorNet()
        state = {"gen": {}, "disc": {}}
        for name, shape, dtype in header["params"]:
            if dtype != "float32":
                raise ConfigError(f"unsupported parameter dtype {dtype}")
            n = int(np.prod(shape)) if shape else 1
            raw = np.frombuffer(f.read(n * 4), dtype="<f4").reshape(shape)
            owner, key = name.split(".", 1)
            state[owner][key] = torch.from_numpy(raw.copy())
        gen.load_state_dict(state["gen"])
        disc.load_state_dict(state["disc"])
    return StageCheckpoint(
        stage=header["stage"],
        guidance_kind=header["guidance_kind"],
        gen=gen,
        disc=disc,
        config=header["config"],
        lineage=list(header["lineage"]),
        meta=header["meta"],
    )
