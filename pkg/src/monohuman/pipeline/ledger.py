"""Append-only JSONL run ledger with atomic writes.

Every pipeline command appends one record naming its inputs and the
artifacts it produced (paths relative to the run root). The file is
rewritten through a temp file and ``os.replace`` so a crash can never
leave a half-written line behind.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..errors import ConfigError

LEDGER_FORMAT_VERSION = 1


@dataclass
class LedgerRecord:
    command: str
    config_hash: str
    inputs: list[str]
    outputs: list[str]
    wall_time_s: float
    seed: int
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["format_version"] = LEDGER_FORMAT_VERSION
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LedgerRecord":
        d = dict(d)
        version = d.pop("format_version", LEDGER_FORMAT_VERSION)
        if version != LEDGER_FORMAT_VERSION:
            raise ConfigError(f"unsupported ledger format version {version}")
        return cls(**d)


class RunLedger:
    """Ordered records of what ran and what it produced."""

    def __init__(self, path: Path | str, records: list[LedgerRecord] | None = None):
        self.path = Path(path)
        self.records: list[LedgerRecord] = list(records or [])

    @classmethod
    def load(cls, path: Path | str) -> "RunLedger":
        path = Path(path)
        records = []
        if path.exists():
            for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    records.append(LedgerRecord.from_dict(json.loads(line)))
                except (json.JSONDecodeError, TypeError) as exc:
                    raise ConfigError(f"{path}:{lineno}: bad ledger line: {exc}") from exc
        return cls(path, records)

    def append(self, record: LedgerRecord) -> None:
        self.records.append(record)
        self._flush()

    def _flush(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        lines = [json.dumps(r.to_dict(), sort_keys=True) for r in self.records]
        tmp.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
        os.replace(tmp, self.path)

    def find(self, command: str, config_hash: str | None = None) -> LedgerRecord | None:
        """Most recent record for a command (and config hash, if given)."""
        for record in reversed(self.records):
            if record.command != command:
                continue
            if config_hash is not None and record.config_hash != config_hash:
                continue
            return record
        return None

    def artifacts(self) -> list[str]:
        seen: dict[str, None] = {}
        for record in self.records:
            for out in record.outputs:
                seen.setdefault(out, None)
        return list(seen)

    def verify(self, root: Path | str) -> dict[str, list[str]]:
        """Check that every referenced artifact still exists on disk.

        Returns ``{"missing": [...], "unreferenced": [...]}``. Missing
        entries are ledger outputs whose files are gone; unreferenced
        entries are files under the run root that no record claims
        (the ledger and its temp file are exempt).
        """
        root = Path(root)
        referenced = set(self.artifacts())
        missing = []
        covered: set[Path] = set()
        for rel in sorted(referenced):
            p = root / rel
            if not p.exists():
                missing.append(rel)
            covered.add(p)
        unreferenced = []
        exempt = {self.path, self.path.with_suffix(self.path.suffix + ".tmp")}
        for p in sorted(root.rglob("*")):
            if not p.is_file() or p in exempt:
                continue
            if any(p == c or c in p.parents for c in covered):
                continue
            unreferenced.append(str(p.relative_to(root)))
        return {"missing": missing, "unreferenced": unreferenced}
