"""Artifact readers: hash-stamped CSV tables and run summaries."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass


class ArtifactError(ValueError):
    pass


@dataclass
class Table:
    path: str
    config_hash: str
    columns: list[str]
    rows: list[dict]

    def floats(self, column: str) -> list[float]:
        if column not in self.columns:
            raise ArtifactError(f"{self.path}: missing column {column!r}")
        return [float(r[column]) for r in self.rows]


def read_table(path: str) -> Table:
    with open(path) as fh:
        first = fh.readline().strip()
        if not first.startswith("# config_hash="):
            raise ArtifactError(f"{path}: missing '# config_hash=' header line")
        config_hash = first.split("=", 1)[1]
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise ArtifactError(f"{path}: no data rows")
    return Table(path, config_hash, list(rows[0].keys()), rows)


def read_summary(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("config_hash", "config", "summary"):
        if key not in doc:
            raise ArtifactError(f"{path}: summary missing field {key!r}")
    return doc


def check_hashes(tables, summary: dict | None) -> str:
    """All artifacts combined into one overlay must share one config hash."""
    hashes = {t.config_hash for t in tables}
    if summary is not None:
        hashes.add(summary["config_hash"])
    if len(hashes) != 1:
        raise ArtifactError(
            f"config_hash mismatch across overlay inputs: {sorted(hashes)}"
        )
    return next(iter(hashes))
