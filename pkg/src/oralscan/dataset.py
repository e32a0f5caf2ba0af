"""Manifest ingestion, validation, and sample loading for training corpora."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Optional

import numpy as np

from . import imaging
from .network import ClassLabel

LABEL_WIRE_NAMES = {int(c): c.wire_name for c in ClassLabel}

HARDWARE_TAGS = ("with", "without")


class ManifestError(ValueError):
    """Manifest file is malformed; the message carries the offending line."""


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: ClassLabel
    hardware: Optional[str] = None  # "with" | "without" | None


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    entries: tuple[ManifestEntry, ...]
    digest: str

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def from_entries(cls, root: Path, entries) -> "DatasetManifest":
        entries = tuple(entries)
        return cls(root=Path(root), entries=entries, digest=_entries_digest(entries))

    def class_counts(self) -> dict[ClassLabel, int]:
        counts = {c: 0 for c in ClassLabel}
        for e in self.entries:
            counts[e.label] += 1
        return counts


def _entries_digest(entries) -> str:
    h = hashlib.sha256()
    for e in entries:
        h.update(json.dumps([e.path, e.label.wire_name, e.hardware]).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def _check_relative(path: str, lineno: int) -> None:
    p = PurePosixPath(path)
    if p.is_absolute() or path.startswith("/") or "\\" in path:
        raise ManifestError(f"line {lineno}: absolute paths not allowed: {path!r}")
    if ".." in p.parts:
        raise ManifestError(f"line {lineno}: parent traversal not allowed: {path!r}")


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse a JSON-lines manifest: one {"path","label","hardware"} object per line."""
    path = Path(path)
    entries: list[ManifestEntry] = []
    seen: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict) or "path" not in obj or "label" not in obj:
                raise ManifestError(f"line {lineno}: expected object with path and label")
            rel = str(obj["path"])
            _check_relative(rel, lineno)
            if rel in seen:
                raise ManifestError(
                    f"line {lineno}: duplicate path {rel!r} (first seen on line {seen[rel]})"
                )
            seen[rel] = lineno
            try:
                label = ClassLabel.from_wire(str(obj["label"]))
            except ValueError as exc:
                raise ManifestError(f"line {lineno}: {exc}") from exc
            hardware = obj.get("hardware")
            if hardware is not None and hardware not in HARDWARE_TAGS:
                raise ManifestError(
                    f"line {lineno}: hardware tag must be one of {HARDWARE_TAGS} or null, "
                    f"got {hardware!r}"
                )
            entries.append(ManifestEntry(path=rel, label=label, hardware=hardware))
    return DatasetManifest.from_entries(path.parent, entries)


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    lines = []
    for e in manifest.entries:
        lines.append(json.dumps({"path": e.path, "label": e.label.wire_name,
                                 "hardware": e.hardware}))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class ValidationReport:
    total: int
    class_counts: dict[str, int]
    hardware_counts: dict[str, int]
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems


def validate(manifest: DatasetManifest) -> ValidationReport:
    """Check every referenced file exists and decodes; problems are report entries."""
    class_counts = {c.wire_name: 0 for c in ClassLabel}
    hardware_counts = {"with": 0, "without": 0, "untagged": 0}
    problems: list[str] = []
    for e in manifest.entries:
        class_counts[e.label.wire_name] += 1
        hardware_counts[e.hardware if e.hardware else "untagged"] += 1
        full = manifest.root / e.path
        if not full.is_file():
            problems.append(f"missing file: {e.path}")
            continue
        try:
            imaging.decode(full.read_bytes())
        except imaging.ImageError as exc:
            problems.append(f"undecodable file {e.path}: {exc}")
    return ValidationReport(
        total=len(manifest.entries),
        class_counts=class_counts,
        hardware_counts=hardware_counts,
        problems=problems,
    )


def load_samples(manifest: DatasetManifest, side: int) -> list[tuple[np.ndarray, int]]:
    """Decode every manifest image into a network input tensor plus its label code."""
    samples = []
    for e in manifest.entries:
        img = imaging.decode((manifest.root / e.path).read_bytes())
        samples.append((imaging.to_input_tensor(img, side), int(e.label)))
    return samples
