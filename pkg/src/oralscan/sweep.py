"""Resolution-degradation sweep: predict every manifest image at every tier,
aggregate accuracies, and fit the accuracy-vs-log-pixel-count trend."""

from __future__ import annotations

import io
import json
import os
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import imaging, metrics
from .dataset import DatasetManifest
from .network import ClassLabel, predict
from .trainer import Checkpoint


@dataclass
class TierResult:
    tier: imaging.ResolutionTier
    per_class: dict[str, dict]  # wire name -> {correct, total, accuracy}
    overall_accuracy: float
    mean_average_precision: Optional[float]


@dataclass
class PredictionRecord:
    path: str
    tier: str
    truth: str
    label: str
    confidence: float
    distribution: tuple[float, float, float]
    width: int
    height: int
    native: bool  # source was at/below the tier height, so no resample happened
    hardware: Optional[str]


@dataclass
class SweepReport:
    tiers: list[TierResult]
    predictions: list[PredictionRecord]
    fit: Optional[metrics.LogFit]
    fit_notice: Optional[str]
    hardware_breakdown: Optional[dict]
    metadata: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "tiers": [
                {
                    "tier": t.tier.name,
                    "height": t.tier.height,
                    "pixel_count": t.tier.pixel_count,
                    "per_class": t.per_class,
                    "overall_accuracy": t.overall_accuracy,
                    "mAP": t.mean_average_precision,
                }
                for t in self.tiers
            ],
            "log_fit": (
                {"a": self.fit.a, "b": self.fit.b, "r2": self.fit.r2} if self.fit else None
            ),
            "log_fit_notice": self.fit_notice,
            "hardware_breakdown": self.hardware_breakdown,
            "predictions": [
                {
                    "path": p.path,
                    "tier": p.tier,
                    "truth": p.truth,
                    "label": p.label,
                    "confidence": p.confidence,
                    "distribution": list(p.distribution),
                    "width": p.width,
                    "height": p.height,
                    "native": p.native,
                    "hardware": p.hardware,
                }
                for p in self.predictions
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        """Fixed column order: tier,height,pixel_count,class,accuracy."""
        buf = io.StringIO()
        buf.write("tier,height,pixel_count,class,accuracy\n")
        for t in self.tiers:
            for name, cell in t.per_class.items():
                buf.write(f"{t.tier.name},{t.tier.height},{t.tier.pixel_count},"
                          f"{name},{cell['accuracy']!r}\n")
            buf.write(f"{t.tier.name},{t.tier.height},{t.tier.pixel_count},"
                      f"overall,{t.overall_accuracy!r}\n")
        return buf.getvalue()


def _run_timestamp() -> str:
    """UTC ISO timestamp; honors SOURCE_DATE_EPOCH so reports can be reproducible."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def _tier_table(records: list[PredictionRecord]) -> tuple[dict[str, dict], float]:
    per_class: dict[str, dict] = {}
    for c in ClassLabel:
        mine = [r for r in records if r.truth == c.wire_name]
        correct = sum(1 for r in mine if r.label == r.truth)
        per_class[c.wire_name] = {
            "correct": correct,
            "total": len(mine),
            "accuracy": correct / len(mine) if mine else 0.0,
        }
    overall = sum(1 for r in records if r.label == r.truth) / len(records)
    return per_class, overall


def run_sweep(manifest: DatasetManifest, checkpoint: Checkpoint,
              tiers: Sequence[imaging.ResolutionTier] = imaging.ALL_TIERS) -> SweepReport:
    """Degrade -> input tensor -> predict for every (image, tier) pair.

    Per-class accuracy is that class's recall (fraction of its images labeled
    correctly); the log fit regresses overall accuracy on ln(canonical tier
    pixel count). Per-image geometry is recorded because degradation never
    upsamples small sources.
    """
    if not manifest.entries:
        raise ValueError("sweep needs a non-empty manifest")
    if not tiers:
        raise ValueError("sweep needs at least one tier")
    tiers = sorted(tiers, key=lambda t: t.height)
    model = checkpoint.model
    side = model.config.input_size

    records: list[PredictionRecord] = []
    for entry in manifest.entries:
        img = imaging.decode((manifest.root / entry.path).read_bytes())
        for tier in tiers:
            degraded = imaging.degrade_to_tier(img, tier)
            pred = predict(model, imaging.to_input_tensor(degraded, side))
            records.append(
                PredictionRecord(
                    path=entry.path,
                    tier=tier.name,
                    truth=entry.label.wire_name,
                    label=pred.label.wire_name,
                    confidence=pred.confidence,
                    distribution=pred.distribution,
                    width=degraded.width,
                    height=degraded.height,
                    native=degraded.height == img.height and degraded.width == img.width,
                    hardware=entry.hardware,
                )
            )

    tier_results: list[TierResult] = []
    for tier in tiers:
        mine = [r for r in records if r.tier == tier.name]
        per_class, overall = _tier_table(mine)
        aps = []
        for c in ClassLabel:
            truths = np.array([r.truth == c.wire_name for r in mine])
            if truths.any():
                scores = np.array([r.distribution[int(c)] for r in mine])
                aps.append(metrics.average_precision(metrics.pr_curve(scores, truths)))
        m_ap = metrics.mean_average_precision(aps) if aps else None
        tier_results.append(
            TierResult(
                tier=tier,
                per_class=per_class,
                overall_accuracy=overall,
                mean_average_precision=m_ap,
            )
        )

    fit = None
    fit_notice = None
    points = [(float(t.tier.pixel_count), t.overall_accuracy) for t in tier_results]
    if len({p[0] for p in points}) >= 2:
        fit = metrics.log_fit(points)
    else:
        fit_notice = "log fit omitted: fewer than 2 distinct tier pixel counts"

    breakdown = None
    if any(r.hardware for r in records):
        breakdown = {}
        for tag in ("with", "without"):
            tagged = [r for r in records if r.hardware == tag]
            if not tagged:
                continue
            breakdown[tag] = {}
            for tier in tiers:
                mine = [r for r in tagged if r.tier == tier.name]
                if mine:
                    _, overall = _tier_table(mine)
                    breakdown[tag][tier.name] = {"overall_accuracy": overall, "n": len(mine)}

    return SweepReport(
        tiers=tier_results,
        predictions=records,
        fit=fit,
        fit_notice=fit_notice,
        hardware_breakdown=breakdown,
        metadata={
            "checkpoint_digest": checkpoint.digest,
            "manifest_digest": manifest.digest,
            "seed": checkpoint.metadata.get("seed"),
            "timestamp": _run_timestamp(),
            "tiers": [t.name for t in tiers],
            "per_class_accuracy_definition": "recall",
            "fit_x_axis": "canonical_tier_pixel_count",
        },
    )
