"""Minibatch momentum-SGD training loop, stratified splitting, evaluation, and
versioned binary checkpoints."""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import metrics
from .dataset import DatasetManifest
from .network import ClassLabel, Model, ModelConfig, backward, build, forward, predict
from .tensor_ops import cross_entropy, softmax

Sample = tuple[np.ndarray, int]
ProgressSink = Callable[[dict], None]


@dataclass(frozen=True)
class HyperParams:
    batch_size: int = 32
    epochs: int = 20
    learning_rate: float = 0.01
    momentum: float = 0.9
    eval_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        # learning_rate 0 is allowed: it must leave parameters untouched
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0,1), got {self.momentum}")
        if not 0 < self.eval_fraction < 1:
            raise ValueError(f"eval_fraction must be in (0,1), got {self.eval_fraction}")


class TrainingDivergedError(RuntimeError):
    """Loss went non-finite; carries the epoch and iteration where it happened."""

    def __init__(self, epoch: int, iteration: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch} iteration {iteration}")
        self.epoch = epoch
        self.iteration = iteration


@dataclass
class EvalStats:
    tally: metrics.ConfusionTally
    accuracy: float
    precision: dict[str, metrics.MetricValue]
    recall: dict[str, metrics.MetricValue]
    average_precision: dict[str, Optional[float]]
    mean_average_precision: Optional[float]

    def summary_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": {k: v.value for k, v in self.precision.items()},
            "recall": {k: v.value for k, v in self.recall.items()},
            "average_precision": self.average_precision,
            "mAP": self.mean_average_precision,
        }


@dataclass
class EpochRecord:
    epoch: int
    mean_train_loss: float
    eval: Optional[EvalStats]


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    weight_updates: int = 0


def iterations_per_epoch(n_train: int, batch_size: int) -> int:
    """floor(n_train / batch_size); the trailing partial batch is dropped."""
    if n_train < 1:
        raise ValueError(f"n_train must be positive, got {n_train}")
    if batch_size < 1:
        raise ValueError(f"batch_size must be positive, got {batch_size}")
    return n_train // batch_size


def split_dataset(manifest: DatasetManifest, eval_fraction: float,
                  seed: int) -> tuple[DatasetManifest, DatasetManifest]:
    """Deterministic stratified split; eval gets floor(class_count * fraction) per class."""
    if not manifest.entries:
        raise ValueError("cannot split an empty manifest")
    if not 0 < eval_fraction < 1:
        raise ValueError(f"eval_fraction must be in (0,1), got {eval_fraction}")
    by_class: dict[int, list[int]] = {}
    for i, e in enumerate(manifest.entries):
        by_class.setdefault(int(e.label), []).append(i)
    for label, idxs in sorted(by_class.items()):
        if len(idxs) < 2:
            raise ValueError(
                f"class {ClassLabel(label).wire_name} has {len(idxs)} sample(s); need >= 2"
            )
    rng = np.random.default_rng(seed)
    eval_idx: set[int] = set()
    for label in sorted(by_class):
        idxs = np.array(by_class[label])
        perm = rng.permutation(len(idxs))
        n_eval = int(len(idxs) * eval_fraction)
        eval_idx.update(int(i) for i in idxs[perm[:n_eval]])
    train_entries = [e for i, e in enumerate(manifest.entries) if i not in eval_idx]
    eval_entries = [e for i, e in enumerate(manifest.entries) if i in eval_idx]
    return (
        DatasetManifest.from_entries(manifest.root, train_entries),
        DatasetManifest.from_entries(manifest.root, eval_entries),
    )


def evaluate(model: Model, samples: Sequence[Sample]) -> EvalStats:
    """Score a sample set: confusion tally, per-class P/R and AP, macro mAP."""
    tally = metrics.ConfusionTally()
    scores = np.zeros((len(samples), len(ClassLabel)))
    truths = np.zeros(len(samples), dtype=np.int64)
    for i, (x, label) in enumerate(samples):
        pred = predict(model, x)
        tally.add(label, int(pred.label))
        scores[i] = pred.distribution
        truths[i] = label
    prec = {c.wire_name: metrics.precision(tally, c) for c in ClassLabel}
    rec = {c.wire_name: metrics.recall(tally, c) for c in ClassLabel}
    aps: dict[str, Optional[float]] = {}
    for c in ClassLabel:
        mask = truths == int(c)
        if mask.any():
            curve = metrics.pr_curve(scores[:, int(c)], mask)
            aps[c.wire_name] = metrics.average_precision(curve)
        else:
            aps[c.wire_name] = None
    defined = [v for v in aps.values() if v is not None]
    m_ap = metrics.mean_average_precision(defined) if defined else None
    return EvalStats(
        tally=tally,
        accuracy=tally.accuracy(),
        precision=prec,
        recall=rec,
        average_precision=aps,
        mean_average_precision=m_ap,
    )


def train(model: Model, train_samples: Sequence[Sample], eval_samples: Sequence[Sample],
          hp: HyperParams, progress: Optional[ProgressSink] = None) -> tuple[Model, TrainHistory]:
    """Momentum SGD: v <- mu*v - lr*g, w <- w + v, gradients averaged per batch.

    Each epoch reshuffles with the seeded generator and runs
    floor(n/batch_size) iterations; evaluation runs after every epoch.
    """
    n = len(train_samples)
    iters = iterations_per_epoch(n, hp.batch_size) if n else 0
    if iters < 1:
        raise ValueError(
            f"empty epoch: {n} training samples with batch size {hp.batch_size}"
        )
    params = [arr for _, arr in model.parameters()]
    velocities = [np.zeros_like(p) for p in params]
    rng = np.random.default_rng(hp.seed)
    history = TrainHistory()
    lr = np.float32(hp.learning_rate)
    mu = np.float32(hp.momentum)

    for epoch in range(1, hp.epochs + 1):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for it in range(1, iters + 1):
            batch = perm[(it - 1) * hp.batch_size : it * hp.batch_size]
            grad_acc = [np.zeros(p.shape, dtype=np.float64) for p in params]
            loss_sum = 0.0
            for si in batch:
                x, label = train_samples[si]
                logits, cache = forward(model, x)
                probs = softmax(logits)
                loss, grad_logits = cross_entropy(probs, label)
                grads = backward(model, cache, grad_logits)
                loss_sum += loss
                for acc, g in zip(grad_acc, grads):
                    acc += g
            mean_loss = loss_sum / hp.batch_size
            if not np.isfinite(mean_loss):
                raise TrainingDivergedError(epoch, it, mean_loss)
            for p, v, acc in zip(params, velocities, grad_acc):
                g = (acc / hp.batch_size).astype(np.float32)
                v *= mu
                v -= lr * g
                p += v
            history.weight_updates += 1
            epoch_loss += mean_loss
            if progress is not None:
                progress({"epoch": epoch, "iter": it, "loss": mean_loss})
        stats = evaluate(model, eval_samples) if eval_samples else None
        history.records.append(
            EpochRecord(epoch=epoch, mean_train_loss=epoch_loss / iters, eval=stats)
        )
    return model, history


# Checkpoint layout: 4 magic bytes "OCSN", u32 LE version, u64 LE header
# length, UTF-8 JSON header (config + metadata + ordered tensor shapes),
# then raw little-endian float32 payloads in header order.

CHECKPOINT_MAGIC = b"OCSN"
CHECKPOINT_VERSION = 1


class CheckpointError(Exception):
    """Base class for checkpoint load failures."""


class CheckpointMagicError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class CheckpointFormatError(CheckpointError):
    """Header/payload shapes or config are mutually inconsistent."""


@dataclass
class Checkpoint:
    model: Model
    metadata: dict
    version: int
    digest: str


def checkpoint_bytes(model: Model, metadata: Optional[dict] = None) -> bytes:
    tensors = [{"name": name, "shape": list(arr.shape)} for name, arr in model.parameters()]
    header = json.dumps(
        {
            "config": model.config.to_dict(),
            "metadata": metadata or {},
            "tensors": tensors,
        },
        sort_keys=True,
    ).encode("utf-8")
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION),
             struct.pack("<Q", len(header)), header]
    for _, arr in model.parameters():
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def save_checkpoint(model: Model, path: str | Path, metadata: Optional[dict] = None) -> str:
    """Write the checkpoint and return its sha256 hex digest."""
    blob = checkpoint_bytes(model, metadata)
    Path(path).write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Bit-exact inverse of save_checkpoint; validates magic, version, and shapes."""
    blob = Path(path).read_bytes()
    if len(blob) < 4 or blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointMagicError(f"bad magic {blob[:4]!r}, expected {CHECKPOINT_MAGIC!r}")
    if len(blob) < 16:
        raise CheckpointTruncatedError(f"file only {len(blob)} bytes; header incomplete")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"version {version} unsupported (expected {CHECKPOINT_VERSION})")
    (header_len,) = struct.unpack_from("<Q", blob, 8)
    header_end = 16 + header_len
    if len(blob) < header_end:
        raise CheckpointTruncatedError("header truncated")
    try:
        header = json.loads(blob[16:header_end].decode("utf-8"))
        config = ModelConfig.from_dict(header["config"])
        tensors = header["tensors"]
        metadata = header.get("metadata", {})
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointFormatError(f"unreadable header: {exc}") from exc

    model = build(config)
    expected = model.parameters()
    if [t["name"] for t in tensors] != [name for name, _ in expected]:
        raise CheckpointFormatError("tensor list does not match the config's architecture")
    offset = header_end
    for (name, arr), t in zip(expected, tensors):
        if tuple(t["shape"]) != arr.shape:
            raise CheckpointFormatError(
                f"tensor {name}: header shape {t['shape']} != config shape {list(arr.shape)}"
            )
        nbytes = arr.size * 4
        chunk = blob[offset : offset + nbytes]
        if len(chunk) < nbytes:
            raise CheckpointTruncatedError(
                f"tensor {name} truncated: need {nbytes} bytes, have {len(chunk)}"
            )
        arr[...] = np.frombuffer(chunk, dtype="<f4").reshape(arr.shape)
        offset += nbytes
    if offset != len(blob):
        raise CheckpointFormatError(f"{len(blob) - offset} unexpected trailing bytes")
    return Checkpoint(
        model=model,
        metadata=metadata,
        version=version,
        digest=hashlib.sha256(blob).hexdigest(),
    )
