"""The 3-class screening model: conv/ReLU/pool stages into a dense head."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np

from .tensor_ops import (
    ConvKernelSet,
    PoolIndexMap,
    ShapeError,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    maxpool2_backward,
    maxpool2_forward,
    relu_backward,
    relu_forward,
    softmax,
)


class ClassLabel(IntEnum):
    """Stable integer codes; the same order is used on the wire and in checkpoints."""

    CANCEROUS = 0
    NON_CANCEROUS = 1
    NEGATIVE = 2

    @property
    def wire_name(self) -> str:
        return _WIRE_NAMES[self]

    @classmethod
    def from_wire(cls, name: str) -> "ClassLabel":
        try:
            return _WIRE_LOOKUP[name]
        except KeyError:
            raise ValueError(f"unknown class label {name!r}") from None


_WIRE_NAMES = {
    ClassLabel.CANCEROUS: "cancerous",
    ClassLabel.NON_CANCEROUS: "non_cancerous",
    ClassLabel.NEGATIVE: "negative",
}
_WIRE_LOOKUP = {v: k for k, v in _WIRE_NAMES.items()}

CLASS_NAMES = tuple(_WIRE_NAMES[c] for c in ClassLabel)


class ConfigError(ValueError):
    """Model configuration violates a structural invariant."""


@dataclass(frozen=True)
class ModelConfig:
    """Architecture description; a model is reproducible from this plus nothing else."""

    input_size: int = 128
    conv_stages: tuple[tuple[int, int], ...] = ((16, 3), (32, 3), (64, 3))
    hidden_units: int = 128
    num_classes: int = 3
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "conv_stages", tuple(tuple(s) for s in self.conv_stages))
        if not self.conv_stages:
            raise ConfigError("at least one conv stage required")
        if self.input_size < 1 or self.input_size % (2 ** len(self.conv_stages)) != 0:
            raise ConfigError(
                f"input_size {self.input_size} not divisible by 2^{len(self.conv_stages)} "
                f"(one halving per pooling stage)"
            )
        for filters, ksize in self.conv_stages:
            if filters < 1:
                raise ConfigError(f"conv stage needs at least one filter, got {filters}")
            if ksize < 1 or ksize % 2 == 0:
                raise ConfigError(f"kernel size must be odd, got {ksize}")
        if self.hidden_units < 1:
            raise ConfigError(f"hidden_units must be positive, got {self.hidden_units}")
        if self.num_classes != 3:
            raise ConfigError(f"model is fixed at 3 classes, got {self.num_classes}")

    @property
    def flat_features(self) -> int:
        side = self.input_size >> len(self.conv_stages)
        return self.conv_stages[-1][0] * side * side

    def param_count(self) -> int:
        total = 0
        in_ch = 3
        for filters, ksize in self.conv_stages:
            total += filters * in_ch * ksize * ksize + filters
            in_ch = filters
        total += self.hidden_units * self.flat_features + self.hidden_units
        total += self.num_classes * self.hidden_units + self.num_classes
        return total

    def to_dict(self) -> dict:
        return {
            "input_size": self.input_size,
            "conv_stages": [list(s) for s in self.conv_stages],
            "hidden_units": self.hidden_units,
            "num_classes": self.num_classes,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            input_size=int(d["input_size"]),
            conv_stages=tuple(tuple(s) for s in d["conv_stages"]),
            hidden_units=int(d["hidden_units"]),
            num_classes=int(d["num_classes"]),
            seed=int(d["seed"]),
        )


@dataclass
class Model:
    config: ModelConfig
    stages: list[ConvKernelSet]
    fc1_weight: np.ndarray
    fc1_bias: np.ndarray
    fc2_weight: np.ndarray
    fc2_bias: np.ndarray

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        """All parameter tensors in a fixed order (the checkpoint order)."""
        out = []
        for i, k in enumerate(self.stages):
            out.append((f"conv{i}.weight", k.weights))
            out.append((f"conv{i}.bias", k.bias))
        out.append(("fc1.weight", self.fc1_weight))
        out.append(("fc1.bias", self.fc1_bias))
        out.append(("fc2.weight", self.fc2_weight))
        out.append(("fc2.bias", self.fc2_bias))
        return out

    def set_parameter(self, name: str, value: np.ndarray) -> None:
        for pname, arr in self.parameters():
            if pname == name:
                if arr.shape != value.shape:
                    raise ShapeError(f"{name}: expected shape {arr.shape}, got {value.shape}")
                arr[...] = value
                return
        raise KeyError(name)

    def param_count(self) -> int:
        return sum(arr.size for _, arr in self.parameters())


@dataclass
class Prediction:
    label: ClassLabel
    distribution: tuple[float, float, float]
    confidence: float


@dataclass
class ForwardCache:
    """Per-call activations retained for backward; tied to the model that made it."""

    model: Model
    stage_inputs: list[np.ndarray] = field(default_factory=list)
    conv_outs: list[np.ndarray] = field(default_factory=list)
    pool_maps: list[PoolIndexMap] = field(default_factory=list)
    flat: Optional[np.ndarray] = None
    fc1_out: Optional[np.ndarray] = None
    fc1_act: Optional[np.ndarray] = None
    logits: Optional[np.ndarray] = None


def build(config: ModelConfig) -> Model:
    """He-normal hidden weights (std = sqrt(2/fan_in)), zero biases, seeded.

    The output layer starts at zero so the untrained model predicts the
    uniform distribution; it picks up gradient after the first update.
    """
    rng = np.random.default_rng(config.seed)
    stages = []
    in_ch = 3
    for filters, ksize in config.conv_stages:
        fan_in = in_ch * ksize * ksize
        w = rng.normal(0.0, math.sqrt(2.0 / fan_in), (filters, in_ch, ksize, ksize))
        stages.append(
            ConvKernelSet(
                weights=w.astype(np.float32),
                bias=np.zeros(filters, dtype=np.float32),
                stride=1,
                padding=ksize // 2,
            )
        )
        in_ch = filters
    flat = config.flat_features
    fc1_w = rng.normal(0.0, math.sqrt(2.0 / flat), (config.hidden_units, flat))
    return Model(
        config=config,
        stages=stages,
        fc1_weight=fc1_w.astype(np.float32),
        fc1_bias=np.zeros(config.hidden_units, dtype=np.float32),
        fc2_weight=np.zeros((config.num_classes, config.hidden_units), dtype=np.float32),
        fc2_bias=np.zeros(config.num_classes, dtype=np.float32),
    )


def forward(model: Model, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Run conv/ReLU/pool stages then the dense head; cache suffices for backward."""
    s = model.config.input_size
    if x.shape != (3, s, s):
        raise ShapeError(f"expected input shape (3, {s}, {s}), got {x.shape}")
    cache = ForwardCache(model=model)
    h = x
    for k in model.stages:
        cache.stage_inputs.append(h)
        conv = conv2d_forward(h, k)
        cache.conv_outs.append(conv)
        act = relu_forward(conv)
        h, pool_map = maxpool2_forward(act)
        cache.pool_maps.append(pool_map)
    cache.flat = h.reshape(-1)
    cache.fc1_out = dense_forward(cache.flat, model.fc1_weight, model.fc1_bias)
    cache.fc1_act = relu_forward(cache.fc1_out)
    logits = dense_forward(cache.fc1_act, model.fc2_weight, model.fc2_bias)
    cache.logits = logits
    return logits, cache


def backward(model: Model, cache: ForwardCache, grad_logits: np.ndarray) -> list[np.ndarray]:
    """Gradients for every parameter tensor, in model.parameters() order."""
    if cache.model is not model or cache.logits is None:
        raise ValueError("cache does not belong to this model or is incomplete")
    if grad_logits.shape != (model.config.num_classes,):
        raise ShapeError(
            f"grad_logits shape {grad_logits.shape} != ({model.config.num_classes},)"
        )
    g, gw2, gb2 = dense_backward(cache.fc1_act, model.fc2_weight, grad_logits)
    g = relu_backward(cache.fc1_out, g)
    g, gw1, gb1 = dense_backward(cache.flat, model.fc1_weight, g)

    last = model.stages[-1]
    side = model.config.input_size >> len(model.stages)
    g = g.reshape(last.weights.shape[0], side, side)

    stage_grads: list[tuple[np.ndarray, np.ndarray]] = []
    for i in reversed(range(len(model.stages))):
        g = maxpool2_backward(cache.pool_maps[i], g)
        g = relu_backward(cache.conv_outs[i], g)
        g, gw, gb = conv2d_backward(cache.stage_inputs[i], model.stages[i], g)
        stage_grads.append((gw, gb))

    grads: list[np.ndarray] = []
    for gw, gb in reversed(stage_grads):
        grads.extend([gw, gb])
    grads.extend([gw1, gb1, gw2, gb2])
    return grads


def predict(model: Model, x: np.ndarray) -> Prediction:
    """Softmax over the logits; argmax label with lowest-index tie-break."""
    logits, _ = forward(model, x)
    probs = softmax(logits.astype(np.float64))
    label = ClassLabel(int(np.argmax(probs)))
    return Prediction(
        label=label,
        distribution=tuple(float(p) for p in probs),
        confidence=float(probs[label]),
    )
